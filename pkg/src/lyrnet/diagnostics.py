"""Registry of finite-difference gradient checks over every differentiable piece.

Each registry entry builds a scalar function and its random inputs (entries
in [-2, 2] unless the op needs a restricted domain). Non-scalar ops are
reduced with a fixed random weighting so every output coordinate matters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, grad_check
from .encoder import EncoderConfig, attention_scores
from .heads import HeadConfig, forward_heads
from .model import EmotionClassifier
from .rng import make_rng
from .training import model_loss

TOLERANCE = 1e-4
STEP = 1e-5

Case = tuple[Callable[..., Tensor], list[Tensor]]


def _uniform(rng, *shape) -> Tensor:
    return Tensor(rng.uniform(-2.0, 2.0, size=shape))


def _weighted(rng, shape) -> Callable[[Tensor], Tensor]:
    w = Tensor(rng.normal(size=shape))
    return lambda y: ad.sum(y * w)


def _elementwise(op, n_inputs=1, domain=None):
    def build(rng) -> Case:
        if domain is None:
            xs = [_uniform(rng, 3, 4) for _ in range(n_inputs)]
        else:
            xs = [Tensor(rng.uniform(*domain, size=(3, 4))) for _ in range(n_inputs)]
        reduce = _weighted(rng, (3, 4))
        return (lambda *a: reduce(op(*a))), xs
    return build


def _broadcast_add(rng) -> Case:
    reduce = _weighted(rng, (3, 4))
    return (lambda a, b: reduce(ad.add(a, b))), [_uniform(rng, 3, 4), _uniform(rng, 4)]


def _matmul(rng) -> Case:
    reduce = _weighted(rng, (4, 3))
    return (lambda a, b: reduce(ad.matmul(a, b))), [_uniform(rng, 4, 5), _uniform(rng, 5, 3)]


def _reshape(rng) -> Case:
    reduce = _weighted(rng, (4, 3))
    return (lambda a: reduce(ad.reshape(a, (4, 3)))), [_uniform(rng, 2, 6)]


def _transpose(rng) -> Case:
    reduce = _weighted(rng, (4, 2, 3))
    return (lambda a: reduce(ad.transpose(a, (2, 0, 1)))), [_uniform(rng, 2, 3, 4)]


def _concat(rng) -> Case:
    reduce = _weighted(rng, (2, 7))
    return (lambda a, b: reduce(ad.concat([a, b], axis=1))), [_uniform(rng, 2, 3), _uniform(rng, 2, 4)]


def _getitem(rng) -> Case:
    reduce = _weighted(rng, (3, 2))
    index = (np.array([0, 2, 2]), slice(1, 3))
    return (lambda a: reduce(ad.getitem(a, index))), [_uniform(rng, 3, 4)]


def _reduce_sum(rng) -> Case:
    reduce = _weighted(rng, (4,))
    return (lambda a: reduce(ad.sum(a, axis=0))), [_uniform(rng, 3, 4)]


def _reduce_mean(rng) -> Case:
    reduce = _weighted(rng, (3, 1))
    return (lambda a: reduce(ad.mean(a, axis=1, keepdims=True))), [_uniform(rng, 3, 4)]


def _embedding(rng) -> Case:
    ids = np.array([[1, 4, 1], [0, 2, 4]])
    reduce = _weighted(rng, (2, 3, 3))
    return (lambda t: reduce(ad.embedding_lookup(t, ids))), [_uniform(rng, 5, 3)]


def _take_along_last(rng) -> Case:
    index = np.array([[2, 1, 0], [3, 2, 1]])
    reduce = _weighted(rng, (2, 2, 3))
    return (lambda a: reduce(ad.take_along_last(a, index))), [_uniform(rng, 2, 2, 4)]


def _softmax(rng) -> Case:
    reduce = _weighted(rng, (3, 4))
    return (lambda a: reduce(ad.softmax(a))), [_uniform(rng, 3, 4)]


def _log_softmax(rng) -> Case:
    reduce = _weighted(rng, (3, 4))
    return (lambda a: reduce(ad.log_softmax(a))), [_uniform(rng, 3, 4)]


def _cross_entropy(rng) -> Case:
    targets = np.array([0, 3, 1])
    return (lambda a: ad.cross_entropy(a, targets)), [_uniform(rng, 3, 4)]


def _cross_entropy_matmul(rng) -> Case:
    targets = np.array([1, 0, 2])
    return (lambda x, w: ad.cross_entropy(x @ w, targets)), [_uniform(rng, 3, 4), _uniform(rng, 4, 3)]


def _layer_norm(rng) -> Case:
    reduce = _weighted(rng, (2, 8))
    return (lambda x, g, b: reduce(ad.layer_norm(x, g, b))), [_uniform(rng, 2, 8), _uniform(rng, 8), _uniform(rng, 8)]


def _dropout(rng) -> Case:
    reduce = _weighted(rng, (3, 4))
    # a fresh generator per call keeps the mask fixed across perturbations
    return (lambda a: reduce(ad.dropout(a, 0.3, True, make_rng(5)))), [_uniform(rng, 3, 4)]


def _attention_block(rng) -> Case:
    heads, dh, seq = 2, 3, 4
    d = heads * dh
    q_pos = np.arange(seq)
    k_pos = np.arange(seq)
    key_mask = np.array([True, True, True, False])
    reduce = _weighted(rng, (seq, d))

    def split(x):
        return ad.transpose(ad.reshape(x, (seq, heads, dh)), (1, 0, 2))

    def f(x, wq, wk, wv, wr, u, v, wo):
        probs = attention_scores(split(x @ wq), split(x @ wk), wr, u, v, q_pos, k_pos, key_mask)
        mixed = ad.reshape(ad.transpose(probs @ split(x @ wv), (1, 0, 2)), (seq, d))
        return reduce(mixed @ wo)

    scale = 1.0 / np.sqrt(d)
    inputs = [_uniform(rng, seq, d)] + [Tensor(rng.normal(scale=scale, size=(d, d))) for _ in range(4)]
    inputs += [_uniform(rng, heads, dh), _uniform(rng, heads, dh), Tensor(rng.normal(scale=scale, size=(d, d)))]
    return f, inputs


def _head_stack(rng) -> Case:
    d = 6
    config = HeadConfig(bottleneck_dim=8, dropout_p=0.0)
    names = ["heads.bottleneck.weight", "heads.bottleneck.bias"]
    shapes = [(d, 8), (8,)]
    for task, n in config.task_classes.items():
        names += [f"heads.{task}.weight", f"heads.{task}.bias"]
        shapes += [(8, n), (n,)]
    targets = {"quadrant": np.array([2, 0]), "valence": np.array([1, 0]), "arousal": np.array([0, 0])}

    def f(summary, *weights):
        logits = forward_heads(summary, dict(zip(names, weights)), config)
        return ad.add(ad.add(ad.cross_entropy(logits["quadrant"], targets["quadrant"]),
                             ad.cross_entropy(logits["valence"], targets["valence"])),
                      ad.cross_entropy(logits["arousal"], targets["arousal"]))

    inputs = [_uniform(rng, 2, d)] + [Tensor(rng.normal(scale=0.5, size=s)) for s in shapes]
    return f, inputs


def _full_loss(rng) -> Case:
    enc = EncoderConfig(vocab_size=12, n_layers=2, n_heads=2, d_model=8, d_ff=16, dropout_p=0.0)
    heads = HeadConfig(dropout_p=0.0)
    shapes = EmotionClassifier.parameter_shapes(enc, heads)
    names = list(shapes)
    ids = np.array([[3, 5, 7, 2, 9], [4, 11, 6, 0, 0]])
    lengths = np.array([5, 3])
    targets = {"quadrant": np.array([1, 3]), "valence": np.array([1, 0]), "arousal": np.array([0, 1])}
    lambdas = (1.0, 0.7, 0.4)

    def f(*weights):
        model = EmotionClassifier(enc, heads, dict(zip(names, weights)))
        return model_loss(model, ids, lengths, targets, lambdas)[0]

    inputs = []
    for name in names:
        if name.endswith(".gain"):
            inputs.append(Tensor(1.0 + rng.uniform(-0.3, 0.3, size=shapes[name])))
        else:
            inputs.append(Tensor(rng.normal(scale=0.3, size=shapes[name])))
    return f, inputs


REGISTRY: dict[str, Callable[[np.random.Generator], Case]] = {
    "add": _broadcast_add,
    "sub": _elementwise(ad.sub, 2),
    "mul": _elementwise(ad.mul, 2),
    "div": _elementwise(ad.div, 2, domain=(0.5, 2.0)),
    "neg": _elementwise(ad.neg),
    "exp": _elementwise(ad.exp),
    "log": _elementwise(ad.log, domain=(0.2, 2.0)),
    "tanh": _elementwise(ad.tanh),
    "gelu": _elementwise(ad.gelu),
    "matmul": _matmul,
    "reshape": _reshape,
    "transpose": _transpose,
    "concat": _concat,
    "getitem": _getitem,
    "sum": _reduce_sum,
    "mean": _reduce_mean,
    "embedding_lookup": _embedding,
    "take_along_last": _take_along_last,
    "softmax": _softmax,
    "log_softmax": _log_softmax,
    "cross_entropy": _cross_entropy,
    "cross_entropy_matmul": _cross_entropy_matmul,
    "layer_norm": _layer_norm,
    "dropout": _dropout,
    "attention_block": _attention_block,
    "head_stack": _head_stack,
    "multi_task_loss": _full_loss,
}


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    n_checked: int
    seconds: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def run_gradchecks(seed: int = 0, tolerance: float = TOLERANCE, names=None,
                   registry: dict | None = None) -> list[CheckResult]:
    """Run the named registry entries (all by default) in registry order."""
    registry = REGISTRY if registry is None else registry
    results = []
    for name in names or list(registry):
        rng = make_rng(seed)
        f, inputs = registry[name](rng)
        start = time.perf_counter()
        report = grad_check(f, inputs, step=STEP, tolerance=tolerance)
        results.append(CheckResult(name, report.worst, sum(report.n_checked), time.perf_counter() - start, tolerance))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'op':<{width}}  {'max rel err':>12}  {'coords':>6}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.max_rel_error:>12.3e}  {r.n_checked:>6d}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
