"""Weighted multi-task objective, AdamW and the training loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import LyricsDocument, Vocabulary
from .errors import ContractError, DataError, DivergenceError, InvalidParameterError
from .heads import TASKS, task_parameter_names
from .model import EmotionClassifier, pad_batch
from .rng import make_rng, split

log = logging.getLogger(__name__)

# 2e-5 suits fine-tuning a pretrained encoder; a toy model trained from scratch
# needs a larger step, hence the desk preset
FINE_TUNE_LEARNING_RATE = 2e-5
DESK_LEARNING_RATE = 1e-3


@dataclass
class TrainingConfig:
    learning_rate: float = FINE_TUNE_LEARNING_RATE
    batch_size: int = 8
    lambdas: tuple[float, float, float] = (1.0, 1.0, 1.0)
    epochs: int = 1
    weight_decay: float = 0.01
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    grad_clip: float | None = None
    patience: int | None = None

    def __post_init__(self):
        self.lambdas = tuple(float(x) for x in self.lambdas)
        self.adam_betas = tuple(float(x) for x in self.adam_betas)
        if len(self.lambdas) != 3 or any(x < 0 for x in self.lambdas):
            raise InvalidParameterError(f"lambdas must be three non-negative weights, got {self.lambdas}")
        if not any(x > 0 for x in self.lambdas):
            raise InvalidParameterError("at least one task weight must be positive")
        if self.learning_rate <= 0:
            raise InvalidParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidParameterError("batch_size and epochs must be positive")
        if self.weight_decay < 0:
            raise InvalidParameterError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise InvalidParameterError(f"grad_clip must be positive, got {self.grad_clip}")

    @classmethod
    def desk(cls, **overrides) -> "TrainingConfig":
        """Preset for from-scratch toy runs: default settings with a 1e-3 learning rate."""
        return cls(**{"learning_rate": DESK_LEARNING_RATE, **overrides})

    @property
    def task_weights(self) -> dict[str, float]:
        return dict(zip(TASKS, self.lambdas))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        return cls(**d)


def multi_task_loss(l_q: Tensor, l_v: Tensor, l_a: Tensor, lambdas: Sequence[float]) -> Tensor:
    """lambda_1 * L_Q + lambda_2 * L_V + lambda_3 * L_A."""
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) != 3 or any(x < 0 for x in lambdas):
        raise ContractError(f"lambdas must be three non-negative weights, got {lambdas}")
    if not any(lambdas):
        raise ContractError("all task weights are zero: no trainable objective")
    return l_q * lambdas[0] + l_v * lambdas[1] + l_a * lambdas[2]


def batch_targets(docs: Sequence[LyricsDocument]) -> dict[str, np.ndarray]:
    out = {t: np.empty(len(docs), dtype=np.int64) for t in TASKS}
    for i, doc in enumerate(docs):
        if doc.label is None:
            raise DataError(f"document {doc.id!r} has no label")
        for task, idx in doc.label.indices().items():
            out[task][i] = idx
    return out


def model_loss(model: EmotionClassifier, ids, lengths, targets: dict[str, np.ndarray], lambdas,
               train: bool = False, rng=None) -> tuple[Tensor, dict[str, Tensor]]:
    logits = model.forward(ids, lengths, train, rng)
    per_task = {t: ad.cross_entropy(logits[t], targets[t]) for t in TASKS}
    return multi_task_loss(per_task["quadrant"], per_task["valence"], per_task["arousal"], lambdas), per_task


@dataclass
class OptimizerState:
    """AdamW moment accumulators keyed by parameter name, plus the step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, Tensor], names: Sequence[str] | None = None) -> "OptimizerState":
        names = list(params) if names is None else list(names)
        return cls({n: np.zeros_like(params[n].data) for n in names}, {n: np.zeros_like(params[n].data) for n in names})


def adamw_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: OptimizerState, config: TrainingConfig):
    """One AdamW update of every parameter named in ``grads``.

    Returns new ``(params, state)``; inputs are left untouched. Parameters
    absent from ``grads`` are carried over unchanged.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {name!r}")
    beta1, beta2 = config.adam_betas
    lr, wd, eps = config.learning_rate, config.weight_decay, config.adam_eps
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params = dict(params)
    m, v = dict(state.m), dict(state.v)
    for name, g in grads.items():
        w = params[name].data
        if g.shape != w.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {w.shape} for {name!r}")
        m_prev = m.get(name, np.zeros_like(w))
        v_prev = v.get(name, np.zeros_like(w))
        m[name] = beta1 * m_prev + (1.0 - beta1) * g
        v[name] = beta2 * v_prev + (1.0 - beta2) * g * g
        m_hat = m[name] / bc1
        v_hat = v[name] / bc2
        updated = w - lr * (m_hat / (np.sqrt(v_hat) + eps)) - lr * wd * w
        new_params[name] = Tensor(updated.astype(w.dtype, copy=False), requires_grad=True)
    return new_params, OptimizerState(m, v, t)


def trainable_names(params: dict[str, Tensor], lambdas: Sequence[float]) -> list[str]:
    """Every parameter except the private heads of tasks whose weight is zero."""
    frozen = set()
    for task, weight in zip(TASKS, lambdas):
        if weight == 0:
            frozen.update(task_parameter_names(task))
    return [n for n in params if n not in frozen]


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm:
        return grads
    scale = max_norm / (norm + 1e-12)
    return {n: g * scale for n, g in grads.items()}


def corpus_loss(model: EmotionClassifier, docs: Sequence[LyricsDocument], lambdas, batch_size: int = 32) -> dict[str, float]:
    """Eval-mode losses averaged over documents."""
    totals = dict.fromkeys(("total",) + TASKS, 0.0)
    for start in range(0, len(docs), batch_size):
        chunk = docs[start:start + batch_size]
        ids, lengths = pad_batch([d.tokens for d in chunk])
        total, per_task = model_loss(model, ids, lengths, batch_targets(chunk), lambdas)
        totals["total"] += total.item() * len(chunk)
        for t in TASKS:
            totals[t] += per_task[t].item() * len(chunk)
    return {k: v / len(docs) for k, v in totals.items()}


def train(model: EmotionClassifier, docs: Sequence[LyricsDocument], config: TrainingConfig,
          vocab: Vocabulary | None = None, validation: Sequence[LyricsDocument] | None = None):
    """Fit ``model`` in place on labelled, encoded ``docs``.

    Returns ``(checkpoint, log)`` where ``log`` has one entry per epoch; entry
    0 records the untrained model's loss. With ``config.patience`` set and a
    validation split given, training stops once validation quadrant macro-F1
    has not improved for that many epochs.
    """
    from .checkpoint import ModelCheckpoint
    from .evaluation import evaluate_model

    docs = list(docs)
    if not docs:
        raise DataError("cannot train on an empty corpus")
    for d in docs:
        if d.tokens is None:
            raise DataError(f"document {d.id!r} has not been encoded")
    shuffle_rng, dropout_rng = split(make_rng(config.seed), 2)
    names = trainable_names(model.params, config.lambdas)
    state = OptimizerState.zeros_like(model.params, names)

    history = [{"epoch": 0, "loss": corpus_loss(model, docs, config.lambdas)}]
    best, stale = -1.0, 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(docs))
        sums = dict.fromkeys(("total",) + TASKS, 0.0)
        n_batches = 0
        for b, start in enumerate(range(0, len(docs), config.batch_size)):
            batch = [docs[i] for i in order[start:start + config.batch_size]]
            ids, lengths = pad_batch([d.tokens for d in batch])
            model.zero_grad()
            total, per_task = model_loss(model, ids, lengths, batch_targets(batch), config.lambdas, True, dropout_rng)
            if not np.isfinite(total.item()):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}, batch {b}")
            total.backward()
            grads = {n: model.params[n].grad for n in names if model.params[n].grad is not None}
            if config.grad_clip is not None:
                grads = _clip(grads, config.grad_clip)
            try:
                model.params, state = adamw_step(model.params, grads, state, config)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, batch {b}: {exc}") from exc
            sums["total"] += total.item()
            for t in TASKS:
                sums[t] += per_task[t].item()
            n_batches += 1

        report = evaluate_model(model, docs)
        entry = {
            "epoch": epoch,
            "loss": {k: v / n_batches for k, v in sums.items()},
            "train": {t: {"accuracy": report.tasks[t].accuracy, "macro_f1": report.tasks[t].macro_f1} for t in TASKS},
        }
        if validation:
            val = evaluate_model(model, validation)
            entry["validation"] = {t: {"accuracy": val.tasks[t].accuracy, "macro_f1": val.tasks[t].macro_f1} for t in TASKS}
        history.append(entry)
        log.debug("epoch %d loss %.6f", epoch, entry["loss"]["total"])

        if config.patience is not None and validation:
            score = entry["validation"]["quadrant"]["macro_f1"]
            if score > best:
                best, stale = score, 0
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("early stop at epoch %d", epoch)
                    break

    return ModelCheckpoint.from_model(model, vocab, config), history
