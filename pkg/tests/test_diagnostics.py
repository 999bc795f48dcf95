import time

import numpy as np

from lyrnet import autodiff as ad
from lyrnet.autodiff.tensor import make_result
from lyrnet.autodiff import Tensor
from lyrnet.diagnostics import REGISTRY, TOLERANCE, format_table, run_gradchecks

PRIMITIVES = {"add", "sub", "mul", "div", "neg", "exp", "log", "tanh", "gelu", "matmul", "reshape", "transpose",
              "concat", "getitem", "sum", "mean", "embedding_lookup", "take_along_last", "softmax", "log_softmax",
              "cross_entropy", "layer_norm", "dropout"}


def test_registry_covers_primitives_and_composites():
    assert PRIMITIVES <= set(REGISTRY)
    assert {"attention_block", "head_stack", "multi_task_loss"} <= set(REGISTRY)


def test_every_entry_passes_within_a_minute():
    start = time.perf_counter()
    results = run_gradchecks(seed=0)
    assert time.perf_counter() - start < 60
    assert [r.name for r in results] == list(REGISTRY)
    assert all(r.passed and r.max_rel_error < TOLERANCE for r in results), format_table(results)
    assert all(r.n_checked > 0 for r in results)


def test_results_are_seed_reproducible():
    a = run_gradchecks(seed=3, names=["tanh", "softmax"])
    b = run_gradchecks(seed=3, names=["tanh", "softmax"])
    assert [r.max_rel_error for r in a] == [r.max_rel_error for r in b]


def wrong_tanh(a):
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1.0 - out),), "tanh")  # missing square


def test_corrupted_backward_is_detected():
    def build(rng):
        return (lambda x: ad.sum(wrong_tanh(x))), [Tensor(rng.uniform(-2, 2, size=(3, 4)))]

    results = run_gradchecks(registry={"wrong_tanh": build, "tanh": REGISTRY["tanh"]})
    assert [r.passed for r in results] == [False, True]
    assert "FAIL" in format_table(results).splitlines()[1]
