import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lyrnet import autodiff as ad
from lyrnet.autodiff import Tensor
from lyrnet.encoder import init_tensors
from lyrnet.errors import ContractError, InvalidParameterError
from lyrnet.heads import HeadConfig, TaskLogits, forward_heads, parameter_shapes, predict, summarize
from lyrnet.rng import make_rng


def head_params(d=6, seed=0, scale=None):
    shapes = parameter_shapes(d, HeadConfig())
    params = init_tensors(shapes, make_rng(seed))
    if scale is not None:
        rng = make_rng(seed + 100)
        params = {n: Tensor(rng.normal(scale=scale, size=s), requires_grad=True) for n, s in shapes.items()}
    return params


def test_config_enforces_task_classes():
    with pytest.raises(InvalidParameterError):
        HeadConfig(task_classes={"quadrant": 4, "valence": 3, "arousal": 2})
    with pytest.raises(InvalidParameterError):
        HeadConfig(bottleneck_dim=0)
    with pytest.raises(InvalidParameterError):
        HeadConfig(summary_mode="first")


@pytest.mark.parametrize("mode", ["last_token", "mean"])
def test_summarize_single_position_returns_it(mode):
    h = Tensor([[1.5, -2.0, 3.0]])
    np.testing.assert_array_equal(summarize(h, mode).data, [1.5, -2.0, 3.0])


def test_summarize_mean():
    np.testing.assert_array_equal(summarize(Tensor([[1.0, 3.0], [3.0, 5.0]]), "mean").data, [2.0, 4.0])


def test_summarize_last_token_is_final_row():
    h = Tensor(make_rng(0).normal(size=(7, 4)))
    np.testing.assert_array_equal(summarize(h, "last_token").data, h.data[6])


def test_summarize_empty_sequence_is_contract_error():
    with pytest.raises(ContractError):
        summarize(Tensor(np.zeros((0, 4))), "mean")


def test_summarize_batch_excludes_padding():
    h = Tensor(np.arange(24.0).reshape(2, 3, 4))
    lengths = np.array([2, 3])
    last = summarize(h, "last_token", lengths).data
    np.testing.assert_array_equal(last, [h.data[0, 1], h.data[1, 2]])
    mean = summarize(h, "mean", lengths).data
    np.testing.assert_allclose(mean, [h.data[0, :2].mean(0), h.data[1].mean(0)])


def test_zero_summary_zero_heads_gives_zero_logits():
    params = head_params()  # weights random; zero them for the check
    zeros = {n: Tensor(np.zeros_like(p.data)) for n, p in params.items()}
    logits = forward_heads(Tensor(np.zeros(6)), zeros, HeadConfig())
    for task in ("quadrant", "valence", "arousal"):
        assert np.all(logits[task].data == 0.0)


def test_output_shapes():
    logits = forward_heads(Tensor(np.ones(6)), head_params(), HeadConfig())
    assert [logits[t].shape for t in ("quadrant", "valence", "arousal")] == [(4,), (2,), (2,)]
    batch = forward_heads(Tensor(np.ones((3, 6))), head_params(), HeadConfig())
    assert batch["quadrant"].shape == (3, 4)


def test_bottleneck_gradient_is_sum_of_per_task_gradients():
    rng = make_rng(1)
    summary = rng.normal(size=(5, 6))
    targets = {"quadrant": [0, 1, 2, 3, 0], "valence": [0, 1, 1, 0, 0], "arousal": [1, 1, 0, 0, 1]}
    cfg = HeadConfig(dropout_p=0.0)

    def grads(tasks):
        params = head_params(scale=0.5)
        logits = forward_heads(Tensor(summary), params, cfg)
        total = None
        for t in tasks:
            loss = ad.cross_entropy(logits[t], targets[t])
            total = loss if total is None else total + loss
        total.backward()
        return params["heads.bottleneck.weight"].grad

    joint = grads(["quadrant", "valence", "arousal"])
    separate = sum(grads([t]) for t in ["quadrant", "valence", "arousal"])
    np.testing.assert_allclose(joint, separate, atol=1e-10)


def test_eval_mode_is_deterministic():
    params = head_params(scale=0.5)
    s = Tensor(make_rng(2).normal(size=(4, 6)))
    a = forward_heads(s, params, HeadConfig())
    b = forward_heads(s, params, HeadConfig())
    assert a["quadrant"].data.tobytes() == b["quadrant"].data.tobytes()


def logits_of(q, v, a):
    return TaskLogits(Tensor(np.asarray(q, float)), Tensor(np.asarray(v, float)), Tensor(np.asarray(a, float)))


def test_predict_tie_breaks_to_lowest_index():
    assert predict(logits_of([0.2, 0.2, 0.1, 0.2], [0, 0], [1, 1]))["quadrant"] == 0


def test_predict_strict_argmax():
    assert predict(logits_of([1, 0, 0, 0], [-1, 3], [0, 1]))["valence"] == 1


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-10, 10)), arrays(np.float64, 2, elements=st.floats(-10, 10)),
       st.floats(-100, 100))
def test_predict_shift_invariant(q, v, c):
    base = predict(logits_of(q, v, v))
    shifted = predict(logits_of(q + c, v + c, v))
    # a shift can only change an argmax through rounding when entries nearly tie
    if np.sort(q)[-1] - np.sort(q)[-2] > 1e-9:
        assert shifted["quadrant"] == base["quadrant"]
    if abs(v[0] - v[1]) > 1e-9:
        assert shifted["valence"] == base["valence"]
