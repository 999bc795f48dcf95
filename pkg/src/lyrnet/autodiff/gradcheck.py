"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError
from .tensor import Tensor

# relative errors are measured against max(|analytic|, |numeric|, ABS_FLOOR),
# so coordinates whose true gradient is ~0 are judged on absolute error;
# below 1e-5 central-difference roundoff (about eps*|f|/step) dominates
ABS_FLOOR = 1e-5


@dataclass
class GradCheckReport:
    max_rel_error: list[float]
    tolerance: float
    n_checked: list[int] = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error, default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABS_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``f(*inputs)`` with central differences.

    ``f`` is re-evaluated on perturbed copies of the inputs, so it must be a
    pure function of them (fix any dropout generator inside ``f``). With
    ``max_coords`` set, only that many randomly chosen coordinates per input
    are perturbed.
    """
    inputs = [Tensor(t.data, requires_grad=True) for t in inputs]
    out = f(*inputs)
    if not isinstance(out, Tensor) or out.size != 1:
        shape = out.shape if isinstance(out, Tensor) else type(out).__name__
        raise ContractError(f"grad_check needs a scalar-valued function, got {shape}")
    out.backward()

    frozen = [Tensor(t.data) for t in inputs]
    errors, counts = [], []
    for i, x in enumerate(inputs):
        analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
        coords = np.arange(x.size)
        if max_coords is not None and x.size > max_coords:
            coords = np.sort((rng or np.random.default_rng(0)).choice(x.size, max_coords, replace=False))
        worst = 0.0
        for c in coords:
            numeric = _central_difference(f, frozen, i, int(c), step)
            err = float(relative_error(analytic.reshape(-1)[c], numeric))
            worst = max(worst, err)
        errors.append(worst)
        counts.append(len(coords))
    return GradCheckReport(errors, tolerance, counts)


def _central_difference(f, frozen: list[Tensor], i: int, coord: int, step: float) -> float:
    base = frozen[i].data
    values = []
    for sign in (1.0, -1.0):
        bumped = base.copy()
        bumped.reshape(-1)[coord] += sign * step
        args = list(frozen)
        args[i] = Tensor(bumped)
        values.append(f(*args).item())
    return (values[0] - values[1]) / (2.0 * step)
