"""Shared bottleneck and the three emotion classification heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, InvalidParameterError

TASKS = ("quadrant", "valence", "arousal")
TASK_CLASSES = {"quadrant": 4, "valence": 2, "arousal": 2}
SUMMARY_MODES = ("last_token", "mean")


@dataclass(frozen=True)
class HeadConfig:
    summary_mode: str = "last_token"
    bottleneck_dim: int = 8
    task_classes: dict = field(default_factory=lambda: dict(TASK_CLASSES))
    dropout_p: float = 0.1

    def __post_init__(self):
        if self.summary_mode not in SUMMARY_MODES:
            raise InvalidParameterError(f"summary_mode must be one of {SUMMARY_MODES}, got {self.summary_mode!r}")
        if self.bottleneck_dim < 1:
            raise InvalidParameterError(f"bottleneck_dim must be >= 1, got {self.bottleneck_dim}")
        if dict(self.task_classes) != TASK_CLASSES:
            raise InvalidParameterError(f"task classes must be {TASK_CLASSES}, got {self.task_classes}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidParameterError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")

    def to_dict(self) -> dict:
        return {
            "summary_mode": self.summary_mode,
            "bottleneck_dim": self.bottleneck_dim,
            "task_classes": dict(self.task_classes),
            "dropout_p": self.dropout_p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeadConfig":
        return cls(**d)


@dataclass
class TaskLogits:
    """Per-task logits, each [n_classes] or [batch, n_classes]."""

    quadrant: Tensor
    valence: Tensor
    arousal: Tensor

    def __getitem__(self, task: str) -> Tensor:
        return getattr(self, task)

    def as_dict(self) -> dict[str, Tensor]:
        return {t: getattr(self, t) for t in TASKS}


def parameter_shapes(d_model: int, config: HeadConfig) -> dict[str, tuple[int, ...]]:
    b = config.bottleneck_dim
    shapes = {"heads.bottleneck.weight": (d_model, b), "heads.bottleneck.bias": (b,)}
    for task in TASKS:
        shapes[f"heads.{task}.weight"] = (b, config.task_classes[task])
        shapes[f"heads.{task}.bias"] = (config.task_classes[task],)
    return shapes


def task_parameter_names(task: str) -> tuple[str, str]:
    """Names of the parameters private to one task's head."""
    return f"heads.{task}.weight", f"heads.{task}.bias"


def summarize(hidden: Tensor, mode: str = "last_token", lengths=None) -> Tensor:
    """Reduce hidden states [seq_len, d] (or [batch, seq_len, d]) to [d] (or [batch, d]).

    For batches, ``lengths`` gives the number of non-padding positions per row;
    padding is assumed to sit at the end and is excluded from both modes.
    """
    if mode not in SUMMARY_MODES:
        raise InvalidParameterError(f"unknown summary mode {mode!r}")
    if hidden.shape[-2] < 1:
        raise ContractError("cannot summarize an empty sequence")
    if hidden.ndim == 2:
        return hidden[-1] if mode == "last_token" else ad.mean(hidden, axis=0)

    batch, seq_len, _ = hidden.shape
    lengths = np.full(batch, seq_len) if lengths is None else np.maximum(np.asarray(lengths), 1)
    if mode == "last_token":
        return hidden[np.arange(batch), lengths - 1]
    mask = (np.arange(seq_len)[None, :] < lengths[:, None]).astype(hidden.dtype)
    pooled = ad.sum(hidden * Tensor(mask[:, :, None]), axis=1)
    return pooled * Tensor((1.0 / lengths).astype(hidden.dtype)[:, None])


def forward_heads(summary: Tensor, params: dict[str, Tensor], config: HeadConfig, train: bool = False, rng=None) -> TaskLogits:
    """summary -> dropout -> FC(d_model, bottleneck) -> tanh -> one FC per task."""
    x = ad.dropout(summary, config.dropout_p, train, rng)
    shared = ad.tanh(x @ params["heads.bottleneck.weight"] + params["heads.bottleneck.bias"])
    return TaskLogits(**{t: shared @ params[f"heads.{t}.weight"] + params[f"heads.{t}.bias"] for t in TASKS})


def predict(logits: TaskLogits) -> dict[str, np.ndarray | int]:
    """Argmax per task; ties go to the lowest class index."""
    out = {}
    for task in TASKS:
        pred = np.argmax(logits[task].data, axis=-1)
        out[task] = int(pred) if pred.ndim == 0 else pred
    return out
