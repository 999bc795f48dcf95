"""Encoder plus emotion heads, sharing one parameter dictionary."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import heads as H
from .autodiff import Tensor
from .corpus import PAD_ID
from .encoder import EncoderConfig, TransformerEncoder, init_tensors
from .encoder import parameter_shapes as encoder_shapes
from .heads import HeadConfig, TaskLogits
from .rng import make_rng

PRECISIONS = {"float64": np.float64, "float32": np.float32}


def pad_batch(sequences: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences to the longest one. Returns (ids, lengths).

    An empty sequence becomes a single pad token with length 0.
    """
    width = max(1, max((len(s) for s in sequences), default=1))
    ids = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
    lengths = np.zeros(len(sequences), dtype=np.int64)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = s
        lengths[i] = len(s)
    return ids, lengths


class EmotionClassifier:
    """Relative-position transformer encoder feeding a width-8 bottleneck and three task heads."""

    def __init__(self, encoder_config: EncoderConfig, head_config: HeadConfig, params: dict[str, Tensor], precision: str = "float64"):
        self.encoder_config = encoder_config
        self.head_config = head_config
        self.precision = precision
        self.params = params

    @classmethod
    def initialize(cls, encoder_config: EncoderConfig, head_config: HeadConfig | None = None, seed: int = 0,
                   precision: str = "float64") -> "EmotionClassifier":
        head_config = head_config or HeadConfig()
        params = init_tensors(cls.parameter_shapes(encoder_config, head_config), make_rng(seed), PRECISIONS[precision])
        return cls(encoder_config, head_config, params, precision)

    @staticmethod
    def parameter_shapes(encoder_config: EncoderConfig, head_config: HeadConfig) -> dict[str, tuple[int, ...]]:
        shapes = encoder_shapes(encoder_config)
        shapes.update(H.parameter_shapes(encoder_config.d_model, head_config))
        return shapes

    @property
    def params(self) -> dict[str, Tensor]:
        return self._params

    @params.setter
    def params(self, value: dict[str, Tensor]) -> None:
        self._params = value
        self.encoder = TransformerEncoder(self.encoder_config, value)

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def forward(self, ids: np.ndarray, lengths: np.ndarray, train: bool = False, rng=None) -> TaskLogits:
        """Batched logits for right-padded ids [batch, seq_len]."""
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        key_mask = np.arange(ids.shape[1])[None, :] < lengths[:, None]
        hidden, _ = self.encoder.encode_batch(ids, key_mask, None, train, rng)
        summary = H.summarize(hidden, self.head_config.summary_mode, lengths)
        return H.forward_heads(summary, self.params, self.head_config, train, rng)

    def forward_sequences(self, sequences: Sequence[Sequence[int]], train: bool = False, rng=None) -> TaskLogits:
        ids, lengths = pad_batch(sequences)
        return self.forward(ids, lengths, train, rng)

    def predict(self, sequences: Sequence[Sequence[int]], batch_size: int = 32) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """Eval-mode predictions and logits for every sequence, batched in input order."""
        preds = {t: [] for t in H.TASKS}
        logits = {t: [] for t in H.TASKS}
        for start in range(0, len(sequences), batch_size):
            out = self.forward_sequences(sequences[start:start + batch_size])
            for task, p in H.predict(out).items():
                preds[task].append(np.atleast_1d(p))
                logits[task].append(out[task].data)
        return ({t: np.concatenate(v) if v else np.zeros(0, np.int64) for t, v in preds.items()},
                {t: np.concatenate(v) if v else np.zeros((0, 0)) for t, v in logits.items()})
