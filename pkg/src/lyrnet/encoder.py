"""Self-attention encoder with relative positions and segment recurrence.

Each layer is a post-norm Transformer-XL block. Attention scores decompose
into a content term and a position term,

    score[i, j] = (q_i + u) . k_j  +  (q_i + v) . W_r p(i - j)

where ``u`` and ``v`` are learned per-layer bias vectors and ``p`` is a
sinusoidal embedding of the signed offset between query and key. Only offsets
enter the computation, so shifting every absolute position by a constant
leaves the output unchanged.

With ``memory_len > 0`` each layer also attends over cached, gradient-detached
inputs from the previous segment.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, InvalidParameterError

INIT_STD = 0.02
MASK_VALUE = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 32
    d_ff: int = 64
    dropout_p: float = 0.1
    max_seq_len: int = 1024
    memory_len: int = 0
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        for name in ("vocab_size", "n_layers", "n_heads", "d_model", "d_ff", "max_seq_len"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.d_model % self.n_heads:
            raise InvalidParameterError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.memory_len < 0:
            raise InvalidParameterError(f"memory_len must be >= 0, got {self.memory_len}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidParameterError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@dataclass(frozen=True)
class SegmentMemory:
    """Per-layer hidden states cached from the previous segment.

    ``states[l]`` is the input to layer ``l`` for the trailing positions of the
    previous segment, shaped [memory_len, d_model] (or [batch, memory_len,
    d_model] inside the batched path). The arrays carry no gradient history.
    """

    states: tuple[np.ndarray, ...]

    def check(self, config: EncoderConfig) -> None:
        if len(self.states) != config.n_layers:
            raise ContractError(f"memory has {len(self.states)} layers, encoder has {config.n_layers}")
        for s in self.states:
            if s.shape[-1] != config.d_model:
                raise ContractError(f"memory width {s.shape[-1]} != d_model {config.d_model}")

    @property
    def length(self) -> int:
        return self.states[0].shape[-2] if self.states else 0


def parameter_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    d, f, h, dh = config.d_model, config.d_ff, config.n_heads, config.head_dim
    shapes: dict[str, tuple[int, ...]] = {"encoder.embedding": (config.vocab_size, d)}
    for layer in range(config.n_layers):
        p = f"encoder.layers.{layer}."
        for proj in ("query", "key", "value", "position", "output"):
            shapes[p + f"attn.{proj}"] = (d, d)
        shapes[p + "attn.content_bias"] = (h, dh)
        shapes[p + "attn.position_bias"] = (h, dh)
        shapes[p + "attn_norm.gain"] = (d,)
        shapes[p + "attn_norm.bias"] = (d,)
        shapes[p + "ff.in.weight"] = (d, f)
        shapes[p + "ff.in.bias"] = (f,)
        shapes[p + "ff.out.weight"] = (f, d)
        shapes[p + "ff.out.bias"] = (d,)
        shapes[p + "ff_norm.gain"] = (d,)
        shapes[p + "ff_norm.bias"] = (d,)
    return shapes


def init_tensors(shapes: dict[str, tuple[int, ...]], rng: np.random.Generator, dtype=np.float64) -> dict[str, Tensor]:
    """Gains one, biases zero, every other weight drawn from N(0, 0.02**2), in ``shapes`` order."""
    params = {}
    for name, shape in shapes.items():
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif name.endswith("bias"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, INIT_STD, size=shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return params


def init_parameters(config: EncoderConfig, rng: np.random.Generator, dtype=np.float64) -> dict[str, Tensor]:
    return init_tensors(parameter_shapes(config), rng, dtype)


def sinusoid(offsets: np.ndarray, d_model: int) -> np.ndarray:
    """[len(offsets), d_model] sinusoidal embedding of (signed) offsets."""
    inv_freq = 1.0 / (10000.0 ** (np.arange(0, d_model, 2, dtype=np.float64) / d_model))
    angles = np.outer(np.asarray(offsets, dtype=np.float64), inv_freq)
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)[:, :d_model]


def attention_scores(
    q: Tensor,
    k: Tensor,
    position_weight: Tensor,
    content_bias: Tensor,
    position_bias: Tensor,
    q_pos: np.ndarray,
    k_pos: np.ndarray,
    key_mask: np.ndarray | None = None,
) -> Tensor:
    """Softmax-normalised relative attention weights.

    q: [..., H, Q, dh] and k: [..., H, K, dh]; ``position_weight`` is the
    [d_model, H*dh] projection of offset embeddings; ``q_pos`` / ``k_pos`` are
    absolute positions of queries and keys. ``key_mask`` (broadcastable to
    [..., K], True = attendable) excludes padding. Returns [..., H, Q, K].
    """
    n_heads, head_dim = q.shape[-3], q.shape[-1]
    offsets = np.subtract.outer(np.asarray(q_pos), np.asarray(k_pos))
    lo = int(offsets.min())
    rel = np.arange(lo, int(offsets.max()) + 1)
    r_emb = Tensor(sinusoid(rel, position_weight.shape[0]).astype(q.dtype))
    r = ad.transpose(ad.reshape(r_emb @ position_weight, (len(rel), n_heads, head_dim)), (1, 2, 0))

    cb = ad.reshape(content_bias, (n_heads, 1, head_dim))
    pb = ad.reshape(position_bias, (n_heads, 1, head_dim))
    content = (q + cb) @ ad.transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))
    position = ad.take_along_last((q + pb) @ r, offsets - lo)
    scores = (content + position) * (1.0 / math.sqrt(head_dim))
    if key_mask is not None:
        additive = np.where(np.asarray(key_mask, dtype=bool), 0.0, MASK_VALUE).astype(q.dtype)
        scores = scores + Tensor(additive[..., None, None, :])
    return ad.softmax(scores, axis=-1)


class TransformerEncoder:
    """Multi-layer relative-position encoder over a parameter dictionary.

    The parameter dict is shared with the owning model; this class only reads
    ``encoder.*`` entries from it.
    """

    def __init__(self, config: EncoderConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    def empty_memory(self, batch: int | None = None) -> SegmentMemory:
        lead = () if batch is None else (batch,)
        dtype = self.params["encoder.embedding"].dtype
        return SegmentMemory(tuple(np.zeros(lead + (0, self.config.d_model), dtype) for _ in range(self.config.n_layers)))

    def encode(self, tokens, memory: SegmentMemory | None = None, train: bool = False, rng=None):
        """Hidden states [seq_len, d_model] for one sequence, plus the next segment's memory."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 1:
            raise ContractError(f"encode expects a 1-d token sequence, got shape {tokens.shape}")
        batched_memory = None
        if memory is not None:
            memory.check(self.config)
            batched_memory = SegmentMemory(tuple(s[None] for s in memory.states))
        hidden, new_memory = self.encode_batch(tokens[None], None, batched_memory, train, rng)
        return ad.reshape(hidden, hidden.shape[1:]), SegmentMemory(tuple(s[0] for s in new_memory.states))

    def encode_batch(
        self,
        ids: np.ndarray,
        key_mask: np.ndarray | None = None,
        memory: SegmentMemory | None = None,
        train: bool = False,
        rng=None,
    ) -> tuple[Tensor, SegmentMemory]:
        """Encode a [batch, seq_len] id array; ``key_mask`` marks non-padding positions."""
        cfg = self.config
        ids = np.asarray(ids, dtype=np.int64)
        batch, seq_len = ids.shape
        if seq_len < 1:
            raise ContractError("cannot encode an empty sequence")
        if seq_len > cfg.max_seq_len:
            raise ContractError(f"seq_len={seq_len} exceeds max_seq_len={cfg.max_seq_len}")
        if memory is None:
            memory = self.empty_memory(batch)
        memory.check(cfg)
        mem_len = memory.length

        q_pos = np.arange(seq_len)
        k_pos = np.arange(-mem_len, seq_len)
        full_mask = None
        if key_mask is not None:
            full_mask = np.concatenate([np.ones((batch, mem_len), dtype=bool), np.asarray(key_mask, dtype=bool)], axis=1)
            # a row with nothing to attend to falls back to attending everywhere
            full_mask[~full_mask.any(axis=1)] = True

        h = ad.embedding_lookup(self.params["encoder.embedding"], ids)
        h = ad.dropout(h, cfg.dropout_p, train, rng)
        new_states = []
        for layer in range(cfg.n_layers):
            mem = memory.states[layer]
            if cfg.memory_len:
                new_states.append(np.concatenate([mem, h.data], axis=-2)[..., -cfg.memory_len:, :].copy())
            else:
                new_states.append(mem[..., :0, :])
            h = self._layer(layer, h, mem, q_pos, k_pos, full_mask, train, rng)
        return h, SegmentMemory(tuple(new_states))

    def _layer(self, layer, h, mem, q_pos, k_pos, key_mask, train, rng):
        cfg = self.config
        p = self.params
        pre = f"encoder.layers.{layer}."
        batch, seq_len, d = h.shape
        heads, dh = cfg.n_heads, cfg.head_dim
        context = ad.concat([Tensor(mem), h], axis=1) if mem.shape[-2] else h

        def split_heads(x):
            return ad.transpose(ad.reshape(x, (batch, x.shape[1], heads, dh)), (0, 2, 1, 3))

        q = split_heads(h @ p[pre + "attn.query"])
        k = split_heads(context @ p[pre + "attn.key"])
        v = split_heads(context @ p[pre + "attn.value"])
        probs = attention_scores(
            q, k, p[pre + "attn.position"], p[pre + "attn.content_bias"], p[pre + "attn.position_bias"],
            q_pos, k_pos, key_mask,
        )
        attended = ad.reshape(ad.transpose(probs @ v, (0, 2, 1, 3)), (batch, seq_len, d))
        attn_out = ad.dropout(attended @ p[pre + "attn.output"], cfg.dropout_p, train, rng)
        h = ad.layer_norm(h + attn_out, p[pre + "attn_norm.gain"], p[pre + "attn_norm.bias"], cfg.layer_norm_eps)

        ff = ad.gelu(h @ p[pre + "ff.in.weight"] + p[pre + "ff.in.bias"])
        ff = ad.dropout(ff @ p[pre + "ff.out.weight"] + p[pre + "ff.out.bias"], cfg.dropout_p, train, rng)
        return ad.layer_norm(h + ff, p[pre + "ff_norm.gain"], p[pre + "ff_norm.bias"], cfg.layer_norm_eps)
