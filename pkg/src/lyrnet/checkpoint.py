"""Deterministic checkpoint container.

Layout::

    LYRNET-CHECKPOINT\\n
    format_version: 1\\n
    manifest_sha256: <hex digest of the manifest bytes>\\n
    manifest_bytes: <length of the manifest>\\n
    \\n
    <manifest: UTF-8 JSON, sorted keys>
    <payload: little-endian parameter arrays, concatenated in manifest order>

The manifest holds the encoder/head/training configuration, the vocabulary,
the precision tag, the parameter name/shape table and a SHA-256 of the payload.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .corpus import Vocabulary
from .encoder import EncoderConfig
from .errors import (
    CheckpointError,
    CheckpointIntegrityError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from .heads import HeadConfig
from .model import PRECISIONS, EmotionClassifier

MAGIC = "LYRNET-CHECKPOINT"
FORMAT_VERSION = 1
_LITTLE_ENDIAN = {"float64": "<f8", "float32": "<f4"}


@dataclass
class ModelCheckpoint:
    encoder_config: EncoderConfig
    head_config: HeadConfig
    params: dict[str, np.ndarray]
    precision: str = "float64"
    vocabulary: list[str] | None = None
    training_config: dict | None = None
    format_version: int = field(default=FORMAT_VERSION)

    @classmethod
    def from_model(cls, model: EmotionClassifier, vocab: Vocabulary | None = None, training_config=None) -> "ModelCheckpoint":
        return cls(
            model.encoder_config, model.head_config,
            {n: p.data.copy() for n, p in model.params.items()},
            model.precision,
            vocab.tokens if vocab is not None else None,
            training_config.to_dict() if hasattr(training_config, "to_dict") else training_config,
        )

    def to_model(self) -> EmotionClassifier:
        params = {n: Tensor(a.copy(), requires_grad=True) for n, a in self.params.items()}
        return EmotionClassifier(self.encoder_config, self.head_config, params, self.precision)

    def vocab(self) -> Vocabulary | None:
        return None if self.vocabulary is None else Vocabulary(self.vocabulary, frozen=True)


def _manifest(ckpt: ModelCheckpoint, payload: bytes) -> bytes:
    body = {
        "encoder_config": ckpt.encoder_config.to_dict(),
        "head_config": ckpt.head_config.to_dict(),
        "training_config": ckpt.training_config,
        "precision": ckpt.precision,
        "vocabulary": ckpt.vocabulary,
        "parameters": [[name, list(arr.shape)] for name, arr in ckpt.params.items()],
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    return json.dumps(body, sort_keys=True, indent=1, ensure_ascii=False).encode("utf-8")


def to_bytes(ckpt: ModelCheckpoint) -> bytes:
    if ckpt.precision not in _LITTLE_ENDIAN:
        raise CheckpointError(f"unsupported precision {ckpt.precision!r}")
    dt = _LITTLE_ENDIAN[ckpt.precision]
    payload = b"".join(np.ascontiguousarray(a, dtype=dt).tobytes() for a in ckpt.params.values())
    manifest = _manifest(ckpt, payload)
    header = (
        f"{MAGIC}\nformat_version: {FORMAT_VERSION}\n"
        f"manifest_sha256: {hashlib.sha256(manifest).hexdigest()}\n"
        f"manifest_bytes: {len(manifest)}\n\n"
    ).encode("ascii")
    return header + manifest + payload


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def _header_field(line: bytes, key: str) -> str:
    prefix = f"{key}: ".encode("ascii")
    if not line.startswith(prefix):
        raise CheckpointIntegrityError(f"malformed checkpoint header: expected {key!r}")
    try:
        return line[len(prefix):].decode("ascii")
    except UnicodeDecodeError as exc:
        raise CheckpointIntegrityError(f"malformed checkpoint header field {key!r}") from exc


def from_bytes(blob: bytes) -> ModelCheckpoint:
    lines = blob.split(b"\n", 5)
    if len(lines) < 6:
        raise CheckpointTruncatedError("checkpoint header is incomplete")
    if lines[0] != MAGIC.encode("ascii"):
        raise CheckpointIntegrityError("not a lyrnet checkpoint (bad magic line)")
    version = _header_field(lines[1], "format_version")
    if version != str(FORMAT_VERSION):
        raise CheckpointVersionError(f"checkpoint format version {version!r} is not supported (expected {FORMAT_VERSION})")
    digest = _header_field(lines[2], "manifest_sha256")
    size_text = _header_field(lines[3], "manifest_bytes")
    if not size_text.isdigit() or lines[4] != b"":
        raise CheckpointIntegrityError("malformed checkpoint header")
    size = int(size_text)
    rest = lines[5]
    if len(rest) < size:
        raise CheckpointTruncatedError(f"manifest needs {size} bytes, file has {len(rest)}")
    manifest_bytes, payload = rest[:size], rest[size:]
    if hashlib.sha256(manifest_bytes).hexdigest() != digest:
        raise CheckpointIntegrityError("manifest checksum mismatch")
    try:
        manifest = json.loads(manifest_bytes.decode("utf-8"))
        precision = manifest["precision"]
        dt = np.dtype(_LITTLE_ENDIAN[precision])
        table = [(name, tuple(shape)) for name, shape in manifest["parameters"]]
        encoder_config = EncoderConfig.from_dict(manifest["encoder_config"])
        head_config = HeadConfig.from_dict(manifest["head_config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointIntegrityError(f"invalid manifest: {exc}") from exc

    expected = sum(int(np.prod(s)) for _, s in table) * dt.itemsize
    if len(payload) < expected or len(payload) < manifest["payload_bytes"]:
        raise CheckpointTruncatedError(f"payload needs {expected} bytes, file has {len(payload)}")
    if len(payload) != expected or hashlib.sha256(payload).hexdigest() != manifest["payload_sha256"]:
        raise CheckpointIntegrityError("payload checksum mismatch")

    wanted = EmotionClassifier.parameter_shapes(encoder_config, head_config)
    stored = dict(table)
    if list(stored) != list(wanted) or any(stored[n] != wanted[n] for n in wanted):
        bad = next((n for n in wanted if stored.get(n) != wanted[n]), None) or next(n for n in stored if n not in wanted)
        raise CheckpointShapeError(f"parameter {bad!r}: stored {stored.get(bad)} vs configured {wanted.get(bad)}")

    params, offset = {}, 0
    native = PRECISIONS[precision]
    for name, shape in table:
        n = int(np.prod(shape)) * dt.itemsize
        params[name] = np.frombuffer(payload, dtype=dt, count=n // dt.itemsize, offset=offset).reshape(shape).astype(native)
        offset += n
    return ModelCheckpoint(encoder_config, head_config, params, precision, manifest.get("vocabulary"),
                           manifest.get("training_config"), FORMAT_VERSION)


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return from_bytes(blob)
