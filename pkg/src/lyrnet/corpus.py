"""Valence-arousal labelled lyrics: label algebra, tokenisation, files and splits.

Quadrants follow the usual numbering of the valence-arousal plane::

    Q2 (negative, high) | Q1 (positive, high)
    --------------------+--------------------
    Q3 (negative, low)  | Q4 (positive, low)
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InvalidParameterError
from .rng import make_rng

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
MAX_TOKENS = 1024


class Quadrant(str, Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"

    @property
    def index(self) -> int:
        return int(self.value[1]) - 1


class Valence(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def index(self) -> int:
        return 0 if self is Valence.POSITIVE else 1


class Arousal(str, Enum):
    HIGH = "high"
    LOW = "low"

    @property
    def index(self) -> int:
        return 0 if self is Arousal.HIGH else 1


_HEMISPHERES = {
    Quadrant.Q1: (Valence.POSITIVE, Arousal.HIGH),
    Quadrant.Q2: (Valence.NEGATIVE, Arousal.HIGH),
    Quadrant.Q3: (Valence.NEGATIVE, Arousal.LOW),
    Quadrant.Q4: (Valence.POSITIVE, Arousal.LOW),
}
_QUADRANT_OF = {v: k for k, v in _HEMISPHERES.items()}

QUADRANTS = list(Quadrant)
VALENCES = list(Valence)
AROUSALS = list(Arousal)


def hemispheres_of(quadrant: Quadrant | str) -> tuple[Valence, Arousal]:
    return _HEMISPHERES[Quadrant(quadrant)]


def quadrant_of(valence: Valence | str, arousal: Arousal | str) -> Quadrant:
    return _QUADRANT_OF[(Valence(valence), Arousal(arousal))]


@dataclass(frozen=True)
class EmotionLabel:
    quadrant: Quadrant
    valence: Valence
    arousal: Arousal

    def __post_init__(self):
        object.__setattr__(self, "quadrant", Quadrant(self.quadrant))
        object.__setattr__(self, "valence", Valence(self.valence))
        object.__setattr__(self, "arousal", Arousal(self.arousal))
        if _HEMISPHERES[self.quadrant] != (self.valence, self.arousal):
            raise DataError(
                f"inconsistent label: {self.quadrant.value} implies {hemispheres_of(self.quadrant)[0].value}/"
                f"{hemispheres_of(self.quadrant)[1].value}, got {self.valence.value}/{self.arousal.value}"
            )

    @classmethod
    def from_quadrant(cls, quadrant: Quadrant | str) -> "EmotionLabel":
        return cls(Quadrant(quadrant), *hemispheres_of(quadrant))

    @classmethod
    def from_hemispheres(cls, valence, arousal) -> "EmotionLabel":
        return cls(quadrant_of(valence, arousal), Valence(valence), Arousal(arousal))

    def indices(self) -> dict[str, int]:
        return {"quadrant": self.quadrant.index, "valence": self.valence.index, "arousal": self.arousal.index}


# tokenisation

_WORD = re.compile(r"[^\W_]+")


def words(text: str) -> list[str]:
    """Lowercased word tokens; punctuation and underscores act as separators and are dropped."""
    return _WORD.findall(text.lower())


class Vocabulary:
    """Token <-> id mapping with ``<pad>`` = 0 and ``<unk>`` = 1 reserved."""

    def __init__(self, tokens: Iterable[str] = (), frozen: bool = False):
        self._tokens: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self._ids: dict[str, int] = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
        self.frozen = False
        for tok in tokens:
            if tok not in self._ids:
                self.add(tok)
        self.frozen = frozen

    def add(self, token: str) -> int:
        if token in self._ids:
            return self._ids[token]
        if self.frozen:
            raise DataError(f"vocabulary is frozen; cannot add {token!r}")
        self._ids[token] = len(self._tokens)
        self._tokens.append(token)
        return self._ids[token]

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    @property
    def tokens(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self._tokens[2:]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocabulary":
        vocab = cls()
        for text in texts:
            for w in words(text):
                vocab.add(w)
        return vocab.freeze()


def tokenize(lyrics: str, vocab: Vocabulary, max_len: int = MAX_TOKENS) -> list[int]:
    """Ids of the first ``max_len`` words of ``lyrics``; unknown words map to ``<unk>``."""
    return [vocab.id(w) for w in words(lyrics)[:max_len]]


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    return " ".join(vocab.token(i) for i in ids)


# documents and files

@dataclass
class LyricsDocument:
    id: str
    lyrics: str
    artist: str = ""
    title: str = ""
    label: EmotionLabel | None = None
    url: str | None = None
    tokens: list[int] | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {"id": self.id, "artist": self.artist, "title": self.title, "lyrics": self.lyrics}
        if self.label is not None:
            rec.update(quadrant=self.label.quadrant.value, valence=self.label.valence.value, arousal=self.label.arousal.value)
        if self.url:
            rec["url"] = self.url
        return rec


def label_from_record(rec: dict, where: str) -> EmotionLabel | None:
    """Label from optional quadrant/valence/arousal fields, deriving whatever is missing."""
    q, v, a = rec.get("quadrant"), rec.get("valence"), rec.get("arousal")
    if q is None and v is None and a is None:
        return None
    try:
        if q is not None:
            derived = EmotionLabel.from_quadrant(q)
            return EmotionLabel(derived.quadrant, v or derived.valence, a or derived.arousal)
        if v is None or a is None:
            raise DataError("a label needs a quadrant or both valence and arousal")
        return EmotionLabel.from_hemispheres(v, a)
    except (ValueError, KeyError) as exc:
        raise DataError(f"{where}: {exc}") from exc


def document_from_record(rec: dict, where: str) -> LyricsDocument:
    if not isinstance(rec, dict):
        raise DataError(f"{where}: expected a JSON object")
    for key in ("id", "lyrics"):
        if not isinstance(rec.get(key), str):
            raise DataError(f"{where}: missing or non-string field {key!r}")
    label = label_from_record(rec, f"{where} (id {rec['id']!r})")
    return LyricsDocument(
        id=rec["id"], lyrics=rec["lyrics"], artist=str(rec.get("artist", "")), title=str(rec.get("title", "")),
        label=label, url=rec.get("url"),
    )


def read_jsonl_documents(path: str | Path) -> list[LyricsDocument]:
    docs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            doc = document_from_record(rec, f"{path}:{lineno}")
            if doc.id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def encode_documents(docs: Sequence[LyricsDocument], vocab: Vocabulary, max_len: int = MAX_TOKENS) -> None:
    for doc in docs:
        doc.tokens = tokenize(doc.lyrics, vocab, max_len)


def load_corpus(path: str | Path, vocab: Vocabulary | None = None, max_len: int = MAX_TOKENS):
    """Read a corpus JSONL file and encode it.

    With ``vocab=None`` a vocabulary is built from the file's lyrics in order of
    first appearance and frozen; otherwise the given vocabulary is used as-is.
    Returns ``(documents, vocabulary)``.
    """
    docs = read_jsonl_documents(path)
    if vocab is None:
        vocab = Vocabulary.build(d.lyrics for d in docs)
    encode_documents(docs, vocab, max_len)
    return docs, vocab


def write_corpus(docs: Iterable[LyricsDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


def import_csv(path: str | Path) -> list[LyricsDocument]:
    """Convert a dataset CSV (columns id, lyrics and optionally artist, title, quadrant, valence, arousal, url)."""
    docs, seen = [], set()
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            rec = {k.strip().lower(): v for k, v in row.items() if k and v not in (None, "")}
            doc = document_from_record(rec, f"{path}:{lineno}")
            if doc.id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def import_crawl_records(path: str | Path) -> list[LyricsDocument]:
    """Turn fetched crawl records into documents, carrying labels stored with the query."""
    docs, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if rec.get("status") != "fetched":
                continue
            query = rec.get("query", {})
            merged = dict(query.get("extra") or {})
            merged.update(
                id=query.get("id") or f"{query.get('artist', '')} - {query.get('title', '')}",
                artist=query.get("artist", ""), title=query.get("title", ""),
                lyrics=rec.get("lyrics"), url=rec.get("resolved_url"),
            )
            doc = document_from_record(merged, f"{path}:{lineno}")
            if doc.id in seen:
                raise DataError(f"{path}:{lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


# splits

def split(docs: Sequence[LyricsDocument], ratios: Sequence[float], seed: int, names: Sequence[str] | None = None):
    """Quadrant-stratified seeded partition of ``docs`` into ``len(ratios)`` named parts.

    Each quadrant is shuffled and cut by largest-remainder rounding, so every
    part holds within one document of its exact share of every quadrant.
    """
    ratios = [float(r) for r in ratios]
    if not ratios or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidParameterError(f"ratios must be positive and sum to 1, got {ratios}")
    names = list(names) if names is not None else ["train", "test", "validation"][: len(ratios)]
    if len(names) != len(ratios):
        raise InvalidParameterError(f"{len(names)} split names for {len(ratios)} ratios")
    if any(d.label is None for d in docs):
        raise DataError("stratified split needs every document labelled")

    rng = make_rng(seed)
    parts: dict[str, list[LyricsDocument]] = {n: [] for n in names}
    for quadrant in QUADRANTS:
        group = [d for d in docs if d.label.quadrant is quadrant]
        if not group:
            continue
        counts = _largest_remainder(len(group), ratios)
        if min(counts) < 1:
            raise DataError(
                f"cannot stratify {len(group)} {quadrant.value} documents into ratios {ratios}: a split would be empty"
            )
        order = rng.permutation(len(group))
        start = 0
        for name, n in zip(names, counts):
            parts[name].extend(group[i] for i in order[start:start + n])
            start += n
    return parts


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    exact = [total * r for r in ratios]
    counts = [int(np.floor(x)) for x in exact]
    by_remainder = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in by_remainder[: total - sum(counts)]:
        counts[i] += 1
    return counts


# synthetic corpus

SYNTHETIC_STEMS = {
    Quadrant.Q1: "bright",
    Quadrant.Q2: "storm",
    Quadrant.Q3: "grey",
    Quadrant.Q4: "calm",
}


def generate_synthetic(
    n_per_quadrant: int,
    vocab_size: int = 200,
    seed: int = 0,
    length: tuple[int, int] = (16, 32),
    keyword_fraction: float = 0.3,
) -> list[LyricsDocument]:
    """Balanced corpus whose quadrants are separable by construction.

    The word pool of ``vocab_size`` pseudo-words is split into one keyword set
    per quadrant (an eighth of the pool each) and shared filler. A document of
    quadrant q mixes filler with keywords of q only.
    """
    if n_per_quadrant < 1:
        raise InvalidParameterError(f"n_per_quadrant must be >= 1, got {n_per_quadrant}")
    n_keywords = max(2, vocab_size // 8)
    n_filler = max(4, vocab_size - 4 * n_keywords)
    keywords = {q: [f"{stem}{i}" for i in range(n_keywords)] for q, stem in SYNTHETIC_STEMS.items()}
    filler = [f"la{i}" for i in range(n_filler)]

    rng = make_rng(seed)
    docs = []
    for k in range(n_per_quadrant):
        for quadrant in QUADRANTS:
            n_words = int(rng.integers(length[0], length[1] + 1))
            n_kw = max(1, int(round(keyword_fraction * n_words)))
            chosen = list(rng.choice(keywords[quadrant], n_kw)) + list(rng.choice(filler, n_words - n_kw))
            text = " ".join(str(chosen[i]) for i in rng.permutation(n_words))
            doc_id = f"syn-{quadrant.value.lower()}-{k:04d}"
            docs.append(LyricsDocument(
                id=doc_id, lyrics=text, artist="synthetic", title=doc_id,
                label=EmotionLabel.from_quadrant(quadrant),
            ))
    return docs
