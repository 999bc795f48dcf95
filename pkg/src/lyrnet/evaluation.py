"""Per-class and averaged classification metrics for the three emotion tasks.

Per class x, ``F1_x = 2 P_x R_x / (P_x + R_x)`` and macro-F1 is the plain mean
of ``F1_x`` over *every configured class* of the task (4 quadrants, 2
hemispheres), whether or not the class occurs in the evaluated split. A
precision or recall whose denominator is zero is taken as 0, and so is
``F1_x`` when ``P_x + R_x = 0``. Micro-F1 of a single-label task is the
trace of the confusion matrix over its total, i.e. accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import AROUSALS, QUADRANTS, VALENCES, LyricsDocument, Vocabulary, quadrant_of, tokenize
from .errors import ContractError, DataError

TASKS = ("quadrant", "valence", "arousal")
CLASS_NAMES = {
    "quadrant": [q.value for q in QUADRANTS],
    "valence": [v.value for v in VALENCES],
    "arousal": [a.value for a in AROUSALS],
}


@dataclass
class ConfusionMatrix:
    """counts[gold][predicted]."""

    counts: np.ndarray

    @classmethod
    def from_labels(cls, gold: Sequence[int], pred: Sequence[int], n_classes: int) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(gold, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _require_examples(matrix: ConfusionMatrix) -> None:
    if matrix.total == 0:
        raise ContractError("metrics are undefined on an empty confusion matrix")


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def per_class_scores(matrix: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(precision, recall, f1) arrays over all configured classes."""
    tp = np.diag(matrix.counts)
    precision = _safe_ratio(tp, matrix.counts.sum(axis=0))
    recall = _safe_ratio(tp, matrix.counts.sum(axis=1))
    f1 = _safe_ratio(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def macro_f1(matrix: ConfusionMatrix) -> float:
    _require_examples(matrix)
    return float(np.mean(per_class_scores(matrix)[2]))


def micro_f1(matrix: ConfusionMatrix) -> float:
    _require_examples(matrix)
    return float(np.trace(matrix.counts) / matrix.total)


def accuracy(matrix: ConfusionMatrix) -> float:
    return micro_f1(matrix)


@dataclass
class TaskMetrics:
    classes: list[str]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_f1: float
    confusion: list[list[int]]

    @classmethod
    def from_matrix(cls, matrix: ConfusionMatrix, classes: Sequence[str]) -> "TaskMetrics":
        p, r, f = per_class_scores(matrix)
        return cls(
            classes=list(classes), precision=p.tolist(), recall=r.tolist(), f1=f.tolist(),
            support=matrix.counts.sum(axis=1).tolist(), accuracy=accuracy(matrix),
            macro_precision=float(np.mean(p)), macro_recall=float(np.mean(r)),
            macro_f1=macro_f1(matrix), micro_f1=micro_f1(matrix), confusion=matrix.counts.tolist(),
        )

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "micro_precision": self.micro_f1,
            "micro_recall": self.micro_f1,
            "micro_f1": self.micro_f1,
            "per_class": [
                {"class": c, "precision": p, "recall": r, "f1": f, "support": s}
                for c, p, r, f, s in zip(self.classes, self.precision, self.recall, self.f1, self.support)
            ],
            "confusion": self.confusion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskMetrics":
        per = d["per_class"]
        return cls(
            classes=[x["class"] for x in per], precision=[x["precision"] for x in per],
            recall=[x["recall"] for x in per], f1=[x["f1"] for x in per], support=[x["support"] for x in per],
            accuracy=d["accuracy"], macro_precision=d["macro_precision"], macro_recall=d["macro_recall"],
            macro_f1=d["macro_f1"], micro_f1=d["micro_f1"], confusion=d["confusion"],
        )


@dataclass
class EvaluationReport:
    tasks: dict[str, TaskMetrics]
    n_examples: int
    agreement_rate: float

    def to_dict(self) -> dict:
        return {
            "n_examples": self.n_examples,
            "agreement_rate": self.agreement_rate,
            "tasks": {t: self.tasks[t].to_dict() for t in TASKS},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls({t: TaskMetrics.from_dict(d["tasks"][t]) for t in TASKS}, d["n_examples"], d["agreement_rate"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))

    def summary(self) -> dict:
        """Table-style row per task; precision and recall are macro-averaged."""
        return {
            t: {
                "accuracy": self.tasks[t].accuracy,
                "precision": self.tasks[t].macro_precision,
                "recall": self.tasks[t].macro_recall,
                "macro_f1": self.tasks[t].macro_f1,
            }
            for t in TASKS
        }


@dataclass
class PredictionRecord:
    id: str
    gold: dict[str, str] | None
    predicted: dict[str, str]
    logits: dict[str, list[float]]

    @property
    def agrees(self) -> bool:
        return self.predicted["quadrant"] == quadrant_of(self.predicted["valence"], self.predicted["arousal"]).value

    def to_json(self) -> str:
        return json.dumps({"id": self.id, "gold": self.gold, "predicted": self.predicted, "logits": self.logits})


def predict_documents(model, docs: Sequence[LyricsDocument], batch_size: int = 32) -> list[PredictionRecord]:
    preds, logits = model.predict([d.tokens for d in docs], batch_size)
    out = []
    for i, doc in enumerate(docs):
        gold = None
        if doc.label is not None:
            gold = {"quadrant": doc.label.quadrant.value, "valence": doc.label.valence.value, "arousal": doc.label.arousal.value}
        out.append(PredictionRecord(
            doc.id, gold,
            {t: CLASS_NAMES[t][int(preds[t][i])] for t in TASKS},
            {t: logits[t][i].tolist() for t in TASKS},
        ))
    return out


def report_from_predictions(records: Sequence[PredictionRecord]) -> EvaluationReport:
    if not records:
        raise ContractError("cannot evaluate an empty split")
    tasks = {}
    for t in TASKS:
        names = CLASS_NAMES[t]
        gold = [names.index(r.gold[t]) for r in records]
        pred = [names.index(r.predicted[t]) for r in records]
        tasks[t] = TaskMetrics.from_matrix(ConfusionMatrix.from_labels(gold, pred, len(names)), names)
    agreement = sum(r.agrees for r in records) / len(records)
    return EvaluationReport(tasks, len(records), agreement)


def evaluate_model(model, docs: Sequence[LyricsDocument]) -> EvaluationReport:
    if any(d.label is None for d in docs):
        raise DataError("evaluation needs labelled documents")
    return report_from_predictions(predict_documents(model, docs))


def evaluate(checkpoint, docs: Sequence[LyricsDocument], vocab: Vocabulary | None = None,
             return_predictions: bool = False):
    """Eval-mode report for ``docs`` under a saved model.

    Documents are re-encoded with the checkpoint's vocabulary (unknown words map
    to ``<unk>``). Passing the vocabulary the documents were encoded with lets
    this function reject a mismatch instead of silently remapping.
    """
    ckpt_vocab = checkpoint.vocab()
    if ckpt_vocab is None:
        raise DataError("checkpoint carries no vocabulary; cannot encode documents")
    if vocab is not None and vocab != ckpt_vocab:
        raise DataError(
            "corpus vocabulary differs from the checkpoint vocabulary; re-encode the split with the checkpoint "
            "vocabulary (unknown-token policy: out-of-vocabulary words map to <unk>=1)"
        )
    limit = checkpoint.encoder_config.max_seq_len
    docs = [replace(d, tokens=tokenize(d.lyrics, ckpt_vocab, limit)) for d in docs]
    records = predict_documents(checkpoint.to_model(), docs)
    if any(r.gold is None for r in records):
        raise DataError("evaluation needs labelled documents")
    report = report_from_predictions(records)
    return (report, records) if return_predictions else report


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


AVERAGED_METRICS = ("accuracy", "macro_precision", "macro_recall", "macro_f1", "micro_f1")


def _mean_std(values: Sequence[float]) -> dict[str, float]:
    # fsum is exactly rounded, so the result does not depend on report order
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)
    return {"mean": mean, "std": std}


def multi_split_average(reports: Sequence[EvaluationReport]) -> dict:
    """Mean and population standard deviation of every metric across splits."""
    if not reports:
        raise ContractError("need at least one report to average")
    structure = {t: reports[0].tasks[t].classes for t in reports[0].tasks}
    for r in reports[1:]:
        if {t: r.tasks[t].classes for t in r.tasks} != structure:
            raise ContractError("reports have mismatched task structures")
    out = {
        "n_splits": len(reports),
        "agreement_rate": _mean_std([r.agreement_rate for r in reports]),
        "tasks": {},
    }
    for t in structure:
        out["tasks"][t] = {m: _mean_std([getattr(r.tasks[t], m) for r in reports]) for m in AVERAGED_METRICS}
    return out
