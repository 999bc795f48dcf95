"""Train/evaluate runs over corpus splits, and the multi-task vs single-task ablation."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .corpus import LyricsDocument, Vocabulary, encode_documents, split
from .encoder import EncoderConfig
from .evaluation import EvaluationReport, evaluate_model, multi_split_average
from .heads import TASKS, HeadConfig
from .model import EmotionClassifier
from .training import TrainingConfig, train

# each single-task arm trains only its own head
SINGLE_TASK_LAMBDAS = {
    "quadrant": (1.0, 0.0, 0.0),
    "valence": (0.0, 1.0, 0.0),
    "arousal": (0.0, 0.0, 1.0),
}
MULTI_TASK_LAMBDAS = (1.0, 1.0, 1.0)


def fit(train_docs: Sequence[LyricsDocument], encoder: dict, heads: HeadConfig, config: TrainingConfig,
        precision: str = "float64"):
    """Build a vocabulary from ``train_docs``, initialise from ``config.seed`` and train.

    ``encoder`` holds EncoderConfig fields other than ``vocab_size``. Returns
    ``(model, vocabulary, checkpoint, history)``; the documents are encoded in place.
    """
    vocab = Vocabulary.build(d.lyrics for d in train_docs)
    enc = EncoderConfig(vocab_size=len(vocab), **encoder)
    encode_documents(train_docs, vocab, enc.max_seq_len)
    model = EmotionClassifier.initialize(enc, heads, seed=config.seed, precision=precision)
    checkpoint, history = train(model, train_docs, config, vocab)
    return model, vocab, checkpoint, history


def fit_and_evaluate(train_docs, test_docs, encoder: dict, heads: HeadConfig, config: TrainingConfig,
                     precision: str = "float64") -> EvaluationReport:
    train_docs = [replace(d) for d in train_docs]
    test_docs = [replace(d) for d in test_docs]
    model, vocab, _, _ = fit(train_docs, encoder, heads, config, precision)
    encode_documents(test_docs, vocab, model.encoder_config.max_seq_len)
    return evaluate_model(model, test_docs)


def split_seeds(seed: int, n_splits: int) -> list[int]:
    return [seed + k for k in range(n_splits)]


def multi_split_run(docs, ratios, seeds: Sequence[int], encoder: dict, heads: HeadConfig,
                    config: TrainingConfig, precision: str = "float64") -> tuple[list[EvaluationReport], dict]:
    """Train/test on one stratified split per seed; returns reports and their mean/std."""
    reports = []
    for s in seeds:
        parts = split(docs, ratios, s, names=["train", "test"])
        reports.append(fit_and_evaluate(parts["train"], parts["test"], encoder, heads, replace(config, seed=s), precision))
    return reports, multi_split_average(reports)


def ablation(docs, ratios, seeds: Sequence[int], encoder: dict, heads: HeadConfig, config: TrainingConfig,
             precision: str = "float64") -> dict:
    """Test-split accuracy and macro-F1 per task for the joint model and for each single-task model."""
    _, multi = multi_split_run(docs, ratios, seeds, encoder, heads, replace(config, lambdas=MULTI_TASK_LAMBDAS), precision)
    rows = {}
    for task in TASKS:
        cfg = replace(config, lambdas=SINGLE_TASK_LAMBDAS[task])
        _, single = multi_split_run(docs, ratios, seeds, encoder, heads, cfg, precision)
        rows[task] = {
            "accuracy": {"multi": multi["tasks"][task]["accuracy"]["mean"], "single": single["tasks"][task]["accuracy"]["mean"]},
            "macro_f1": {"multi": multi["tasks"][task]["macro_f1"]["mean"], "single": single["tasks"][task]["macro_f1"]["mean"]},
        }
    return {"n_splits": len(seeds), "seeds": list(seeds), "rows": rows}


def format_ablation_table(result: dict) -> str:
    """Markdown table: one row per task, accuracy and macro-F1 for each arm, in percent."""
    lines = [
        "| Classification | Accuracy (Multi-Task) | Accuracy (Single-Task) | macro-F1 (Multi-Task) | macro-F1 (Single-Task) |",
        "|---|---|---|---|---|",
    ]
    for task in TASKS:
        r = result["rows"][task]
        cells = [r["accuracy"]["multi"], r["accuracy"]["single"], r["macro_f1"]["multi"], r["macro_f1"]["single"]]
        lines.append(f"| {task.capitalize()} | " + " | ".join(f"{100 * c:.2f}%" for c in cells) + " |")
    return "\n".join(lines)
