"""Per-class, macro and micro F1 on a hand-checkable example.

Macro-F1 averages over every configured class, so a class that never occurs
and is never predicted contributes zero. Micro-F1 of a single-label task is
plain accuracy.
"""

from lyrnet.evaluation import ConfusionMatrix, macro_f1, micro_f1, per_class_scores

gold = [0, 0, 1, 1]
pred = [0, 1, 1, 1]
two = ConfusionMatrix.from_labels(gold, pred, 2)
print("confusion (gold x predicted):", two.counts.tolist())
print("per-class F1:", per_class_scores(two)[2].round(4).tolist())
print(f"macro-F1 {macro_f1(two):.4f}, micro-F1 {micro_f1(two):.2f}")

four = ConfusionMatrix.from_labels(gold, pred, 4)
print(f"same labels scored over four quadrants: macro-F1 {macro_f1(four):.4f}")
