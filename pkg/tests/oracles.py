"""Independent reference implementations used as test oracles."""

from fractions import Fraction


def brute_force_f1(gold, pred, n_classes):
    """Macro- and micro-F1 recounted from raw label lists in exact rational arithmetic."""
    f1s = []
    for c in range(n_classes):
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else Fraction(0))
    correct = sum(1 for g, p in zip(gold, pred) if g == p)
    return float(sum(f1s) / n_classes), float(Fraction(correct, len(gold)))


# Russell quadrants written out by hand: valence sign, arousal level
RUSSELL = {"Q1": ("positive", "high"), "Q2": ("negative", "high"), "Q3": ("negative", "low"), "Q4": ("positive", "low")}


def inconsistent_records():
    """Every quadrant/hemisphere combination that contradicts the circumplex, plus malformed labels."""
    out = []
    for q in RUSSELL:
        for v in ("positive", "negative"):
            for a in ("high", "low"):
                if (v, a) != RUSSELL[q]:
                    out.append({"quadrant": q, "valence": v, "arousal": a})
        out.append({"quadrant": q, "valence": "neutral"})
    out += [{"quadrant": "Q5"}, {"valence": "positive"}, {"arousal": "low"}, {"valence": "up", "arousal": "high"}]
    return [dict(id=f"bad{i}", lyrics="some words", **r) for i, r in enumerate(out)]
