"""Region-similarity evaluation: per-frame IoU, per-sequence means, tables.

Scores are fractions in [0, 1] internally; the human-readable comparison
table renders them as fixed one-decimal percentages (0.750 -> "75.0"). Win
counts use strict inequality in each direction, so ties count for neither
method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SequenceScore",
    "iou",
    "j_mean_sequence",
    "comparison_report",
    "comparison_csv",
    "scores_csv",
]


@dataclass(frozen=True)
class SequenceScore:
    sequence_name: str
    per_frame_iou: tuple[float, ...]
    j_mean: float


def _binary(mask: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"{what}: mask must be 2-d, got shape {m.shape}")
    if not np.isin(m, (0, 1)).all():
        raise ValueError(f"{what}: mask must be binary")
    return m != 0


def iou(pred: np.ndarray, truth: np.ndarray, empty_value: float = 1.0) -> float:
    """Intersection over union of the two foregrounds.

    Frames where both foregrounds are empty have no region to compare;
    they count as ``empty_value`` (default 1.0: nothing to find, nothing
    claimed).
    """
    p = _binary(pred, "pred")
    t = _binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"mask dimensions differ: {p.shape} vs {t.shape}")
    union = int((p | t).sum())
    if union == 0:
        return float(empty_value)
    return float(int((p & t).sum()) / union)


def j_mean_sequence(
    preds: list[np.ndarray],
    truths: list[np.ndarray],
    skip_first: bool = True,
    name: str = "",
) -> SequenceScore:
    """Mean IoU over a sequence's evaluated frames.

    Frame 0 carries the given annotation rather than a prediction, so it is
    skipped by default.
    """
    if len(preds) != len(truths):
        raise ValueError(f"got {len(preds)} predictions for {len(truths)} truth masks")
    start = 1 if skip_first else 0
    if len(preds) <= start:
        raise ValueError("no frames to evaluate")
    ious = tuple(iou(p, t) for p, t in zip(preds[start:], truths[start:]))
    return SequenceScore(name, ious, float(np.mean(ious)))


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _paired(
    scores_a: list[SequenceScore], scores_b: list[SequenceScore]
) -> list[tuple[SequenceScore, SequenceScore]]:
    by_name = {s.sequence_name: s for s in scores_b}
    names_a = [s.sequence_name for s in scores_a]
    if len(set(names_a)) != len(names_a):
        raise ValueError("duplicate sequence names")
    if set(names_a) != set(by_name):
        missing = sorted(set(names_a) ^ set(by_name))
        raise ValueError(f"sequence sets differ: {missing}")
    return [(s, by_name[s.sequence_name]) for s in scores_a]


def comparison_report(
    scores_a: list[SequenceScore],
    scores_b: list[SequenceScore],
    labels: tuple[str, str] = ("method_a", "method_b"),
) -> str:
    """Aligned per-sequence table with overall means and win counts."""
    pairs = _paired(scores_a, scores_b)
    la, lb = labels
    name_w = max(8, max(len(s.sequence_name) for s, _ in pairs))
    col_w = max(6, len(la), len(lb))
    lines = [f"{'sequence':<{name_w}}  {la:>{col_w}}  {lb:>{col_w}}"]
    wins_a = wins_b = 0
    for a, b in pairs:
        lines.append(
            f"{a.sequence_name:<{name_w}}  {_pct(a.j_mean):>{col_w}}  {_pct(b.j_mean):>{col_w}}"
        )
        if a.j_mean > b.j_mean:
            wins_a += 1
        elif b.j_mean > a.j_mean:
            wins_b += 1
    mean_a = float(np.mean([a.j_mean for a, _ in pairs]))
    mean_b = float(np.mean([b.j_mean for _, b in pairs]))
    lines.append(f"{'mean':<{name_w}}  {_pct(mean_a):>{col_w}}  {_pct(mean_b):>{col_w}}")
    lines.append(f"{'wins':<{name_w}}  {wins_a:>{col_w}}  {wins_b:>{col_w}}")
    return "\n".join(lines) + "\n"


def comparison_csv(scores_a: list[SequenceScore], scores_b: list[SequenceScore]) -> str:
    """Machine-readable form of the comparison, raw fractions."""
    rows = ["sequence,method_a,method_b"]
    for a, b in _paired(scores_a, scores_b):
        rows.append(f"{a.sequence_name},{a.j_mean:.6f},{b.j_mean:.6f}")
    return "\n".join(rows) + "\n"


def scores_csv(scores: list[SequenceScore]) -> str:
    rows = ["sequence,j_mean"]
    for s in scores:
        rows.append(f"{s.sequence_name},{s.j_mean:.6f}")
    return "\n".join(rows) + "\n"
