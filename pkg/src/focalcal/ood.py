"""Out-of-distribution scoring: softmax-entropy confidence scores, ROC
curves, and AUROC between an in-distribution and an OoD set.

Convention: OoD is the positive class and the score is the predictive
entropy, so higher scores flag OoD and a useful detector lands above 0.5
AUROC. Ties earn half credit (trapezoidal integration), making AUROC
identical to the Mann-Whitney pair statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import EvalSet, entropy_rows


@dataclass(frozen=True)
class ScoredPopulations:
    """Scores for an in-distribution and an OoD population
    (higher = more OoD)."""

    in_scores: np.ndarray
    out_scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "in_scores",
                           np.asarray(self.in_scores, dtype=float))
        object.__setattr__(self, "out_scores",
                           np.asarray(self.out_scores, dtype=float))
        if self.in_scores.size == 0 or self.out_scores.size == 0:
            raise ValueError("empty population")
        if not (np.all(np.isfinite(self.in_scores))
                and np.all(np.isfinite(self.out_scores))):
            raise ValueError("scores must be finite")


def entropy_scores(eval_set: EvalSet) -> np.ndarray:
    """Per-row predictive entropy in nats; range [0, log K]."""
    return entropy_rows(eval_set)


def _threshold_walk(pops: ScoredPopulations):
    """Cumulative (fp, tp) counts after each distinct threshold, descending."""
    n_out = pops.out_scores.size
    n_in = pops.in_scores.size
    scores = np.concatenate([pops.out_scores, pops.in_scores])
    is_out = np.concatenate([np.ones(n_out, bool), np.zeros(n_in, bool)])
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    is_out = is_out[order]
    counts = []  # (fp, tp) after including each tie group
    tp = fp = 0
    i = 0
    total = scores.size
    while i < total:
        j = i
        while j < total and scores[j] == scores[i]:
            if is_out[j]:
                tp += 1
            else:
                fp += 1
            j += 1
        counts.append((fp, tp))
        i = j
    return counts, n_in, n_out


def roc_curve(pops: ScoredPopulations) -> np.ndarray:
    """ROC points (FPR, TPR), one per distinct score threshold.

    Starts at (0, 0), ends at (1, 1), and is nondecreasing in both
    coordinates; tie groups appear as diagonal segments.
    """
    counts, n_in, n_out = _threshold_walk(pops)
    points = [(0.0, 0.0)]
    points.extend((fp / n_in, tp / n_out) for fp, tp in counts)
    return np.array(points)


def auroc(pops: ScoredPopulations) -> float:
    """Trapezoidal area under the ROC curve.

    Accumulated in integer arithmetic, so the result equals the
    Mann-Whitney statistic (ties counting one half) exactly.
    """
    counts, n_in, n_out = _threshold_walk(pops)
    twice_area = 0
    prev_fp = prev_tp = 0
    for fp, tp in counts:
        twice_area += (fp - prev_fp) * (tp + prev_tp)
        prev_fp, prev_tp = fp, tp
    return twice_area / (2 * n_in * n_out)


def roc_csv(pops: ScoredPopulations) -> str:
    """ROC curve as CSV text with an fpr,tpr header."""
    lines = ["fpr,tpr"]
    lines.extend(f"{fpr!r},{tpr!r}" for fpr, tpr in roc_curve(pops))
    return "\n".join(lines) + "\n"
