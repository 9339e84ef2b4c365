"""Separability metrics.

AUROC uses the wins + half-ties pair statistic with degraded as the
positive class (computed via sorted search, contract-equal to brute
force pair counting). Operating-point rates use conservative
step-function thresholds over observed scores, no interpolation:

  FPR@95TPR: largest threshold t with mean(ood >= t) >= 0.95,
             report mean(id >= t).
  FNR@95TNR: smallest threshold t with mean(id <= t) >= 0.95,
             report mean(ood <= t).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class ScoreSet:
    """Scores for one pristine-vs-degraded comparison."""

    id_scores: np.ndarray
    ood_scores: np.ndarray
    monitor_id: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.id_scores = np.asarray(self.id_scores, dtype=np.float64).ravel()
        self.ood_scores = np.asarray(self.ood_scores, dtype=np.float64).ravel()
        if self.id_scores.size == 0 or self.ood_scores.size == 0:
            raise ValidationError("both score classes must be non-empty")
        if not (np.isfinite(self.id_scores).all() and np.isfinite(self.ood_scores).all()):
            raise ValidationError("scores must be finite")


def auroc(s: ScoreSet) -> float:
    """P(degraded score > pristine score) + half credit for ties."""
    sorted_id = np.sort(s.id_scores)
    below = np.searchsorted(sorted_id, s.ood_scores, side="left")
    below_or_equal = np.searchsorted(sorted_id, s.ood_scores, side="right")
    wins = below + 0.5 * (below_or_equal - below)
    return float(wins.sum() / (s.id_scores.size * s.ood_scores.size))


def fpr_at_95tpr(s: ScoreSet, target: float = 0.95) -> float:
    thresholds = np.unique(s.ood_scores)
    n = s.ood_scores.size
    sorted_ood = np.sort(s.ood_scores)
    tpr = (n - np.searchsorted(sorted_ood, thresholds, side="left")) / n
    t = thresholds[tpr >= target].max()
    return float(np.mean(s.id_scores >= t))


def fnr_at_95tnr(s: ScoreSet, target: float = 0.95) -> float:
    thresholds = np.unique(s.id_scores)
    n = s.id_scores.size
    sorted_id = np.sort(s.id_scores)
    tnr = np.searchsorted(sorted_id, thresholds, side="right") / n
    t = thresholds[tnr >= target].min()
    return float(np.mean(s.ood_scores <= t))


def rate_at_operating_point(s: ScoreSet, target: str) -> float:
    """target: "fpr@95tpr" or "fnr@95tnr"."""
    if target == "fpr@95tpr":
        return fpr_at_95tpr(s)
    if target == "fnr@95tnr":
        return fnr_at_95tnr(s)
    raise ValidationError(f"unknown operating point '{target}'")


def z_score_normalize(scores, reference_mean: float, reference_std: float) -> np.ndarray:
    if reference_std <= 0:
        raise ValidationError(f"reference std must be positive, got {reference_std}")
    return (np.asarray(scores, dtype=np.float64) - reference_mean) / reference_std
