"""Ranking metrics under the closed-world evaluation protocol."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import average_precision_score, precision_recall_curve, roc_auc_score, roc_curve

from .logic import Atom


@dataclass
class RankedPredictions:
    entries: List[Tuple[Atom, float, int]]

    def __post_init__(self):
        for h, s, t in self.entries:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s} of {h} outside [0, 1]")
            if t not in (1, -1):
                raise ValueError(f"truth of {h} must be +1 or -1")

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s, _ in self.entries], dtype=float)

    @property
    def truth(self) -> np.ndarray:
        return np.array([t for _, _, t in self.entries], dtype=int)

    @property
    def n_pos(self) -> int:
        return sum(1 for _, _, t in self.entries if t > 0)

    @property
    def n_neg(self) -> int:
        return len(self.entries) - self.n_pos


def closed_world(predictions: Mapping[Atom, float], positives: Iterable[Atom],
                 negatives: Iterable[Atom] = (), missing_score: float = 0.0) -> RankedPredictions:
    """Score every predicted head plus every labeled example.

    Truth is +1 exactly for listed positives; heads absent from
    ``predictions`` receive ``missing_score``.
    """
    pos = set(positives)
    universe = dict.fromkeys(predictions)
    universe.update(dict.fromkeys(sorted(pos, key=str)))
    universe.update(dict.fromkeys(sorted(set(negatives) - pos, key=str)))
    return RankedPredictions([(h, float(predictions.get(h, missing_score)), 1 if h in pos else -1)
                              for h in universe])


def auc_roc(r: RankedPredictions) -> float:
    """Area under the ROC curve; tied scores count one half."""
    if r.n_pos == 0 or r.n_neg == 0:
        raise ValueError("AUC-ROC needs at least one positive and one negative")
    return float(roc_auc_score(r.truth > 0, r.scores))


def auc_pr(r: RankedPredictions) -> float:
    """Area under the step-interpolated precision-recall curve.

    Equal scores form one threshold; precision is taken at each recall level
    reached while sweeping thresholds downward.
    """
    if r.n_pos == 0:
        raise ValueError("AUC-PR needs at least one positive")
    if r.n_neg == 0:
        return 1.0
    return float(average_precision_score(r.truth > 0, r.scores))


@dataclass
class EvalReport:
    auc_pr: float
    auc_roc: float
    n_pos: int
    n_neg: int
    roc_points: List[Tuple[float, float]] = field(default_factory=list)
    pr_points: List[Tuple[float, float]] = field(default_factory=list)

    def to_text(self) -> str:
        return (
            "ILB evaluation (closed world; AUC-PR uses step interpolation)\n"
            f"positives: {self.n_pos}\n"
            f"negatives: {self.n_neg}\n"
            f"AUC-PR:  {self.auc_pr:.6f}\n"
            f"AUC-ROC: {self.auc_roc:.6f}\n"
        )

    def to_kv(self) -> str:
        return (f"auc_pr={self.auc_pr!r}\nauc_roc={self.auc_roc!r}\n"
                f"n_pos={self.n_pos}\nn_neg={self.n_neg}\n")


def evaluate(r: RankedPredictions) -> EvalReport:
    y, s = r.truth > 0, r.scores
    fpr, tpr, _ = roc_curve(y, s)
    precision, recall, _ = precision_recall_curve(y, s)
    return EvalReport(
        auc_pr=auc_pr(r),
        auc_roc=auc_roc(r),
        n_pos=r.n_pos,
        n_neg=r.n_neg,
        roc_points=[(float(a), float(b)) for a, b in zip(fpr, tpr)],
        pr_points=[(float(a), float(b)) for a, b in zip(recall, precision)],
    )


def macro_average(reports: Sequence[EvalReport]) -> Dict[str, float]:
    return {
        "auc_pr": float(np.mean([r.auc_pr for r in reports])),
        "auc_roc": float(np.mean([r.auc_roc for r in reports])),
        "auc_pr_std": float(np.std([r.auc_pr for r in reports])),
        "auc_roc_std": float(np.std([r.auc_roc for r in reports])),
    }
