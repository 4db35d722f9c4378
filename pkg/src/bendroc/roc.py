"""Empirical ROC curves, baselines, convex hulls and AUC.

A sample is classified positive when its score is at or above the threshold
of its bin (ties go to the positive class).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .binning import BinPartition
from .dataio import ScoredDataset
from .model import BinModel
from .oer import ThresholdCurve


@dataclass(frozen=True)
class OperatingPoint:
    fpr: float
    tpr: float
    lam: float | None = None
    offset: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.fpr <= 1.0 and 0.0 <= self.tpr <= 1.0):
            raise ValueError(f"operating point ({self.fpr}, {self.tpr}) outside the unit square")


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Operating points sorted by (fpr, tpr).

    ``param`` carries the lambda or offset of each point (nan for anchors
    added without one); ``param_name`` says which.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    param: np.ndarray | None = None
    param_name: str = "threshold"

    def __post_init__(self):
        fpr = np.asarray(self.fpr, dtype=float).reshape(-1)
        tpr = np.asarray(self.tpr, dtype=float).reshape(-1)
        param = np.full(fpr.shape, np.nan) if self.param is None else np.asarray(self.param, dtype=float).reshape(-1)
        if not (fpr.shape == tpr.shape == param.shape):
            raise ValueError("fpr, tpr and param must have the same length")
        if np.any((fpr < 0) | (fpr > 1) | (tpr < 0) | (tpr > 1)):
            raise ValueError("operating points must lie in the unit square")
        order = np.lexsort((tpr, fpr))
        for name, a in (("fpr", fpr), ("tpr", tpr), ("param", param)):
            a = a[order]
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.fpr.size

    @property
    def points(self) -> list[OperatingPoint]:
        key = "lam" if self.param_name == "lambda" else "offset"
        return [
            OperatingPoint(float(f), float(t), **({key: float(p)} if np.isfinite(p) else {}))
            for f, t, p in zip(self.fpr, self.tpr, self.param)
        ]

    @property
    def anchored(self) -> bool:
        pts = set(zip(self.fpr.tolist(), self.tpr.tolist()))
        return (0.0, 0.0) in pts and (1.0, 1.0) in pts

    def with_anchors(self) -> "RocCurve":
        fpr, tpr, param = list(self.fpr), list(self.tpr), list(self.param)
        pts = set(zip(fpr, tpr))
        for anchor, p in (((0.0, 0.0), np.inf), ((1.0, 1.0), -np.inf)):
            if anchor not in pts:
                fpr.append(anchor[0])
                tpr.append(anchor[1])
                param.append(p)
        return RocCurve(fpr, tpr, param, self.param_name)

    def point_set(self) -> set[tuple[float, float]]:
        return set(zip(self.fpr.tolist(), self.tpr.tolist()))


def _rates(predicted: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (fpr, tpr) for a boolean prediction matrix ``(curves, n)``."""
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    tp = predicted[:, pos].sum(axis=1)
    fp = predicted[:, ~pos].sum(axis=1)
    return fp / n_neg, tp / n_pos


def empirical_point(data: ScoredDataset, partition: BinPartition, curve: ThresholdCurve) -> OperatingPoint:
    if not data.has_both_classes():
        raise ValueError("evaluation data must contain both classes")
    if len(curve) != partition.n_bins:
        raise ValueError("threshold vector length does not match the partition")
    k = curve.thresholds[partition.assign(data.aux)]
    fpr, tpr = _rates((data.scores >= k)[None, :], data.labels)
    return OperatingPoint(float(fpr[0]), float(tpr[0]), lam=curve.lam)


def oer_curve(data: ScoredDataset, partition: BinPartition, curves: Sequence[ThresholdCurve]) -> RocCurve:
    """Raw empirical points of a lambda sweep, one per curve, plus anchors."""
    if not data.has_both_classes():
        raise ValueError("evaluation data must contain both classes")
    bins = partition.assign(data.aux)
    k = np.stack([c.thresholds for c in curves])[:, bins]
    fpr, tpr = _rates(data.scores[None, :] >= k, data.labels)
    return RocCurve(fpr, tpr, [c.lam for c in curves], "lambda").with_anchors()


def _threshold_sweep(scores: np.ndarray, labels: np.ndarray):
    """Rates at every distinct score used as a threshold, highest first."""
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == -1)
    # last index of each group of tied scores
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    return fp[last], tp[last], s[last]


def fixed_threshold_curve(data: ScoredDataset, scores: np.ndarray | None = None) -> RocCurve:
    """ROC of a single global threshold, one point per distinct score.

    ``scores`` overrides ``data.scores`` (used for the offset baselines).
    """
    if not data.has_both_classes():
        raise ValueError("data must contain both classes")
    scores = data.scores if scores is None else np.asarray(scores, dtype=float)
    fp, tp, thr = _threshold_sweep(scores, data.labels)
    curve = RocCurve(fp / data.n_neg, tp / data.n_pos, thr, "threshold")
    return curve.with_anchors()


def offset_baseline_curve(
    data: ScoredDataset, model: BinModel, mode: Literal["constant_fpr", "constant_tpr"]
) -> RocCurve:
    """Thresholds ``mu_i + c`` tracking one class mean, swept over ``c``.

    Classifying ``score >= mu_bin + c`` is a global threshold on
    ``score - mu_bin``, so every offset at which the operating point
    changes is visited.
    """
    if mode == "constant_fpr":
        mu = model.mu_neg
    elif mode == "constant_tpr":
        mu = model.mu_pos
    else:
        raise ValueError(f"unknown baseline mode {mode!r}")
    shifted = data.scores - mu[model.partition.assign(data.aux)]
    curve = fixed_threshold_curve(data, shifted)
    return RocCurve(curve.fpr, curve.tpr, curve.param, "offset")


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def rocch(curves: Iterable[RocCurve]) -> RocCurve:
    """Upper convex hull of all points of ``curves`` together with the anchors."""
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    pts = {(0.0, 0.0), (1.0, 1.0)}
    for c in curves:
        pts |= c.point_set()
    hull: list[tuple[float, float]] = []
    for p in sorted(pts):
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    fpr, tpr = np.array(hull).T
    return RocCurve(fpr, tpr, param_name="hull")


def upper_envelope(curve: RocCurve) -> RocCurve:
    """Monotone envelope: each point's tpr raised to the best seen at lower fpr."""
    c = curve.with_anchors()
    tpr = np.maximum.accumulate(c.tpr)
    return RocCurve(c.fpr, tpr, c.param, c.param_name)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under an anchored curve."""
    if not curve.anchored:
        raise ValueError("curve must include the anchors (0, 0) and (1, 1)")
    x, y = curve.fpr, curve.tpr
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def auc_pairwise(data: ScoredDataset, scorer: Callable[[ScoredDataset], np.ndarray] | None = None) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties as 1/2.

    Every pair is counted exactly: each positive score is located in the
    sorted negative scores, so the cost is O(n log n).
    """
    if not data.has_both_classes():
        raise ValueError("data must contain both classes")
    s = data.scores if scorer is None else np.asarray(scorer(data), dtype=float)
    pos = data.labels == 1
    neg_sorted = np.sort(s[~pos])
    below = np.searchsorted(neg_sorted, s[pos], side="left")
    tied = np.searchsorted(neg_sorted, s[pos], side="right") - below
    wins = 2 * int(below.sum()) + int(tied.sum())
    return wins / (2.0 * pos.sum() * neg_sorted.size)


def auc_pairwise_sampled(
    data: ScoredDataset,
    scorer: Callable[[ScoredDataset], np.ndarray] | None = None,
    n_pairs: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo pairwise AUC; returns ``(estimate, standard_error)``."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    s = data.scores if scorer is None else np.asarray(scorer(data), dtype=float)
    pos = data.labels == 1
    rng = np.random.default_rng(seed)
    a = rng.choice(s[pos], n_pairs)
    b = rng.choice(s[~pos], n_pairs)
    wins = (a > b) + 0.5 * (a == b)
    return float(wins.mean()), float(wins.std(ddof=1) / np.sqrt(n_pairs)) if n_pairs > 1 else float("nan")
