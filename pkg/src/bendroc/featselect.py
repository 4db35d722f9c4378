"""Screening auxiliary features before running the threshold optimisation.

Two per-bin quantities are computed for a candidate feature:

* separation difficulty ``(mu_pos - mu_neg) / (sigma_pos * sigma_neg)``
* prior measure ``log(p_pos * sigma_neg / (p_neg * sigma_pos))``

A feature is promising when either varies a lot across its bins. Variances
are weighted by the data mass of each bin, ``(p_pos + p_neg) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .binning import make_equal_width_partition, make_quantile_partition
from .dataio import ScoredDataset
from .model import BinStats, fit_bin_model


def separation_difficulty(bin: BinStats, geometric: bool = False) -> float:
    """Mean gap over ``sigma_pos * sigma_neg``, or over its square root."""
    scale = bin.sigma_pos * bin.sigma_neg
    if geometric:
        scale = math.sqrt(scale)
    return (bin.mu_pos - bin.mu_neg) / scale


def prior_measure(bin: BinStats) -> float:
    if bin.p_pos <= 0 or bin.p_neg <= 0:
        raise ValueError("prior measure needs both classes present in the bin")
    return math.log(bin.p_pos * bin.sigma_neg / (bin.p_neg * bin.sigma_pos))


def _weighted_variance(values: np.ndarray, weights: np.ndarray) -> float:
    if values.size == 0 or weights.sum() <= 0:
        return 0.0
    w = weights / weights.sum()
    mean = float(np.sum(w * values))
    return float(np.sum(w * (values - mean) ** 2))


@dataclass(frozen=True, eq=False)
class FeatureReport:
    feature: str
    index: int
    sd_values: np.ndarray
    prior_values: np.ndarray
    weights: np.ndarray
    excluded_bins: tuple[int, ...]
    sd_variance: float
    prior_variance: float
    accepted: bool = True
    score: float = math.nan


def score_feature(
    data: ScoredDataset,
    feature_index: int,
    nbins: int,
    strategy: Literal["quantile", "equal_width"] = "quantile",
    min_count: int = 5,
    geometric_sd: bool = False,
) -> FeatureReport:
    """Bin one feature and report the spread of both per-bin measures.

    Bins lacking either class are left out (their indices are listed in
    ``excluded_bins``).
    """
    if nbins < 2:
        raise ValueError("nbins must be >= 2")
    make = make_quantile_partition if strategy == "quantile" else make_equal_width_partition
    model = fit_bin_model(data, make(data, [feature_index], [nbins]), min_count=min_count)
    keep, excluded = [], []
    for i, s in enumerate(model.stats):
        (keep if s.p_pos > 0 and s.p_neg > 0 else excluded).append(i)
    stats = [model.stats[i] for i in keep]
    sd = np.array([separation_difficulty(s, geometric_sd) for s in stats])
    prior = np.array([prior_measure(s) for s in stats])
    weights = np.array([(s.p_pos + s.p_neg) / 2.0 for s in stats])
    return FeatureReport(
        feature=data.aux_names[feature_index],
        index=feature_index,
        sd_values=sd,
        prior_values=prior,
        weights=weights,
        excluded_bins=tuple(excluded),
        sd_variance=_weighted_variance(sd, weights),
        prior_variance=_weighted_variance(prior, weights),
    )


def rank_features(
    data: ScoredDataset,
    nbins: int,
    thresholds: tuple[float, float] = (0.05, 0.05),
    **kwargs,
) -> list[FeatureReport]:
    """Score every auxiliary feature and order them, most promising first.

    Each variance is divided by its largest value across features and a
    feature is ranked by the larger of its two normalised scores. Features
    below both ``thresholds = (sd_var_min, prior_var_min)`` are rejected.
    """
    reports = [score_feature(data, j, nbins, **kwargs) for j in range(data.n_features)]
    sd_max = max(r.sd_variance for r in reports) or 1.0
    prior_max = max(r.prior_variance for r in reports) or 1.0
    sd_min, prior_min = thresholds
    ranked = []
    for r in reports:
        score = max(r.sd_variance / sd_max, r.prior_variance / prior_max)
        accepted = r.sd_variance >= sd_min or r.prior_variance >= prior_min
        ranked.append(
            FeatureReport(**{**r.__dict__, "accepted": accepted, "score": score})
        )
    ranked.sort(key=lambda r: (-r.score, r.index))
    return ranked
