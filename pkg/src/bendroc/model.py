"""Per-bin Gaussian model of classifier scores.

Within bin ``i`` the score of a positive sample is modelled as
``N(mu_pos_i, sigma_pos_i)`` and that of a negative as
``N(mu_neg_i, sigma_neg_i)``; ``p_pos_i`` and ``p_neg_i`` are the fractions
of each class falling in the bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from .binning import BinPartition
from .dataio import ScoredDataset

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class FitError(ValueError):
    pass


def _check_sigma(sigma):
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be > 0")


def gaussian_density(x, mu, sigma):
    _check_sigma(sigma)
    z = (np.asarray(x, dtype=float) - mu) / sigma
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z) / sigma
    return float(out) if np.ndim(out) == 0 else out


def gaussian_cdf(x, mu, sigma):
    _check_sigma(sigma)
    out = ndtr((np.asarray(x, dtype=float) - mu) / sigma)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_sf(x, mu, sigma):
    """Upper tail ``1 - cdf``, computed without cancellation."""
    _check_sigma(sigma)
    out = ndtr((mu - np.asarray(x, dtype=float)) / sigma)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BinStats:
    mu_pos: float
    sigma_pos: float
    mu_neg: float
    sigma_neg: float
    p_pos: float
    p_neg: float
    n_pos: int = 0
    n_neg: int = 0
    pooled_pos: bool = False
    pooled_neg: bool = False

    def __post_init__(self):
        if not (self.sigma_pos > 0 and self.sigma_neg > 0):
            raise ValueError("bin sigmas must be > 0")
        if not (0.0 <= self.p_pos <= 1.0 and 0.0 <= self.p_neg <= 1.0):
            raise ValueError("bin priors must lie in [0, 1]")

    @property
    def empty(self) -> bool:
        return self.p_pos == 0.0 and self.p_neg == 0.0


@dataclass(frozen=True, eq=False)
class BinModel:
    stats: tuple[BinStats, ...]
    partition: BinPartition
    sigma_floor: tuple[float, float]
    equal_variance: bool = False
    min_count: int = 5

    def __post_init__(self):
        object.__setattr__(self, "stats", tuple(self.stats))
        if len(self.stats) != self.partition.n_bins:
            raise ValueError(f"{len(self.stats)} bin stats for a {self.partition.n_bins}-bin partition")

    @property
    def n_bins(self) -> int:
        return len(self.stats)

    def _column(self, name: str) -> np.ndarray:
        a = np.array([getattr(s, name) for s in self.stats], dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def mu_pos(self) -> np.ndarray:
        return self._column("mu_pos")

    @cached_property
    def mu_neg(self) -> np.ndarray:
        return self._column("mu_neg")

    @cached_property
    def sigma_pos(self) -> np.ndarray:
        return self._column("sigma_pos")

    @cached_property
    def sigma_neg(self) -> np.ndarray:
        return self._column("sigma_neg")

    @cached_property
    def p_pos(self) -> np.ndarray:
        return self._column("p_pos")

    @cached_property
    def p_neg(self) -> np.ndarray:
        return self._column("p_neg")

    def bin_of(self, data: ScoredDataset) -> np.ndarray:
        return self.partition.assign(data.aux)

    def to_dict(self) -> dict:
        return {
            "partition": self.partition.to_dict(),
            "sigma_floor": list(self.sigma_floor),
            "equal_variance": self.equal_variance,
            "min_count": self.min_count,
            "bins": [
                {
                    "mu_pos": s.mu_pos,
                    "sigma_pos": s.sigma_pos,
                    "mu_neg": s.mu_neg,
                    "sigma_neg": s.sigma_neg,
                    "p_pos": s.p_pos,
                    "p_neg": s.p_neg,
                    "n_pos": s.n_pos,
                    "n_neg": s.n_neg,
                    "pooled_pos": s.pooled_pos,
                    "pooled_neg": s.pooled_neg,
                }
                for s in self.stats
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BinModel":
        return cls(
            stats=tuple(BinStats(**b) for b in doc["bins"]),
            partition=BinPartition.from_dict(doc["partition"]),
            sigma_floor=tuple(doc["sigma_floor"]),
            equal_variance=bool(doc.get("equal_variance", False)),
            min_count=int(doc.get("min_count", 5)),
        )


def _moments(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1))


def fit_bin_model(
    data: ScoredDataset,
    partition: BinPartition,
    min_count: int = 5,
    sigma_floor: float | None = None,
    equal_variance: bool = False,
) -> BinModel:
    """Estimate per-bin score means, deviations and class priors.

    A class with fewer than ``min_count`` samples in a bin takes the pooled
    (whole-dataset) mean and deviation of that class. Priors always come from
    the raw counts. With ``equal_variance`` each bin's two deviations are
    replaced by their pooled within-bin value.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not data.has_both_classes():
        raise FitError("training data must contain both positive and negative samples")
    bins = partition.assign(data.aux)
    pos = data.labels == 1
    n_pos_total, n_neg_total = int(pos.sum()), int((~pos).sum())

    mu_g = {1: _moments(data.scores[pos]), -1: _moments(data.scores[~pos])}
    if sigma_floor is None:
        floors = tuple(max(1e-6, 1e-3 * mu_g[c][1]) for c in (1, -1))
    else:
        if sigma_floor <= 0:
            raise ValueError("sigma_floor must be > 0")
        floors = (float(sigma_floor), float(sigma_floor))
    floor_of = {1: floors[0], -1: floors[1]}

    counts_pos = np.bincount(bins[pos], minlength=partition.n_bins)
    counts_neg = np.bincount(bins[~pos], minlength=partition.n_bins)
    order = np.argsort(bins, kind="stable")
    starts = np.searchsorted(bins[order], np.arange(partition.n_bins + 1))

    stats = []
    for i in range(partition.n_bins):
        members = order[starts[i]:starts[i + 1]]
        y = data.labels[members]
        s = data.scores[members]
        est = {}
        for c in (1, -1):
            xs = s[y == c]
            pooled = xs.size < min_count
            mu, sd = mu_g[c] if pooled else _moments(xs)
            est[c] = (mu, max(sd, floor_of[c]), pooled, xs.size)
        sp, sn = est[1][1], est[-1][1]
        if equal_variance:
            wp, wn = max(est[1][3] - 1, 1), max(est[-1][3] - 1, 1)
            sp = sn = math.sqrt((wp * sp**2 + wn * sn**2) / (wp + wn))
        stats.append(
            BinStats(
                mu_pos=est[1][0],
                sigma_pos=sp,
                mu_neg=est[-1][0],
                sigma_neg=sn,
                p_pos=counts_pos[i] / n_pos_total,
                p_neg=counts_neg[i] / n_neg_total,
                n_pos=int(counts_pos[i]),
                n_neg=int(counts_neg[i]),
                pooled_pos=est[1][2],
                pooled_neg=est[-1][2],
            )
        )
    return BinModel(tuple(stats), partition, floors, equal_variance, min_count)


def with_equal_variance(model: BinModel) -> BinModel:
    """Copy of ``model`` whose bins share one pooled deviation per bin."""
    stats = []
    for s in model.stats:
        wp, wn = max(s.n_pos - 1, 1), max(s.n_neg - 1, 1)
        sd = math.sqrt((wp * s.sigma_pos**2 + wn * s.sigma_neg**2) / (wp + wn))
        stats.append(replace(s, sigma_pos=sd, sigma_neg=sd))
    return replace(model, stats=tuple(stats), equal_variance=True)
