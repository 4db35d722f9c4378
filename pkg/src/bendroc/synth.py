"""Seeded synthetic score datasets.

``example1``: X1 ~ U[1, 5] carries no class information on its own, but the
score of a positive is N(X1, 1) while a negative scores N(0, 1).

``example2``: the class shifts the mean of the score only, yet positives are
spread twice as wide (covariance 2I against I), so the class balance
depends strongly on X1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .dataio import ScoredDataset


class SpecError(ValueError):
    pass


def _labels(rng: np.random.Generator, n: int, p_pos: float = 0.5) -> np.ndarray:
    return np.where(rng.random(n) < p_pos, 1, -1).astype(np.int8)


def gen_example1(n: int, seed: int = 0) -> ScoredDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(1.0, 5.0, n)
    y = _labels(rng, n)
    x2 = np.where(y == 1, x1, 0.0) + rng.standard_normal(n)
    return ScoredDataset(y, x2, x1.reshape(-1, 1), ("x1",))


def gen_example2(n: int, seed: int = 0) -> ScoredDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    y = _labels(rng, n)
    sd = np.where(y == 1, np.sqrt(2.0), 1.0)
    x1 = sd * rng.standard_normal(n)
    x2 = np.where(y == 1, 1.0, 0.0) + sd * rng.standard_normal(n)
    return ScoredDataset(y, x2, x1.reshape(-1, 1), ("x1",))


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for a synthetic dataset.

    For ``example="custom"`` the table lists one row per bin:
    ``(mu_pos, sigma_pos, mu_neg, sigma_neg, p_pos, p_neg)``, where each
    prior column sums to one over bins.
    """

    example: Literal["example1", "example2", "custom"] = "custom"
    n: int = 1000
    seed: int = 0
    bins: Sequence[tuple[float, float, float, float, float, float]] = field(default=())
    p_positive: float = 0.5

    def __post_init__(self):
        if self.example not in ("example1", "example2", "custom"):
            raise SpecError(f"unknown example {self.example!r}")
        if self.n < 1:
            raise SpecError("n must be >= 1")
        if not 0.0 < self.p_positive < 1.0:
            raise SpecError("p_positive must be in (0, 1)")
        if self.example != "custom":
            return
        table = np.asarray(self.bins, dtype=float)
        if table.ndim != 2 or table.shape[1] != 6 or table.shape[0] < 1:
            raise SpecError("custom spec needs rows of (mu+, sigma+, mu-, sigma-, p+, p-)")
        if np.any(table[:, [1, 3]] <= 0):
            raise SpecError("sigmas must be > 0")
        if np.any(table[:, [4, 5]] < 0):
            raise SpecError("priors must be >= 0")
        for col, name in ((4, "p+"), (5, "p-")):
            if abs(table[:, col].sum() - 1.0) > 1e-9:
                raise SpecError(f"{name} column sums to {table[:, col].sum():.6g}, not 1")


def gen_custom(spec: SynthSpec) -> ScoredDataset:
    """Draw labels, then a bin from that class's priors, then a Gaussian score.

    The auxiliary feature is the bin index itself.
    """
    if spec.example == "example1":
        return gen_example1(spec.n, spec.seed)
    if spec.example == "example2":
        return gen_example2(spec.n, spec.seed)
    table = np.asarray(spec.bins, dtype=float)
    rng = np.random.default_rng(spec.seed)
    y = _labels(rng, spec.n, spec.p_positive)
    pos = y == 1
    b = np.empty(spec.n, dtype=np.int64)
    b[pos] = rng.choice(table.shape[0], pos.sum(), p=table[:, 4] / table[:, 4].sum())
    b[~pos] = rng.choice(table.shape[0], (~pos).sum(), p=table[:, 5] / table[:, 5].sum())
    mu = np.where(pos, table[b, 0], table[b, 2])
    sd = np.where(pos, table[b, 1], table[b, 3])
    score = mu + sd * rng.standard_normal(spec.n)
    return ScoredDataset(y, score, b.astype(float).reshape(-1, 1), ("bin",))


GENERATORS = {"example1": gen_example1, "example2": gen_example2}
