"""Fit-and-evaluate orchestration shared by the CLI and the test-suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.stats import binomtest

from .binning import BinPartition, make_equal_width_partition, make_quantile_partition
from .dataio import ScoredDataset, split_dataset
from .model import BinModel, fit_bin_model
from .oer import SolverConfig, ThresholdCurve, default_lambda_grid, sweep_lambda
from .roc import RocCurve, auc, fixed_threshold_curve, oer_curve, offset_baseline_curve, rocch, upper_envelope

METHODS = ("oer", "fixed", "constant_fpr", "constant_tpr", "rocch")


@dataclass(frozen=True)
class PipelineSettings:
    features: tuple[int, ...] = (0,)
    bins: tuple[int, ...] = (8,)
    strategy: Literal["equal_width", "quantile"] = "equal_width"
    ranges: tuple[tuple[float, float] | None, ...] | None = None
    min_count: int = 5
    sigma_floor: float | None = None
    equal_variance: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    lambda_grid_size: int = 200

    def __post_init__(self):
        if len(self.features) != len(self.bins):
            raise ValueError("one bin count per feature is required")
        if self.strategy not in ("equal_width", "quantile"):
            raise ValueError(f"unknown partition strategy {self.strategy!r}")
        if self.lambda_grid_size < 2:
            raise ValueError("lambda_grid_size must be >= 2")


def build_partition(data: ScoredDataset, settings: PipelineSettings) -> BinPartition:
    if settings.strategy == "quantile":
        return make_quantile_partition(data, settings.features, settings.bins)
    return make_equal_width_partition(data, settings.features, settings.bins, settings.ranges)


def fit_model(data: ScoredDataset, settings: PipelineSettings) -> BinModel:
    return fit_bin_model(
        data,
        build_partition(data, settings),
        min_count=settings.min_count,
        sigma_floor=settings.sigma_floor,
        equal_variance=settings.equal_variance,
    )


def solve_sweep(model: BinModel, train: ScoredDataset, settings: PipelineSettings) -> list[ThresholdCurve]:
    grid = default_lambda_grid(model, train.scores, settings.lambda_grid_size)
    return sweep_lambda(model, grid, settings.solver)


@dataclass(frozen=True, eq=False)
class FoldResult:
    model: BinModel
    thresholds: list[ThresholdCurve]
    curves: dict[str, RocCurve]
    aucs: dict[str, float]

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.thresholds)


def evaluate_fold(train: ScoredDataset, test: ScoredDataset, settings: PipelineSettings) -> FoldResult:
    """Fit on ``train``; score OER and the baselines on ``test``."""
    model = fit_model(train, settings)
    thresholds = solve_sweep(model, train, settings)
    raw = oer_curve(test, model.partition, thresholds)
    const_fpr = offset_baseline_curve(test, model, "constant_fpr")
    const_tpr = offset_baseline_curve(test, model, "constant_tpr")
    curves = {
        "oer": upper_envelope(raw),
        "oer_raw": raw,
        "fixed": fixed_threshold_curve(test),
        "constant_fpr": const_fpr,
        "constant_tpr": const_tpr,
        "rocch": rocch([const_fpr, const_tpr]),
    }
    aucs = {m: auc(curves[m]) for m in METHODS}
    return FoldResult(model, thresholds, curves, aucs)


@dataclass(frozen=True)
class Summary:
    per_fold: list[dict[str, float]]

    def mean(self, method: str) -> float:
        return float(np.mean([f[method] for f in self.per_fold]))

    def std(self, method: str) -> float:
        return float(np.std([f[method] for f in self.per_fold], ddof=1)) if len(self.per_fold) > 1 else 0.0

    @property
    def delta(self) -> float:
        """Mean OER AUC minus mean fixed-threshold AUC."""
        return self.mean("oer") - self.mean("fixed")

    @property
    def relative_error_reduction(self) -> float:
        """Relative reduction of ``1 - AUC`` from fixed threshold to OER."""
        base = 1.0 - self.mean("fixed")
        return (base - (1.0 - self.mean("oer"))) / base if base > 0 else math.nan

    @property
    def wins(self) -> int:
        return sum(f["oer"] >= f["fixed"] for f in self.per_fold)

    @property
    def sign_test_p(self) -> float:
        """One-sided sign-test p-value for OER >= fixed across folds."""
        n = len(self.per_fold)
        return float(binomtest(self.wins, n, 0.5, alternative="greater").pvalue)

    def rows(self) -> list[dict]:
        out = [
            {"method": m, "auc_mean": self.mean(m), "auc_std": self.std(m)}
            for m in METHODS
        ]
        return out

    def as_dict(self) -> dict:
        return {
            "folds": len(self.per_fold),
            "methods": {m: {"auc_mean": self.mean(m), "auc_std": self.std(m)} for m in METHODS},
            "auc_delta": self.delta,
            "relative_1_minus_auc_reduction": self.relative_error_reduction,
            "sign_test_wins": self.wins,
            "sign_test_p": self.sign_test_p,
            "per_fold": self.per_fold,
        }


def cross_validate(
    data: ScoredDataset, settings: PipelineSettings, folds: int = 10, seed: int = 0
) -> tuple[Summary, list[FoldResult]]:
    if folds < 2:
        raise ValueError("evaluation requires held-out data: folds must be >= 2")
    results = [evaluate_fold(train, test, settings) for train, test in split_dataset(data, folds, seed)]
    return Summary([r.aucs for r in results]), results
