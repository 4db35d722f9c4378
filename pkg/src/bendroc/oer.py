"""Optimal per-bin thresholds for a fitted :class:`~bendroc.model.BinModel`.

For a benefit-cost ratio ``lam > 0`` the thresholds maximise, bin by bin,

    J_i(k) = p_pos_i * (1 - F_i(k)) - lam * p_neg_i * (1 - G_i(k))

whose stationary points satisfy ``p_pos_i f_i(k) = lam p_neg_i g_i(k)``.
Three independent routes are provided: projected gradient ascent, the
closed form for bins with equal class deviations, and a brute-force grid
search used as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.special import ndtr

from .model import BinModel, BinStats

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_LOG_GAP_TOL = 1e-7


class DegenerateBinError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    thresholds: np.ndarray
    lam: float
    clamp: float
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        k = np.array(self.thresholds, dtype=float).reshape(-1)
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.clamp > 0:
            raise ValueError("clamp must be > 0")
        if np.any(np.abs(k) > self.clamp):
            raise ValueError("thresholds must lie in [-clamp, clamp]")
        k.setflags(write=False)
        object.__setattr__(self, "thresholds", k)

    def __len__(self) -> int:
        return self.thresholds.size


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`solve_gradient`.

    ``learning_rate=None`` selects the adaptive per-bin step; ``eps=None``
    means ``1e-8 * sqrt(N)``; ``clamp=None`` uses :func:`default_clamp`.
    """

    learning_rate: float | None = None
    eps: float | None = None
    max_iterations: int = 100_000
    clamp: float | None = None
    init: Literal["zero", "closed_form", "grid"] = "closed_form"
    boundary_check: bool = True

    def __post_init__(self):
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.clamp is not None and not self.clamp > 0:
            raise ValueError("clamp must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.init not in ("zero", "closed_form", "grid"):
            raise ValueError(f"unknown init {self.init!r}")


def default_clamp(model: BinModel) -> float:
    """Largest |mean| over bins and classes plus ten of the largest deviations."""
    mu = np.concatenate([model.mu_pos, model.mu_neg])
    sd = np.concatenate([model.sigma_pos, model.sigma_neg])
    return float(np.max(np.abs(mu)) + 10.0 * np.max(sd))


# ---------------------------------------------------------------------------
# per-bin quantities
# ---------------------------------------------------------------------------


def _log_weighted_density(k, p, mu, sigma):
    """log(p * N(k; mu, sigma)), -inf where p == 0."""
    z = (k - mu) / sigma
    with np.errstate(divide="ignore"):
        return np.log(p) - 0.5 * z * z - np.log(sigma) - _LOG_SQRT_2PI


def benefit_cost_ratio(bin: BinStats, k: float) -> float:
    """``p_pos f(k) / (p_neg g(k))`` for Gaussian class densities.

    Returns ``inf`` when the bin holds positives but no negatives.
    """
    if bin.empty:
        raise DegenerateBinError("benefit-cost ratio undefined for a bin without samples")
    if bin.p_neg == 0.0:
        return math.inf
    if bin.p_pos == 0.0:
        return 0.0
    log_ratio = (
        math.log(bin.p_pos * bin.sigma_neg / (bin.p_neg * bin.sigma_pos))
        - (k - bin.mu_pos) ** 2 / (2.0 * bin.sigma_pos**2)
        + (k - bin.mu_neg) ** 2 / (2.0 * bin.sigma_neg**2)
    )
    try:
        return math.exp(log_ratio)
    except OverflowError:
        return math.inf


def ratio_minimum(bin: BinStats) -> float:
    """Smallest benefit-cost ratio over all thresholds.

    Finite and positive only when ``sigma_pos > sigma_neg``; for any ``lam``
    below it the objective falls monotonically and the optimum is ``-K``.
    Returns 0 otherwise (the ratio is unbounded below).
    """
    if bin.empty:
        raise DegenerateBinError("benefit-cost ratio undefined for a bin without samples")
    if bin.sigma_pos <= bin.sigma_neg or bin.p_pos == 0.0:
        return 0.0
    if bin.p_neg == 0.0:
        return math.inf
    gap = bin.mu_pos - bin.mu_neg
    log_min = math.log(bin.p_pos * bin.sigma_neg / (bin.p_neg * bin.sigma_pos)) - gap * gap / (
        2.0 * (bin.sigma_pos**2 - bin.sigma_neg**2)
    )
    return math.exp(min(log_min, 709.0))


def bin_objective(bin: BinStats, lam: float, k):
    """Per-bin Lagrangian ``p_pos (1 - F(k)) - lam p_neg (1 - G(k))``."""
    k = np.asarray(k, dtype=float)
    return bin.p_pos * ndtr((bin.mu_pos - k) / bin.sigma_pos) - lam * bin.p_neg * ndtr(
        (bin.mu_neg - k) / bin.sigma_neg
    )


def _objective_vec(k, lam, p_pos, mu_pos, sd_pos, p_neg, mu_neg, sd_neg):
    return p_pos * ndtr((mu_pos - k) / sd_pos) - lam * p_neg * ndtr((mu_neg - k) / sd_neg)


def _objective_delta(k0, k1, lam, p_pos, mu_pos, sd_pos, p_neg, mu_neg, sd_neg):
    """``J(k1) - J(k0)`` evaluated from whichever tail keeps it accurate."""

    def tail_delta(mu, sd):
        z0, z1 = (k0 - mu) / sd, (k1 - mu) / sd
        upper = ndtr(-z1) - ndtr(-z0)
        lower = ndtr(z0) - ndtr(z1)
        return np.where(z0 + z1 > 0.0, upper, lower)

    return p_pos * tail_delta(mu_pos, sd_pos) - lam * p_neg * tail_delta(mu_neg, sd_neg)


# ---------------------------------------------------------------------------
# closed form
# ---------------------------------------------------------------------------


def _closed_form_raw(mu_pos, mu_neg, sd, p_pos, p_neg, lambda_log):
    """Stationary point for equal deviations; nan-free for empty bins."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_prior = np.log(p_neg) - np.log(p_pos)
    log_prior = np.where((p_pos == 0) & (p_neg == 0), 0.0, log_prior)
    with np.errstate(invalid="ignore"):
        k = sd**2 * (log_prior + lambda_log) / (mu_pos - mu_neg) + 0.5 * (mu_pos + mu_neg)
    return np.nan_to_num(k, nan=0.0, posinf=np.inf, neginf=-np.inf)


def solve_closed_form(model: BinModel, lambda_log: float, clamp: float | None = None) -> ThresholdCurve:
    """Exact thresholds for a model whose bins have ``sigma_pos == sigma_neg``.

    ``lambda_log`` is the natural log of the benefit-cost ratio and may be any
    real number.
    """
    if not np.allclose(model.sigma_pos, model.sigma_neg, rtol=1e-12, atol=0.0):
        raise ValueError("closed form requires equal class deviations in every bin")
    gap = model.mu_pos - model.mu_neg
    for i in np.flatnonzero(gap == 0):
        raise DegenerateBinError(f"bin {i} has equal class means; closed form undefined")
    K = default_clamp(model) if clamp is None else clamp
    k = _closed_form_raw(model.mu_pos, model.mu_neg, model.sigma_pos, model.p_pos, model.p_neg, lambda_log)
    return ThresholdCurve(np.clip(k, -K, K), math.exp(lambda_log), K)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def _golden_max(f, a: float, b: float, tol: float = 1e-11, max_iter: int = 200) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _local_form(bin: BinStats, lam: float, anchor: float):
    """Objective up to a constant, accurate for ``k`` near ``anchor``.

    Each class term uses whichever of ``F`` and ``1 - F`` is small at the
    anchor, so values stay resolvable when the optimum sits in a tail.
    """
    def term(p, mu, sd, k):
        z = (k - mu) / sd
        return -p * ndtr(z) if anchor < mu else p * ndtr(-z)

    def f(k):
        return term(bin.p_pos, bin.mu_pos, bin.sigma_pos, k) - term(lam * bin.p_neg, bin.mu_neg, bin.sigma_neg, k)

    return f


def _grid_argmax(bin: BinStats, lam: float, grid: np.ndarray) -> int:
    """Index of the best grid point, using exact increments between points."""
    args = (lam, bin.p_pos, bin.mu_pos, bin.sigma_pos, bin.p_neg, bin.mu_neg, bin.sigma_neg)
    d = _objective_delta(grid[:-1], grid[1:], *args)
    rising = np.r_[True, d > 0]
    falling = np.r_[d <= 0, True]
    peaks = np.flatnonzero(rising & falling)
    best = peaks[0]
    for j in peaks[1:]:
        if _objective_delta(grid[best], grid[j], *args) > 0:
            best = j
    return int(best)


def grid_oracle(bin: BinStats, lam: float, clamp: float, resolution: int = 10_001) -> float:
    """Global maximiser of the per-bin objective on ``[-clamp, clamp]``.

    Dense grid search followed by golden-section refinement over the two
    cells around the best grid point.
    """
    if resolution < 1000:
        raise ValueError("resolution must be >= 1000")
    if not lam > 0 or not clamp > 0:
        raise ValueError("lam and clamp must be > 0")
    grid = np.linspace(-clamp, clamp, resolution)
    j = _grid_argmax(bin, lam, grid)
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, resolution - 1)]
    f = _local_form(bin, lam, grid[j])
    best = _golden_max(f, lo, hi)
    gain = _objective_delta(
        grid[j], best, lam, bin.p_pos, bin.mu_pos, bin.sigma_pos, bin.p_neg, bin.mu_neg, bin.sigma_neg
    )
    # ties keep the grid point so boundary optima come back as exactly +-K
    return float(best if gain > 0 else grid[j])


def _grid_init(model: BinModel, lam: float, K: float, resolution: int = 2001) -> np.ndarray:
    grid = np.linspace(-K, K, resolution)[:, None]
    values = _objective_vec(
        grid, lam, model.p_pos, model.mu_pos, model.sigma_pos, model.p_neg, model.mu_neg, model.sigma_neg
    )
    return grid[np.argmax(values, axis=0), 0]


# ---------------------------------------------------------------------------
# gradient ascent
# ---------------------------------------------------------------------------


def _initial_thresholds(model: BinModel, lam: float, K: float, init: str) -> np.ndarray:
    if init == "zero":
        return np.zeros(model.n_bins)
    if init == "grid":
        return _grid_init(model, lam, K)
    sd = np.sqrt(0.5 * (model.sigma_pos**2 + model.sigma_neg**2))
    k = _closed_form_raw(model.mu_pos, model.mu_neg, sd, model.p_pos, model.p_neg, math.log(lam))
    return np.where(model.mu_pos == model.mu_neg, 0.0, k)


def _ascend(model: BinModel, lam: float, K: float, k: np.ndarray, config: SolverConfig, eps: float):
    """Projected gradient ascent from ``k``; returns (k, converged, iterations).

    Bins are retired individually once ``|r_i| <= eps / sqrt(N)`` (so the
    full residual norm is at most ``eps``) or once pinned at a bound.
    """
    n = k.size
    k = k.copy()
    tol_r = eps / math.sqrt(n)
    adaptive = config.learning_rate is None
    full = (model.p_pos, model.mu_pos, model.sigma_pos, lam * model.p_neg, model.mu_neg, model.sigma_neg)
    eta = np.full(n, 0.1)
    active = np.arange(n)

    def status(k, pp, mp, sp, lpn, mn, sn):
        log_a = _log_weighted_density(k, pp, mp, sp)
        log_b = _log_weighted_density(k, lpn, mn, sn)
        r = np.exp(log_a) - np.exp(log_b)
        with np.errstate(invalid="ignore"):
            log_ratio = log_a - log_b
        # both priors zero: the bin carries no weight, any threshold will do
        log_ratio = np.where(np.isnan(log_ratio), 0.0, log_ratio)
        # pinned: at a bound with the ascent direction pointing outward
        pinned = ((k <= -K) & (log_ratio > 0)) | ((k >= K) & (log_ratio < 0))
        done = pinned | (np.abs(r) <= tol_r)
        if adaptive:
            # tiny densities make |r| small far from any stationary point
            done &= pinned | (np.abs(log_ratio) <= _LOG_GAP_TOL)
        return r, log_ratio, done

    it = 0
    for it in range(1, config.max_iterations + 1):
        params = tuple(p[active] for p in full)
        ka = k[active]
        r, lr, done = status(ka, *params)
        if np.all(done):
            return k, True, it - 1
        if done.any():
            keep = ~done
            active, ka, r, lr = active[keep], ka[keep], r[keep], lr[keep]
            params = tuple(p[keep] for p in params)
        if not adaptive:
            k[active] = np.clip(ka - config.learning_rate * r, -K, K)
            continue
        pp, mp, sp, lpn, mn, sn = params
        ea = eta[active]
        gap = np.abs(lr)
        # zeta_i = eta_i * sd_i / max(p+ f, lam p- g), evaluated in log space
        step = -ea * np.minimum(sp, sn) * np.sign(lr) * -np.expm1(-gap)
        # near a maximum the log-ratio is increasing; a Newton step on it
        # then points uphill and avoids crawling when its slope is small
        slope = (ka - mn) / sn**2 - (ka - mp) / sp**2
        newton = (slope > 0) & np.isfinite(lr)
        cap = 10.0 * ea * np.maximum(sp, sn)
        with np.errstate(divide="ignore", invalid="ignore"):
            nstep = np.clip(-lr / slope, -cap, cap)
        step = np.where(newton, nstep, step)
        trial = np.clip(ka + step, -K, K)
        _, lr_new, _ = status(trial, *params)
        # within one sign region the move is uphill; across a root it must
        # bring the log-ratio closer to zero
        overshoot = (np.sign(lr_new) != np.sign(lr)) & (np.abs(lr_new) >= gap)
        delta = _objective_delta(ka, trial, 1.0, pp, mp, sp, lpn, mn, sn)
        accept = (delta >= -1e-15 * (pp + lpn)) & ~overshoot
        k[active] = np.where(accept, trial, ka)
        eta[active] = np.clip(np.where(accept, ea * 1.5, ea * 0.5), 1e-14, 1.0)
    _, _, done = status(k[active], *(p[active] for p in full))
    return k, bool(np.all(done)), it


def solve_gradient(model: BinModel, lam: float, config: SolverConfig | None = None, init=None) -> ThresholdCurve:
    """Per-bin thresholds for benefit-cost ratio ``lam`` by gradient ascent.

    Each iteration moves ``k <- k - zeta * (p_pos f(k) - lam p_neg g(k))`` and
    projects onto ``[-K, K]``. With the default adaptive step, ``zeta`` is set
    per bin: a Newton step on the log benefit-cost ratio where that ratio is
    increasing, otherwise a step scaled by the density, both bounded by a
    per-bin trust factor that shrinks whenever a step would lower the
    objective. ``init`` may pass an explicit starting vector
    (used for warm starts).

    After convergence each bin is compared with the two clamp bounds and
    the best point of a coarse grid; if one of them scores higher the ascent
    is restarted from there. This recovers the global optimum when the
    objective is not concave and the first ascent settles on the wrong side.
    """
    config = config or SolverConfig()
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    K = default_clamp(model) if config.clamp is None else config.clamp
    eps = config.eps if config.eps is not None else 1e-8 * math.sqrt(model.n_bins)
    if init is None:
        k0 = _initial_thresholds(model, lam, K, config.init)
    else:
        k0 = np.array(init, dtype=float).reshape(-1)
        if k0.size != model.n_bins:
            raise ValueError("initial threshold vector has the wrong length")
    k0 = np.clip(k0, -K, K)
    k, converged, iters = _ascend(model, lam, K, k0, config, eps)

    if config.boundary_check:
        args = (lam, model.p_pos, model.mu_pos, model.sigma_pos, model.p_neg, model.mu_neg, model.sigma_neg)
        probe = _grid_init(model, lam, K, resolution=401)
        candidates = [np.full_like(k, -K), np.full_like(k, K), probe]
        gains = np.array([_objective_delta(k, c, *args) for c in candidates])
        tol = 1e-12 * (model.p_pos + lam * model.p_neg)
        best = np.argmax(gains, axis=0)
        better = gains.max(axis=0) > tol
        if np.any(better):
            restart = np.where(better, np.choose(best, candidates), k)
            k, converged, more = _ascend(model, lam, K, restart, config, eps)
            iters += more
    return ThresholdCurve(np.clip(k, -K, K), lam, K, converged, iters)


def is_equal_variance(model: BinModel) -> bool:
    return model.equal_variance or bool(np.array_equal(model.sigma_pos, model.sigma_neg))


def sweep_lambda(
    model: BinModel, lambda_grid: Sequence[float], config: SolverConfig | None = None
) -> list[ThresholdCurve]:
    """Solve for every ratio in a strictly increasing grid.

    Equal-variance models use the closed form; otherwise each gradient
    solve is warm-started from the previous solution.
    """
    lambdas = np.asarray(list(lambda_grid), dtype=float)
    if lambdas.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambda grid must be positive and strictly increasing")
    config = config or SolverConfig()
    K = default_clamp(model) if config.clamp is None else config.clamp
    if is_equal_variance(model) and not np.any(model.mu_pos == model.mu_neg):
        return [solve_closed_form(model, math.log(lam), K) for lam in lambdas]
    config = replace(config, clamp=K)
    curves: list[ThresholdCurve] = []
    prev = None
    for lam in lambdas:
        curve = solve_gradient(model, float(lam), config, init=prev)
        curves.append(curve)
        prev = curve.thresholds
    return curves


def predicted_operating_point(model: BinModel, curve: ThresholdCurve) -> tuple[float, float]:
    """Model-implied ``(fpr, tpr)`` of a threshold vector."""
    k = curve.thresholds
    if k.size != model.n_bins:
        raise ValueError("threshold vector length does not match the model")
    tpr = float(np.sum(model.p_pos * ndtr((model.mu_pos - k) / model.sigma_pos)))
    fpr = float(np.sum(model.p_neg * ndtr((model.mu_neg - k) / model.sigma_neg)))
    return min(max(fpr, 0.0), 1.0), min(max(tpr, 0.0), 1.0)


def default_lambda_grid(model: BinModel, scores: Iterable[float], size: int = 200) -> np.ndarray:
    """Log-spaced ratios spanning those seen across the score range.

    The benefit-cost ratio of every populated bin is evaluated at score
    quantiles between 0.001 and 0.999; the grid runs from a tenth of the
    smallest to ten times the largest.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    q = np.quantile(np.asarray(list(scores), dtype=float), np.linspace(0.001, 0.999, 201))
    live = (model.p_pos > 0) & (model.p_neg > 0)
    if not np.any(live):
        return np.geomspace(1e-3, 1e3, size)
    kk = q[:, None]
    log_ratio = _log_weighted_density(kk, model.p_pos[live], model.mu_pos[live], model.sigma_pos[live]) - (
        _log_weighted_density(kk, model.p_neg[live], model.mu_neg[live], model.sigma_neg[live])
    )
    lo = max(float(log_ratio.min()) - math.log(10.0), -690.0)
    hi = min(float(log_ratio.max()) + math.log(10.0), 690.0)
    return np.exp(np.linspace(lo, hi, size))
