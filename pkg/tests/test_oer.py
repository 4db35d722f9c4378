import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bendroc.binning import make_equal_width_partition
from bendroc.model import BinStats, fit_bin_model, gaussian_density
from bendroc.oer import (
    DegenerateBinError,
    SolverConfig,
    ThresholdCurve,
    benefit_cost_ratio,
    bin_objective,
    default_clamp,
    default_lambda_grid,
    grid_oracle,
    predicted_operating_point,
    ratio_minimum,
    solve_closed_form,
    solve_gradient,
    sweep_lambda,
)

from conftest import model_from_stats, sym_bin


def residual(b, lam, k):
    return b.p_pos * gaussian_density(k, b.mu_pos, b.sigma_pos) - lam * b.p_neg * gaussian_density(
        k, b.mu_neg, b.sigma_neg
    )


# -- benefit-cost ratio --------------------------------------------------------

def test_ratio_midpoint():
    assert benefit_cost_ratio(sym_bin(), 0.0) == pytest.approx(1.0)


def test_ratio_minimum_when_positive_wider():
    b = BinStats(0.0, 2.0, 0.0, 1.0, 0.5, 0.5)
    ks = np.linspace(-3, 3, 601)
    r = np.array([benefit_cost_ratio(b, k) for k in ks])
    np.testing.assert_allclose(r, 0.5 * np.exp(3 * ks**2 / 8), rtol=1e-12)
    assert ks[np.argmin(r)] == pytest.approx(0.0) and r.min() == pytest.approx(0.5)


def test_ratio_known_point():
    b = BinStats(2.0, 1.0, 0.0, 1.0, 0.5, 0.5)
    assert benefit_cost_ratio(b, 1.3466) == pytest.approx(2.0, abs=1e-3)


def test_ratio_degenerate_priors():
    assert benefit_cost_ratio(BinStats(0, 1, 0, 1, 0.3, 0.0), 0.0) == math.inf
    assert benefit_cost_ratio(BinStats(0, 1, 0, 1, 0.0, 0.3), 0.0) == 0.0
    with pytest.raises(DegenerateBinError):
        benefit_cost_ratio(BinStats(0, 1, 0, 1, 0.0, 0.0), 0.0)


# -- closed form ---------------------------------------------------------------

def test_closed_form_examples():
    m = model_from_stats([sym_bin()])
    assert solve_closed_form(m, 0.0).thresholds[0] == pytest.approx(0.0, abs=1e-15)

    b = BinStats(2.0, 1.0, 0.0, 1.0, 1.0, 1.0)
    k = solve_closed_form(model_from_stats([b]), math.log(2)).thresholds[0]
    assert k == pytest.approx(1 + math.log(2) / 2, abs=1e-12)
    assert benefit_cost_ratio(b, k) == pytest.approx(2.0, rel=1e-12)

    b = BinStats(1.0, 1.0, 0.0, 1.0, 0.25, 0.75)
    k = solve_closed_form(model_from_stats([b]), 0.0).thresholds[0]
    assert k == pytest.approx(math.log(3) + 0.5, abs=1e-12)
    assert abs(residual(b, 1.0, k)) <= 1e-9


def test_closed_form_errors_and_clamp():
    with pytest.raises(DegenerateBinError, match="bin 1"):
        solve_closed_form(model_from_stats([sym_bin(), sym_bin(mu_pos=-1.0), sym_bin()]), 0.0)
    with pytest.raises(ValueError):
        solve_closed_form(model_from_stats([sym_bin(sigma_pos=2.0)]), 0.0)
    c = solve_closed_form(model_from_stats([sym_bin()]), 500.0, clamp=3.0)
    assert c.thresholds[0] == 3.0


# -- oracle --------------------------------------------------------------------

def test_oracle_symmetric():
    assert grid_oracle(sym_bin(), 1.0, 10.0) == pytest.approx(0.0, abs=1e-4)
    with pytest.raises(ValueError):
        grid_oracle(sym_bin(), 1.0, 10.0, resolution=999)


def test_oracle_boundary_optimum():
    # positives wider, lambda under the ratio minimum of 0.5 -> everything positive
    b = BinStats(0.0, 2.0, 0.0, 1.0, 0.5, 0.5)
    assert grid_oracle(b, 0.4, 20.0) == -20.0


@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 3), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(-4, 4)
)
@settings(max_examples=50, deadline=None)
def test_oracle_matches_closed_form(mp, mn, sd, pp, pn, log_lam):
    if abs(mp - mn) < 0.2:
        mp = mn + 0.2
    b = BinStats(mp, sd, mn, sd, pp, pn)
    m = model_from_stats([b])
    K = default_clamp(m)
    k_cf = solve_closed_form(m, log_lam, K).thresholds[0]
    k_or = grid_oracle(b, math.exp(log_lam), K)
    if mp > mn:
        assert k_cf == pytest.approx(k_or, abs=1e-4)
    else:
        # stationary point is a minimum; the oracle sits on a bound
        assert bin_objective(b, math.exp(log_lam), k_or) >= bin_objective(b, math.exp(log_lam), k_cf) - 1e-12


# -- gradient solver -------------------------------------------------------------

def test_gradient_symmetric():
    c = solve_gradient(model_from_stats([sym_bin()]), 1.0)
    assert c.converged and c.thresholds[0] == pytest.approx(0.0, abs=1e-4)


def test_gradient_from_zero_and_fixed_rate():
    m = model_from_stats([sym_bin()])
    c = solve_gradient(m, 1.0, SolverConfig(init="zero"))
    assert c.thresholds[0] == pytest.approx(0.0, abs=1e-4)
    c = solve_gradient(m, 2.0, SolverConfig(learning_rate=1.0, init="zero"))
    assert c.converged
    assert c.thresholds[0] == pytest.approx(math.log(2) / 2, abs=1e-4)


def test_ratio_minimum_closed_form():
    b = BinStats(0.3, 2.0, -0.4, 1.0, 0.2, 0.6)
    ks = np.linspace(-10, 10, 200001)
    grid_min = min(benefit_cost_ratio(b, k) for k in ks[::50])
    assert ratio_minimum(b) == pytest.approx(grid_min, rel=1e-4)
    assert ratio_minimum(sym_bin()) == 0.0


def test_gradient_clamped_outer_bins(ex2):
    part = make_equal_width_partition(ex2, [0], [120], ranges=[(-6.0, 6.0)])
    m = fit_bin_model(ex2, part)
    r_min = np.array([ratio_minimum(s) if not s.empty else 0.0 for s in m.stats])
    wide = np.flatnonzero((r_min > 0) & np.isfinite(r_min))
    assert wide.size > 10
    for lam in np.quantile(r_min[wide], [0.25, 0.5, 0.9]):
        c = solve_gradient(m, float(lam))
        assert c.converged
        below = np.flatnonzero(r_min > lam)
        assert below.size > 0
        assert np.all(c.thresholds[below] == -c.clamp)


def test_gradient_stationarity_and_bounds():
    rng = np.random.default_rng(4)
    stats = [BinStats(*rng.uniform(-2, 2, 1), *rng.uniform(0.5, 2, 1), *rng.uniform(-2, 2, 1),
                      *rng.uniform(0.5, 2, 1), *rng.uniform(0.05, 0.3, 2)) for _ in range(12)]
    m = model_from_stats(stats)
    for lam in (0.1, 1.0, 10.0):
        c = solve_gradient(m, lam)
        assert c.converged
        assert np.all(np.abs(c.thresholds) <= c.clamp)
        for b, k in zip(stats, c.thresholds):
            assert abs(residual(b, lam, k)) <= 1e-8 or abs(k) == c.clamp
            assert bin_objective(b, lam, k) >= bin_objective(b, lam, grid_oracle(b, lam, c.clamp)) - 1e-6


def test_gradient_agrees_with_closed_form():
    rng = np.random.default_rng(5)
    stats = []
    for _ in range(10):
        mn = rng.uniform(-2, 1)
        sd = rng.uniform(0.5, 2)
        stats.append(BinStats(mn + rng.uniform(0.5, 2), sd, mn, sd, *rng.uniform(0.05, 0.3, 2)))
    m = model_from_stats(stats)
    for lam in (0.2, 1.0, 5.0):
        g = solve_gradient(m, lam)
        cf = solve_closed_form(m, math.log(lam), g.clamp)
        np.testing.assert_allclose(g.thresholds, cf.thresholds, atol=1e-6)


def test_nonconvergence_flagged():
    b = BinStats(0.0, 1.0, 0.5, 2.0, 0.5, 0.5)
    c = solve_gradient(model_from_stats([b]), 1.0, SolverConfig(max_iterations=1, init="zero", boundary_check=False))
    assert not c.converged


def test_solver_config_validation():
    for kw in ({"learning_rate": 0}, {"eps": -1}, {"max_iterations": 0}, {"init": "random"}, {"clamp": 0}):
        with pytest.raises(ValueError):
            SolverConfig(**kw)
    with pytest.raises(ValueError):
        ThresholdCurve([2.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        solve_gradient(model_from_stats([sym_bin()]), 0.0)


# -- sweeps ------------------------------------------------------------------

def test_sweep_monotone_symmetric():
    m = model_from_stats([sym_bin()])
    ks = [c.thresholds[0] for c in sweep_lambda(m, [0.1, 1.0, 10.0])]
    assert ks[0] < ks[1] < ks[2]
    m2 = model_from_stats([sym_bin(sigma_pos=1.5)])
    ks = [c.thresholds[0] for c in sweep_lambda(m2, [0.5, 1.0, 2.0])]
    assert ks[0] < ks[1] < ks[2]


@pytest.mark.parametrize("grid", [[], [1.0, 1.0], [2.0, 1.0], [-1.0, 1.0]])
def test_sweep_bad_grid(grid):
    with pytest.raises(ValueError):
        sweep_lambda(model_from_stats([sym_bin()]), grid)


def test_sweep_example1(ex1):
    m = fit_bin_model(ex1, make_equal_width_partition(ex1, [0], [8]), equal_variance=True)
    grid = default_lambda_grid(m, ex1.scores, 200)
    curves = sweep_lambda(m, grid)
    assert len(curves) == 200 and all(c.converged for c in curves)
    pts = np.array([predicted_operating_point(m, c) for c in curves])
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    env = np.maximum.accumulate(pts[order, 1])
    assert np.all(np.diff(env) >= 0)
    assert pts[:, 0].min() < 0.01 and pts[:, 0].max() > 0.99


def test_predicted_point():
    b = BinStats(1.0, 1.0, 0.0, 1.0, 1.0, 1.0)
    m = model_from_stats([b])
    fpr, tpr = predicted_operating_point(m, ThresholdCurve([0.5], 1.0, 20.0))
    assert tpr == pytest.approx(0.6915, abs=1e-4) and fpr == pytest.approx(0.3085, abs=1e-4)
    assert predicted_operating_point(m, ThresholdCurve([-20.0], 1.0, 20.0)) == pytest.approx((1.0, 1.0))
    assert predicted_operating_point(m, ThresholdCurve([20.0], 1.0, 20.0)) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_single_bin_sweep_traces_model_roc():
    b = BinStats(1.0, 1.3, 0.0, 1.0, 1.0, 1.0)
    m = model_from_stats([b])
    for c in sweep_lambda(m, np.geomspace(0.05, 20, 15)):
        fpr, tpr = predicted_operating_point(m, c)
        k = c.thresholds[0]
        # a single bin is just a scalar threshold on the score
        assert tpr == pytest.approx(0.5 * math.erfc((k - 1.0) / (1.3 * math.sqrt(2))), abs=1e-12)
        assert fpr == pytest.approx(0.5 * math.erfc(k / math.sqrt(2)), abs=1e-12)
