import math

import numpy as np
import pytest
from scipy.stats import norm

from bendroc.binning import BinPartition, make_equal_width_partition
from bendroc.dataio import dumps_dataset
from bendroc.model import fit_bin_model
from bendroc.oer import default_lambda_grid, sweep_lambda
from bendroc.roc import auc, auc_pairwise, fixed_threshold_curve, oer_curve, upper_envelope
from bendroc.synth import SpecError, SynthSpec, gen_custom, gen_example1, gen_example2


def test_example1_shape(ex1):
    assert len(ex1) == 20000
    assert abs(ex1.n_pos / len(ex1) - 0.5) <= 0.01
    assert ex1.aux.min() >= 1 and ex1.aux.max() <= 5
    sel = (ex1.labels == 1) & (ex1.aux[:, 0] >= 2.75) & (ex1.aux[:, 0] <= 3.25)
    s = ex1.scores[sel]
    assert abs(s.mean() - 3.0) <= 3 * s.std(ddof=1) / math.sqrt(s.size)


def test_example2_moments(ex2):
    x = ex2.aux[ex2.labels == -1, 0]
    n = x.size
    assert abs(x.var(ddof=1) - 1.0) <= 3 * math.sqrt(2.0 / (n - 1))
    s = ex2.scores[ex2.labels == 1]
    assert abs(s.mean() - 1.0) <= 3 * s.std(ddof=1) / math.sqrt(s.size)
    xp = ex2.aux[ex2.labels == 1, 0]
    assert abs(xp.var(ddof=1) - 2.0) <= 3 * 2.0 * math.sqrt(2.0 / (xp.size - 1))


@pytest.mark.parametrize("gen", [gen_example1, gen_example2])
def test_deterministic(gen):
    assert dumps_dataset(gen(500, 4)) == dumps_dataset(gen(500, 4))
    assert dumps_dataset(gen(500, 4)) != dumps_dataset(gen(500, 5))
    with pytest.raises(ValueError):
        gen(0, 1)


def test_custom_single_bin_auc():
    d = gen_custom(SynthSpec(n=20000, seed=1, bins=[(1.0, 1.0, 0.0, 1.0, 1.0, 1.0)]))
    expected = norm.cdf(1 / math.sqrt(2))
    se = math.sqrt(expected * (1 - expected) / min(d.n_pos, d.n_neg))
    assert abs(auc(fixed_threshold_curve(d)) - expected) <= 3 * se


def test_custom_identical_bins_give_no_gain():
    row = (1.0, 1.0, 0.0, 1.0, 0.5, 0.5)
    train = gen_custom(SynthSpec(n=10000, seed=2, bins=[row, row]))
    test = gen_custom(SynthSpec(n=10000, seed=3, bins=[row, row]))
    part = BinPartition(([0.0, 0.5, 1.0],), (0,), 1)
    m = fit_bin_model(train, part, equal_variance=True)
    curves = sweep_lambda(m, default_lambda_grid(m, train.scores))
    gain = auc(upper_envelope(oer_curve(test, part, curves))) - auc(fixed_threshold_curve(test))
    assert abs(gain) < 0.01


def test_custom_parameters_recovered():
    table = [(2.0, 0.5, 0.0, 1.0, 0.3, 0.6), (-1.0, 1.5, 1.0, 0.7, 0.7, 0.4)]
    d = gen_custom(SynthSpec(n=100_000, seed=7, bins=table))
    part = BinPartition(([0.0, 0.5, 1.0],), (0,), 1)
    m = fit_bin_model(d, part)
    for row, i in zip(table, (1, 2)):
        s = m.stats[i]
        assert abs(s.mu_pos - row[0]) <= 3 * row[1] / math.sqrt(s.n_pos)
        assert abs(s.mu_neg - row[2]) <= 3 * row[3] / math.sqrt(s.n_neg)
        assert abs(s.sigma_pos - row[1]) <= 3 * row[1] / math.sqrt(2 * s.n_pos)
        assert abs(s.p_pos - row[4]) <= 3 * math.sqrt(row[4] * (1 - row[4]) / d.n_pos)


@pytest.mark.parametrize(
    "kw",
    [
        {"bins": [(0, 1, 0, 1, 0.5, 1.0)]},
        {"bins": [(0, 0, 0, 1, 1.0, 1.0)]},
        {"bins": [(0, 1, 0, 1, 1.0)]},
        {"bins": []},
        {"n": 0, "bins": [(0, 1, 0, 1, 1.0, 1.0)]},
        {"p_positive": 1.0, "bins": [(0, 1, 0, 1, 1.0, 1.0)]},
        {"example": "example3"},
    ],
)
def test_spec_errors(kw):
    with pytest.raises(SpecError):
        SynthSpec(**kw)


def test_spec_dispatch():
    assert dumps_dataset(gen_custom(SynthSpec("example1", 100, 3))) == dumps_dataset(gen_example1(100, 3))
