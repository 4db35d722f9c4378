import numpy as np
import pytest

from bendroc.pipeline import METHODS, PipelineSettings, Summary, cross_validate
from bendroc.synth import gen_example1


def test_cross_validate_example1():
    d = gen_example1(4000, 2)
    summary, results = cross_validate(d, PipelineSettings(equal_variance=True), folds=4, seed=1)
    assert len(results) == 4
    assert summary.mean("oer") > summary.mean("fixed")
    assert set(results[0].aucs) == set(METHODS)
    for r in results:
        assert r.curves["oer"].anchored and np.all(np.diff(r.curves["oer"].tpr) >= 0)
    doc = summary.as_dict()
    assert doc["folds"] == 4 and doc["sign_test_wins"] == summary.wins


def test_repeatable():
    d = gen_example1(2000, 2)
    a, _ = cross_validate(d, PipelineSettings(equal_variance=True), folds=3, seed=5)
    b, _ = cross_validate(d, PipelineSettings(equal_variance=True), folds=3, seed=5)
    assert a.as_dict() == b.as_dict()


def test_summary_arithmetic():
    folds = [{m: 0.8 for m in METHODS} | {"oer": 0.9} for _ in range(10)]
    s = Summary(folds)
    assert s.delta == pytest.approx(0.1)
    assert s.relative_error_reduction == pytest.approx(0.5)
    assert s.wins == 10
    assert s.sign_test_p == pytest.approx(2.0**-10)


def test_settings_validation():
    with pytest.raises(ValueError):
        PipelineSettings(features=(0, 1), bins=(4,))
    with pytest.raises(ValueError):
        PipelineSettings(strategy="kmeans")
    with pytest.raises(ValueError):
        cross_validate(gen_example1(50, 0), PipelineSettings(), folds=1)
