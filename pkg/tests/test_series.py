import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdegrowth import DiagnosticSeries, aitken, classify_tail, extrapolate_limit
from fdegrowth.series import geometric_grid


def series(values, t=None, **kw):
    values = np.asarray(values, dtype=float)
    t = np.arange(1.0, len(values) + 1) if t is None else t
    return DiagnosticSeries("s", t, values, **kw)


@pytest.mark.parametrize("model", ["raw", "aitken", "log-fit"])
def test_constant_series_is_exact(model):
    est = extrapolate_limit(series(np.full(12, 0.75), t=geometric_grid(10, 1e3, 12)), model)
    assert est.estimate == 0.75
    assert est.uncertainty == pytest.approx(0.0, abs=1e-14)


def test_aitken_exact_on_geometric_sequence():
    L = 0.3679
    n = np.arange(1, 21)
    est = extrapolate_limit(series(L + 0.5**n), "aitken")
    assert est.estimate == pytest.approx(L, abs=1e-14)
    assert np.allclose(aitken(L + 0.5**n), L, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 0.9), st.floats(0.1, 3.0))
def test_aitken_exact_property(L, r, c):
    n = np.arange(1, 15)
    est = extrapolate_limit(series(L + c * r**n), "aitken")
    assert est.estimate == pytest.approx(L, abs=1e-9)


def test_log_fit_recovers_inverse_log_correction():
    t = geometric_grid(1e2, 1e5, 30)
    est = extrapolate_limit(DiagnosticSeries("s", t, 0.3679 + 0.8 / np.log(t)), "log-fit")
    assert abs(est.estimate - 0.3679) <= 1e-3


def test_log_fit_with_custom_basis_in_log_space():
    t = geometric_grid(10, 1e4, 25)
    v = np.sqrt(2 * t)
    vals = 0.5 * np.exp((1.0 + 0.3 * np.log(v)) / v)
    s = DiagnosticSeries("s", t, vals, basis={"a": 1 / v, "b": np.log(v) / v}, fit_log=True)
    assert extrapolate_limit(s, "log-fit").estimate == pytest.approx(0.5, rel=1e-10)


def test_non_contracting_tail_is_inconclusive():
    est = extrapolate_limit(series(np.arange(1.0, 11.0)), "aitken")
    assert est.status == "inconclusive" and est.uncertainty == math.inf
    assert not est.conclusive


def test_raw_and_tail_option():
    vals = 1 + 1 / np.arange(1.0, 21)
    est = extrapolate_limit(series(vals), "raw", tail=8)
    assert est.estimate == vals[-1] and est.samples == 8


def test_errors():
    with pytest.raises(ValueError, match="at least 6"):
        extrapolate_limit(series([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError, match="unknown extrapolation"):
        extrapolate_limit(series(np.ones(8)), "magic")
    with pytest.raises(ValueError):
        DiagnosticSeries("s", [2.0, 1.0], [1.0, 1.0])
    degenerate = DiagnosticSeries("d", [], [], marker="degenerate: C=0")
    assert degenerate.degenerate
    assert extrapolate_limit(degenerate).status == "inconclusive"


def test_nan_samples_inconclusive():
    vals = np.ones(8)
    vals[3] = np.nan
    assert extrapolate_limit(series(vals)).status == "inconclusive"


def test_classify_tail_rules():
    u = geometric_grid(1e3, 1e4, 20)
    assert classify_tail(np.full(20, 2.0)).verdict == "finite"
    assert classify_tail(u).verdict == "infinite"
    assert classify_tail(1 / u).verdict == "zero"
    tv = classify_tail(1.0 + 0.5**np.arange(20))
    assert tv.verdict == "finite" and tv.value == pytest.approx(1.0, abs=1e-9)
    assert classify_tail(np.log(u)).verdict == "infinite"  # slow but unbounded
    assert classify_tail(5 + 0.01 * np.log(u)).verdict == "inconclusive"
    assert classify_tail([1.0, 2.0]).verdict == "inconclusive"
    assert classify_tail([1.0, 3.0, 0.5, 4.0, 0.2]).verdict == "inconclusive"


def test_columns_include_log_scale():
    s = DiagnosticSeries("s", [1.0, 2.0], [3.0, 4.0], {"log_scale": [5.0, 6.0]})
    assert list(s.columns()) == ["t", "value", "log_scale"]
