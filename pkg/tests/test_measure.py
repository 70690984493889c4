import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdegrowth import DelayMeasure, ValidationError, delay_moment, integrate_against, total_mass
from fdegrowth.measure import second_moment


def uniform(value=1.0, a=-1.0, b=0.0, tau=1.0):
    return DelayMeasure(tau, (), ((a, b, "constant", {"value": value}),))


def test_total_mass_examples():
    assert total_mass(DelayMeasure.dirac(0.0)) == 1.0
    assert total_mass(DelayMeasure(1.0, ((0.0, 1.0), (-1.0, 0.5)))) == 1.5
    assert total_mass(uniform(2.0)) == pytest.approx(2.0, rel=1e-12)


def test_delay_moment_examples():
    assert delay_moment(DelayMeasure.dirac(0.0)) == 0.0
    assert delay_moment(DelayMeasure(2.0, ((-2.0, 1.0),))) == 2.0
    assert delay_moment(uniform()) == pytest.approx(0.5, rel=1e-12)
    assert second_moment(uniform()) == pytest.approx(1 / 3, rel=1e-12)


def test_integrate_against_examples():
    m = DelayMeasure(1.0, ((0.0, 1.0), (-1.0, 1.0)))
    assert integrate_against(m, np.exp) == pytest.approx(1 + math.exp(-1), rel=1e-14)
    assert integrate_against(uniform(), lambda s: s**2) == pytest.approx(1 / 3, rel=1e-12)


def test_density_kinds():
    lin = DelayMeasure(1.0, (), ((-1.0, 0.0, "linear", {"c0": 1.0, "c1": -1.0}),))
    assert total_mass(lin) == pytest.approx(1.5, rel=1e-12)
    ex = DelayMeasure(1.0, (), ((-1.0, 0.0, "exponential", {"c": 1.0, "k": 1.0}),))
    assert total_mass(ex) == pytest.approx(1 - math.exp(-1), rel=1e-12)
    ap = DelayMeasure(2.0, (), ((-2.0, 0.0, "abs-power", {"c": 1.0, "p": 2.0}),))
    assert total_mass(ap) == pytest.approx(8 / 3, rel=1e-12)


def test_log_integrate_matches_direct_and_survives_huge_values():
    m = DelayMeasure(1.0, ((0.0, 1.0), (-0.5, 2.0)), ((-1.0, -0.5, "constant", {"value": 3.0}),))
    direct = integrate_against(m, lambda s: np.exp(2 * s))
    assert m.log_integrate(lambda s: 2 * np.asarray(s)) == pytest.approx(math.log(direct), rel=1e-12)
    # exp(1e4 + s) overflows; the log form must not
    big = m.log_integrate(lambda s: 1e4 + np.asarray(s))
    assert big == pytest.approx(1e4 + math.log(integrate_against(m, np.exp)), rel=1e-14)


@pytest.mark.parametrize(
    "kwargs, needle",
    [
        ({"tau": 1.0, "atoms": ((-2.0, 1.0),)}, "atom 0"),
        ({"tau": 1.0, "atoms": ((0.0, 1.0), (-0.5, -1.0))}, "atom 1"),
        ({"tau": 1.0, "atoms": ((0.0, 0.0),)}, "non-positive weight"),
        ({"tau": -1.0, "atoms": ((0.0, 1.0),)}, "tau"),
        ({"tau": 1.0, "density_pieces": ((-0.5, -0.5, "constant", {}),)}, "nonempty"),
        ({"tau": 1.0, "density_pieces": ((-1.0, 0.0, "linear", {"c0": -1.0, "c1": 0.0}),)}, "negative"),
        ({"tau": 1.0, "density_pieces": ((-1.0, -0.2, "constant", {}), (-0.5, 0.0, "constant", {}))}, "overlap"),
        ({"tau": 1.0, "density_pieces": ((-1.0, 0.0, "wavelet", {}),)}, "unknown kind"),
        ({"tau": 1.0}, "total mass"),
    ],
)
def test_validation_rejects(kwargs, needle):
    with pytest.raises(ValidationError, match=needle):
        DelayMeasure(**kwargs)


def test_measure_is_immutable():
    m = DelayMeasure.dirac(-1.0)
    with pytest.raises(AttributeError):
        m.tau = 3.0


# --- properties --------------------------------------------------------------

weights = st.floats(0.01, 10.0)
locations = st.floats(-1.0, 0.0)
atom_lists = st.lists(st.tuples(locations, weights), min_size=1, max_size=5)
smooth = [np.exp, np.cos, lambda s: 1 + s**2, lambda s: np.sqrt(1 - s)]


@st.composite
def measures(draw):
    atoms = draw(atom_lists)
    pieces = ()
    if draw(st.booleans()):
        a = draw(st.floats(-1.0, -0.1))
        b = draw(st.floats(a + 0.05, 0.0))
        pieces = ((a, b, "linear", {"c0": draw(weights), "c1": draw(st.floats(-1.0, 0.0))}),)
    return DelayMeasure(1.0, tuple(atoms), pieces)


@settings(max_examples=40, deadline=None)
@given(measures(), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(range(4)), st.sampled_from(range(4)))
def test_linearity(m, a, b, i, j):
    g, h = smooth[i], smooth[j]
    lhs = integrate_against(m, lambda s: a * g(s) + b * h(s))
    rhs = a * integrate_against(m, g) + b * integrate_against(m, h)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(measures(), st.sampled_from(range(4)))
def test_positivity(m, i):
    assert integrate_against(m, lambda s: smooth[i](s) ** 2) >= 0.0


@settings(max_examples=40, deadline=None)
@given(measures())
def test_consistency(m):
    assert integrate_against(m, np.ones_like) == pytest.approx(total_mass(m), rel=1e-12)
    assert integrate_against(m, np.abs) == pytest.approx(delay_moment(m), rel=1e-12)
    assert 0.0 <= delay_moment(m) <= m.tau * total_mass(m) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(atom_lists, st.floats(0.1, 10.0))
def test_scaling(atoms, c):
    m = DelayMeasure(1.0, tuple(atoms))
    mc = DelayMeasure(1.0, tuple((loc, c * w) for loc, w in atoms))
    assert total_mass(mc) == pytest.approx(c * total_mass(m), rel=1e-12)
