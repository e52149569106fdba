import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import simpson

from semitunnel.core import CoherentState, PhysicalSetup, TangentElements, coherent_amplitude, z_label

positive = st.floats(0.05, 20.0)


@given(positive, positive)
def test_scales_consistent(b, c):
    s = PhysicalSetup(b=b, c=c)
    assert s.hbar == pytest.approx(b * c, rel=1e-15)
    assert s.lam == pytest.approx(b / c, rel=1e-15)


def test_inconsistent_hbar_rejected():
    with pytest.raises(ValueError):
        PhysicalSetup(b=1.0, c=2.0, hbar=1.0)
    PhysicalSetup(b=0.5, c=0.5, hbar=0.25)


@pytest.mark.parametrize("field", ["v0", "a", "b", "c"])
@pytest.mark.parametrize("value", [0.0, -1.0, math.inf, math.nan])
def test_non_positive_parameters_rejected(field, value):
    with pytest.raises(ValueError):
        PhysicalSetup(**{field: value})


def test_p_tilde_derived():
    assert PhysicalSetup(v0=0.5).p_tilde == 1.0
    assert PhysicalSetup(v0=2.0).p_tilde == 2.0


def test_from_hbar():
    s = PhysicalSetup.from_hbar(0.25)
    assert (s.b, s.c, s.hbar) == (0.5, 0.5, 0.25)
    s = PhysicalSetup.from_hbar(2.0, lam=8.0)
    assert s.lam == pytest.approx(8.0)
    assert s.hbar == pytest.approx(2.0)


def test_z_label_examples():
    s = PhysicalSetup()
    assert z_label(CoherentState(0.0, 0.0, s)) == 0
    assert z_label(CoherentState(s.b, 0.0, s)) == pytest.approx(1 / math.sqrt(2))
    assert CoherentState(-60.0, 1.0, s).z == pytest.approx(complex(-60, 1) / math.sqrt(2))


@given(st.floats(-200, 200), st.floats(-10, 10), positive, positive)
def test_z_roundtrip(q, p, b, c):
    s = PhysicalSetup(b=b, c=c)
    back = CoherentState.from_z(CoherentState(q, p, s).z, s)
    assert back.q == pytest.approx(q, rel=1e-14, abs=1e-12)
    assert back.p == pytest.approx(p, rel=1e-14, abs=1e-12)


def test_peak_and_one_sigma():
    s = PhysicalSetup(b=0.7, c=0.7)
    st_ = CoherentState(3.0, 0.0, s)
    peak = abs(coherent_amplitude(3.0, st_))
    assert peak == pytest.approx(math.pi**-0.25 / math.sqrt(0.7), rel=1e-14)
    for x in (3.0 - 0.7, 3.0 + 0.7):
        assert abs(coherent_amplitude(x, st_)) ** 2 == pytest.approx(math.exp(-1) * peak**2, rel=1e-13)


@pytest.mark.parametrize("b", [0.1, 0.5, 1.0])
def test_norm_by_simpson(b):
    s = PhysicalSetup(b=b, c=b)
    st_ = CoherentState(-7.0, 1.3, s)
    x = np.linspace(st_.q - 12 * b, st_.q + 12 * b, 4001)
    assert simpson(np.abs(coherent_amplitude(x, st_)) ** 2, x=x) == pytest.approx(1.0, abs=1e-10)


@given(st.floats(-50, 50), st.floats(-5, 5), st.floats(0.01, 5.0))
def test_density_symmetric_about_q(q, p, d):
    st_ = CoherentState(q, p, PhysicalSetup(b=0.8, c=1.1))
    lo, hi = np.abs(coherent_amplitude([q - d, q + d], st_)) ** 2
    assert lo == pytest.approx(hi, rel=1e-12)


def test_tangent_complex():
    t = TangentElements(1.0, 2.0)
    assert t.complex == 1 + 2j
