import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from catdecoherence.decoherence import (attenuation_asymptotic, attenuation_engineered,
                                        attenuation_exact, attenuation_free,
                                        attenuation_from_components, attenuation_scaled,
                                        cat_components, cat_probability, decoherence_time,
                                        plateau_exponent, tau0)
from catdecoherence.model import CatParams, OscillatorParams
from catdecoherence.spreading import msd_driven_nodissip

UNIT = OscillatorParams(1.0, 1.0)
CAT = CatParams(d=4.0, sigma=1.0)

# root of s(t) d^2 / (8 sigma^2 (sigma^2 + s(t))) = 1 with s = t/2 (1 - sin 2t / 2t),
# computed once with mpmath.findroot at 30 digits
TAU_D_REFERENCE = 1.78882000599378864762968679474
# root of t (1 - sin 2t / 2t) = 1 at the same parameters
TAU_D_SCALED_REFERENCE = 1.2770979764185215189


# --- initial state ----------------------------------------------------------------

@pytest.mark.parametrize("d,sigma", [(4.0, 1.0), (0.5, 1.0), (10.0, 0.3)])
def test_probability_normalised(d, sigma):
    cat = CatParams(d=d, sigma=sigma)
    lim = d + 10 * sigma
    total, _ = quad(lambda x: cat_probability(x, cat), -lim, lim, points=[-d / 2, d / 2],
                    epsabs=0, epsrel=1e-13, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(0.1, 10), st.floats(0.2, 3))
def test_probability_symmetric(x, d, sigma):
    cat = CatParams(d=d, sigma=sigma)
    assert cat_probability(x, cat) == cat_probability(-x, cat)


def test_components_identity_at_origin():
    p1, p2, pi = cat_components(0.0, CAT)
    assert attenuation_from_components(p1, p2, pi) == pytest.approx(1.0, rel=1e-15)
    x = np.linspace(-6, 6, 13)
    p1, p2, pi = cat_components(x, CAT)
    assert np.allclose(p1 + p2 + pi, cat_probability(x, CAT), rtol=1e-14)
    assert np.allclose(attenuation_from_components(p1, p2, pi), 1.0, rtol=1e-14)


# --- attenuation laws -------------------------------------------------------------

def test_engineered_examples():
    assert attenuation_engineered(0.0, CAT, 0.0).a == 1.0
    assert attenuation_engineered(1.0, CAT, 1.0).a == pytest.approx(math.exp(-1), rel=1e-15)
    assert attenuation_engineered(1.0, CAT, 1e300).a == pytest.approx(math.exp(-2), rel=1e-14)
    with pytest.raises(ValueError):
        attenuation_engineered(1.0, CAT, -1.0)


def test_free_examples():
    assert attenuation_free(0.0, CAT, 0.0, 1.0).a == 1.0
    assert attenuation_free(1.0, CAT, 1.0, 2.0).a == pytest.approx(math.exp(-1), rel=1e-15)
    big = 1e8
    assert attenuation_free(1.0, CAT, big, big + 1.0).a == pytest.approx(math.exp(-2), rel=1e-7)


def test_tau0_examples():
    assert tau0(UNIT, CAT, 1.0) == 1.0
    assert tau0(UNIT, CatParams(d=8.0), 1.0) == 0.25
    assert tau0(UNIT, CAT, 2.0) == 0.5
    with pytest.raises(ValueError):
        tau0(UNIT, CAT, 0.0)


def test_scaled_examples():
    t = math.pi
    assert attenuation_scaled(t, UNIT, CAT, 1.0).a == pytest.approx(math.exp(-math.pi), rel=1e-14)
    # end of the first cycle: sin(2 w0 t) vanishes
    assert attenuation_scaled(t, UNIT, CAT, 1.0).a == pytest.approx(
        attenuation_asymptotic(t, UNIT, CAT, 1.0, "long_time").a, rel=1e-15)


@pytest.mark.parametrize("x", [0.1, 0.05, 0.01])
def test_small_time_law(x):
    t = x / 2.0
    scaled = attenuation_scaled(t, UNIT, CAT, 1.0).a
    small = attenuation_asymptotic(t, UNIT, CAT, 1.0, "small_time").a
    assert small == pytest.approx(scaled, rel=1e-2)


def test_small_time_series_consistency():
    t = 0.025  # 2 w0 t = 0.05
    scaled = attenuation_scaled(t, UNIT, CAT, 1.0).exponent
    small = attenuation_asymptotic(t, UNIT, CAT, 1.0, "small_time").exponent
    assert small / scaled == pytest.approx(1.0, abs=1e-3)
    assert attenuation_asymptotic(0.0, UNIT, CAT, 1.0, "small_time").a == 1.0


def test_long_time_bound():
    t = 3 * math.pi + 0.4  # 2 w0 t beyond 6 pi
    x = 2 * t
    scaled = attenuation_scaled(t, UNIT, CAT, 1.0).exponent
    long = attenuation_asymptotic(t, UNIT, CAT, 1.0, "long_time").exponent
    assert abs(scaled - long) / long <= 1.0 / x
    with pytest.raises(ValueError):
        attenuation_asymptotic(t, UNIT, CAT, 1.0, "medium")


def test_every_law_starts_coherent():
    for law in (attenuation_exact(0.0, UNIT, CAT, 1.0), attenuation_scaled(0.0, UNIT, CAT, 1.0),
                attenuation_asymptotic(0.0, UNIT, CAT, 1.0, "long_time"),
                attenuation_free(0.0, CAT, 0.0, 1.0)):
        assert law.a == 1.0


# --- invariants ----------------------------------------------------------------------

def test_monotone_decay_and_plateau():
    t = np.linspace(0, 200, 20001)
    exponent = attenuation_exact(t, UNIT, CAT, 1.0).exponent
    assert np.all(np.diff(exponent) >= -1e-12)
    assert np.all(attenuation_exact(t, UNIT, CAT, 1.0).a >= math.exp(-plateau_exponent(CAT)))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1e6), st.floats(0.1, 20), st.floats(0.1, 20), st.floats(0.2, 3))
def test_separation_scaling(s_d, d, d2, sigma):
    e1 = attenuation_engineered(1.0, CatParams(d=d, sigma=sigma), s_d).exponent
    e2 = attenuation_engineered(1.0, CatParams(d=d2, sigma=sigma), s_d).exponent
    if s_d == 0:
        assert e1 == e2 == 0
    else:
        assert e1 / e2 == pytest.approx(d * d / (d2 * d2), rel=1e-12)


def test_scaled_matches_exact_when_spreading_small():
    t = np.linspace(1e-3, 0.3, 200)
    s_d = msd_driven_nodissip(t, UNIT, 1.0)
    assert np.all(s_d <= 0.01)
    exact = attenuation_exact(t, UNIT, CAT, 1.0).a
    scaled = attenuation_scaled(t, UNIT, CAT, 1.0).a
    assert np.allclose(scaled, exact, rtol=1e-2)


# --- decoherence time ----------------------------------------------------------------

def test_decoherence_time_reference():
    r = decoherence_time(UNIT, CAT, 1.0)
    assert r.status == "converged"
    assert r.tau0 == 1.0
    assert r.tau_d == pytest.approx(TAU_D_REFERENCE, rel=1e-9)
    assert r.tau_d_scaled == pytest.approx(TAU_D_SCALED_REFERENCE, rel=1e-9)
    assert attenuation_exact(r.tau_d, UNIT, CAT, 1.0).a == pytest.approx(math.exp(-1), rel=1e-9)


def test_never_decoheres():
    r = decoherence_time(UNIT, CatParams(d=2.0, sigma=1.0), 1.0)
    assert r.status == "never_decoheres"
    assert r.tau_d is None
    assert r.tau_d_scaled > 0


def test_decoherence_time_preconditions():
    with pytest.raises(ValueError):
        decoherence_time(UNIT, CAT, 0.0)
    with pytest.raises(ValueError):
        decoherence_time(OscillatorParams(1.0, 0.0), CAT, 1.0)


def test_separation_law_in_long_time_regime():
    # tau0 much longer than the oscillation period
    osc, g = UNIT, 1e-4
    a = decoherence_time(osc, CatParams(d=16.0), g).tau_d
    b = decoherence_time(osc, CatParams(d=32.0), g).tau_d
    assert a / b == pytest.approx(4.0, rel=0.05)


def test_linearised_separation_law():
    a = decoherence_time(UNIT, CatParams(d=4.0), 1e-3).tau_d_scaled
    b = decoherence_time(UNIT, CatParams(d=8.0), 1e-3).tau_d_scaled
    assert a / b == pytest.approx(4.0, rel=0.05)
