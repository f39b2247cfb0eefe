"""Attenuation of the interference term of a two-packet superposition.

The attenuation coefficient ``a(t)`` is the interference amplitude divided by
twice the geometric mean of the two packet densities; ``a = 1`` is full
coherence.  Under an engineered white-noise force in the undamped,
zero-temperature limit

    a(t) = exp{-s_d d^2 / (8 sigma^2 (sigma^2 + s_d))}

with ``s_d`` the driven mean-square displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .model import CatParams, OscillatorParams, Units
from .spreading import msd_driven_nodissip, one_minus_sinc


@dataclass(frozen=True)
class AttenuationPoint:
    time: float
    exponent: float

    @property
    def a(self):
        return np.exp(-self.exponent)


@dataclass(frozen=True)
class DecoherenceTimes:
    """``tau0`` is the linear-regime scale time.  ``tau_d`` is the first
    time at which ``a = 1/e`` under the exact exponent, or ``None`` when the
    plateau ``exp(-d^2/8 sigma^2)`` stays above ``1/e``.  ``tau_d_scaled`` is the
    same crossing for the linearised (``s_d << sigma^2``) law."""

    tau0: float
    tau_d: Optional[float]
    tau_d_scaled: Optional[float] = None

    @property
    def status(self) -> str:
        return "converged" if self.tau_d is not None else "never_decoheres"


def _point(t, exponent) -> AttenuationPoint:
    exponent = np.asarray(exponent, dtype=float)
    t = np.asarray(t, dtype=float)
    return AttenuationPoint(time=t[()] if t.ndim == 0 else t,
                            exponent=exponent[()] if exponent.ndim == 0 else exponent)


# --- initial state ---------------------------------------------------------------

def _packets(x, cat: CatParams):
    x = np.asarray(x, dtype=float)
    s, d = cat.sigma, cat.d
    norm = 1.0 / ((8.0 * math.pi * s * s) ** 0.25
                  * math.sqrt(1.0 + math.exp(-d * d / (8.0 * s * s))))
    e1 = np.exp(-(x - 0.5 * d) ** 2 / (4.0 * s * s))
    e2 = np.exp(-(x + 0.5 * d) ** 2 / (4.0 * s * s))
    return norm * e1, norm * e2


def cat_amplitude(x, cat: CatParams):
    """Real wave function of the symmetric two-packet superposition at t=0."""
    p1, p2 = _packets(x, cat)
    return p1 + p2


def cat_probability(x, cat: CatParams, units: Units = Units()):
    """``|psi(x, 0)|^2``; normalised to one."""
    return cat_amplitude(x, cat) ** 2


def cat_components(x, cat: CatParams):
    """``(P1, P2, P_I)`` at t=0: the two packet densities and the
    interference term, with ``P1 + P2 + P_I = |psi|^2``."""
    p1, p2 = _packets(x, cat)
    return p1 * p1, p2 * p2, 2.0 * p1 * p2


def attenuation_from_components(p1, p2, p_int):
    return p_int / (2.0 * np.sqrt(p1 * p2))


# --- attenuation laws -----------------------------------------------------------

def plateau_exponent(cat: CatParams) -> float:
    return cat.d ** 2 / (8.0 * cat.sigma ** 2)


def attenuation_engineered(t, cat: CatParams, s_d) -> AttenuationPoint:
    """Exact law for the undamped, zero-temperature engineered force."""
    s_d = np.asarray(s_d, dtype=float)
    if np.any(s_d < 0):
        raise ValueError("s_d must be >= 0")
    sig2 = cat.sigma ** 2
    return _point(t, s_d * cat.d ** 2 / (8.0 * sig2 * (sig2 + s_d)))


def attenuation_free(t, cat: CatParams, s0, w2) -> AttenuationPoint:
    """Free-particle law ``exp{-s_0 d^2 / (8 sigma^2 w^2)}``."""
    s0 = np.asarray(s0, dtype=float)
    if np.any(s0 < 0):
        raise ValueError("s0 must be >= 0")
    return _point(t, s0 * cat.d ** 2 / (8.0 * cat.sigma ** 2 * np.asarray(w2, dtype=float)))


def tau0(osc: OscillatorParams, cat: CatParams, g: float) -> float:
    """``16 sigma^4 m^2 w0^2 / (d^2 g)``."""
    if not g > 0:
        raise ValueError("tau0 requires g > 0")
    return 16.0 * cat.sigma ** 4 * osc.m ** 2 * osc.omega0 ** 2 / (cat.d ** 2 * g)


def attenuation_scaled(t, osc: OscillatorParams, cat: CatParams, g: float) -> AttenuationPoint:
    """Linearised law ``exp{-(t/tau0)(1 - sin(2 w0 t)/(2 w0 t))}``."""
    if not osc.omega0 > 0:
        raise ValueError("attenuation_scaled requires omega0 > 0")
    t = np.asarray(t, dtype=float)
    return _point(t, t / tau0(osc, cat, g) * one_minus_sinc(2.0 * osc.omega0 * t))


def attenuation_asymptotic(t, osc: OscillatorParams, cat: CatParams, g: float,
                           kind: str) -> AttenuationPoint:
    """``small_time``: ``exp{-g d^2 t^3 / (24 m^2 sigma^4)}``;
    ``long_time``: ``exp(-t/tau0)``."""
    t = np.asarray(t, dtype=float)
    if kind == "small_time":
        exponent = g * cat.d ** 2 * t ** 3 / (24.0 * osc.m ** 2 * cat.sigma ** 4)
    elif kind == "long_time":
        exponent = t / tau0(osc, cat, g)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return _point(t, exponent)


def attenuation_exact(t, osc: OscillatorParams, cat: CatParams, g: float) -> AttenuationPoint:
    """Exact law evaluated with the undamped driven MSD."""
    return attenuation_engineered(t, cat, msd_driven_nodissip(t, osc, g))


# --- decoherence time ------------------------------------------------------------

def _first_crossing(exponent, t_start: float, rtol: float, max_doublings: int = 400) -> float:
    hi = t_start
    for _ in range(max_doublings):
        if exponent(hi) >= 1.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the decoherence time")
    if exponent(hi) == 1.0:
        return hi
    return optimize.bisect(lambda x: exponent(x) - 1.0, 0.0, hi, xtol=1e-300, rtol=rtol,
                           maxiter=2000)


def decoherence_time(osc: OscillatorParams, cat: CatParams, g: float,
                     rtol: float = 1e-10) -> DecoherenceTimes:
    """Smallest ``t`` with ``a(t) <= 1/e``.

    The exponent is nondecreasing in ``t`` (its derivative is proportional to
    ``g G(t)^2``) so the crossing is found by doubling an upper bracket and
    bisecting from zero.
    """
    if not g > 0:
        raise ValueError("decoherence_time requires g > 0")
    if not osc.omega0 > 0:
        raise ValueError("decoherence_time requires omega0 > 0")
    t0 = tau0(osc, cat, g)
    start = min(t0, 1.0 / osc.omega0)

    def exact(t):
        return float(attenuation_exact(t, osc, cat, g).exponent)

    def scaled(t):
        return float(attenuation_scaled(t, osc, cat, g).exponent)

    tau_d = None
    if plateau_exponent(cat) > 1.0:
        tau_d = _first_crossing(exact, start, rtol)
    tau_scaled = _first_crossing(scaled, start, rtol)
    return DecoherenceTimes(tau0=t0, tau_d=tau_d, tau_d_scaled=tau_scaled)
