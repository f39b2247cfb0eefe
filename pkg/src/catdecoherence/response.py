"""Linear response of the Ohmic-damped oscillator.

The response function is ``alpha(w) = 1 / (K - m w**2 - i m gamma w)`` and the
Green function ``G(t)`` is the displacement produced by a unit impulse at
``t = 0``.  ``G`` is available in closed form and, for ``gamma > 0``, by
numerical sine transform of ``Im alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import QuadControls, QuadratureError, quad, quad_pieces
from .model import BathParams, OscillatorParams, Regime, classify_regime

__all__ = ["SingularResponseError", "Omega1", "alpha", "im_alpha", "omega1",
           "green_closed", "green_numeric", "tail_bound", "QuadratureError"]


class SingularResponseError(ZeroDivisionError):
    """The response function was evaluated on one of its real-axis poles."""


def alpha(omega, osc: OscillatorParams, bath: BathParams):
    """Response function at real frequency ``omega`` (approached from above).

    Returns a complex number, or a complex array for array input.
    """
    w = np.asarray(omega, dtype=float)
    den = (osc.K - osc.m * w * w) - 1j * (osc.m * bath.gamma * w)
    if np.any(den == 0):
        raise SingularResponseError(
            f"alpha has a pole at omega={omega!r} for omega0={osc.omega0}, gamma={bath.gamma}")
    out = 1.0 / den
    return complex(out) if out.ndim == 0 else out


def im_alpha(omega, osc: OscillatorParams, bath: BathParams):
    """``Im alpha(omega)`` as a real expression (no complex division)."""
    w = np.asarray(omega, dtype=float)
    re = osc.K - osc.m * w * w
    im = osc.m * bath.gamma * w
    return im / (re * re + im * im)


@dataclass(frozen=True)
class Omega1:
    """Damped frequency tagged by regime.

    ``value`` is ``sqrt(omega0**2 - gamma**2/4)`` when underdamped, the decay
    rate ``kappa = sqrt(gamma**2/4 - omega0**2)`` when overdamped, and 0 at
    critical damping.
    """

    regime: Regime
    value: float

    @property
    def squared(self) -> float:
        """Signed ``omega1**2`` (negative on the hyperbolic branch)."""
        if self.regime is Regime.OVERDAMPED:
            return -self.value * self.value
        return self.value * self.value


def omega1(osc: OscillatorParams, bath: BathParams) -> Omega1:
    regime = classify_regime(osc, bath)
    half = 0.5 * bath.gamma
    if regime is Regime.CRITICAL:
        return Omega1(regime, 0.0)
    # (w0 - g/2)(w0 + g/2) avoids cancellation close to critical damping
    w1sq = (osc.omega0 - half) * (osc.omega0 + half)
    return Omega1(regime, math.sqrt(abs(w1sq)))


def green_closed(t, osc: OscillatorParams, bath: BathParams):
    """Closed-form Green function for ``t >= 0`` (vectorised over ``t``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("green_closed requires t >= 0")
    w1 = omega1(osc, bath)
    m, half = osc.m, 0.5 * bath.gamma
    if w1.regime is Regime.UNDERDAMPED:
        out = np.exp(-half * t) * np.sin(w1.value * t) / (m * w1.value)
    elif w1.regime is Regime.OVERDAMPED:
        k = w1.value
        # e^{-g t/2} sinh(k t) written without overflow for large k t
        out = np.exp(-(half - k) * t) * (-np.expm1(-2.0 * k * t)) / (2.0 * m * k)
    else:
        out = np.exp(-half * t) * t / m
    return out[()] if out.ndim == 0 else out


def green_numeric(t: float, osc: OscillatorParams, bath: BathParams,
                  quad_controls: QuadControls = QuadControls()) -> float:
    """Green function from ``(2/pi) * int_0^inf Im alpha(w) sin(w t) dw``.

    The finite part ``[0, w_c]`` is split around the resonance and
    integrated with a sine-weighted rule; the remainder uses a Fourier
    integral rule on ``[w_c, inf)``.
    """
    if not t > 0:
        raise ValueError("green_numeric requires t > 0")
    if not bath.gamma > 0:
        raise ValueError("green_numeric requires gamma > 0 for absolute integrability")
    w1 = omega1(osc, bath)
    g = bath.gamma
    w_c = max(10.0 * osc.omega0, 20.0 / t, 10.0 * g)
    edges = [0.0]
    if w1.regime is Regime.UNDERDAMPED:
        for w in (w1.value - 5.0 * g, w1.value + 5.0 * g):
            if edges[-1] < w < w_c:
                edges.append(w)
    edges.append(w_c)

    def f(w):
        return im_alpha(w, osc, bath)

    head, _ = quad_pieces(f, edges, quad_controls, weight="sin", wvar=t)
    tail, _ = quad(f, w_c, math.inf, quad_controls, weight="sin", wvar=t)
    return 2.0 / math.pi * (head + tail)


def tail_bound(t: float, osc: OscillatorParams, bath: BathParams) -> float:
    """Asymptotic magnitude of ``(2/pi) int_{w_c}^inf Im alpha dw`` from
    ``Im alpha ~ gamma / (m w**3)``; the tail itself is integrated, this is a
    scale for error reporting."""
    w_c = max(10.0 * osc.omega0, 20.0 / t, 10.0 * bath.gamma)
    return 2.0 / math.pi * bath.gamma / (2.0 * osc.m * w_c * w_c)

