"""Mean-square displacement of the oscillator coordinate.

``s(t) = <[x(t) - x(0)]**2>`` splits into a thermal part ``s_0`` produced by
the reservoir fluctuation force and a driven part ``s_d`` produced by the
engineered random force.  For delta-correlated driving of strength ``g``,

    s_d(t) = g * int_0^t G(t')**2 dt'

which is evaluated here in closed form, by quadrature, and (for general
force correlation kernels) as a double integral.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._quad import QuadControls, quad, quad_pieces
from .model import BathParams, CatParams, OscillatorParams, Regime, Units, classify_regime
from .response import green_closed, im_alpha, omega1

# Quadratures that serve as oracles for closed forms get tighter defaults.
ORACLE_QUAD = QuadControls(epsabs=0.0, epsrel=1e-13, limit=4000)
THERMAL_QUAD = QuadControls(epsabs=1e-12, epsrel=1e-10, limit=4000)

_SERIES_TERMS = 40


@dataclass(frozen=True)
class SpreadingResult:
    time: float
    s_d: float
    s_0: float

    @property
    def s_total(self) -> float:
        return self.s_d + self.s_0


# --- helpers ---------------------------------------------------------------

def one_minus_sinc(x):
    """``1 - sin(x)/x`` without cancellation near ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1.0
    xs = x[small]
    x2 = xs * xs
    # x^2/3! - x^4/5! + ... through x^16/17!
    acc = np.zeros_like(xs)
    for k in range(8, 0, -1):
        acc = x2 * (1.0 / math.factorial(2 * k + 1) - acc)
    out[small] = acc
    xl = x[~small]
    out[~small] = 1.0 - np.sin(xl) / xl
    return out[()] if out.ndim == 0 else out


def _green_taylor(osc: OscillatorParams, bath: BathParams, n: int = _SERIES_TERMS):
    """Taylor coefficients of G from ``G'' + gamma G' + omega0^2 G = 0``,
    ``G(0) = 0``, ``G'(0) = 1/m``."""
    c = np.zeros(n)
    c[1] = 1.0 / osc.m
    w0sq = osc.omega0 ** 2
    for k in range(n - 2):
        c[k + 2] = -(bath.gamma * (k + 1) * c[k + 1] + w0sq * c[k]) / ((k + 2) * (k + 1))
    return c


def _msd_driven_series(t, osc, bath, g):
    c = _green_taylor(osc, bath)
    n = c.size
    sq = np.convolve(c, c)[:n]
    # integrate term by term: coefficient of t^(k+1) is sq[k]/(k+1)
    integ = np.zeros(n + 1)
    integ[1:] = sq / np.arange(1, n + 1)
    return g * np.polynomial.polynomial.polyval(t, integ)


# --- driven part -------------------------------------------------------------

def msd_driven_closed(t, osc: OscillatorParams, bath: BathParams, g: float):
    """Driven mean-square displacement for white-noise forcing (closed form).

    Underdamped:
        g/(4 m^2 gamma w0^2 w1^2) * {(1 - e^{-gamma t}) 2 w1^2
                                     - e^{-gamma t}(gamma^2 sin^2 w1 t + gamma w1 sin 2 w1 t)}
    The overdamped branch continues ``w1 -> i kappa`` with real hyperbolic
    functions; near critical damping a short expansion in ``w1^2`` is used.
    Short times (``max(gamma, omega0) t <= 1``) use the Taylor series of
    ``int G^2`` to avoid cancellation between the O(1) terms.
    """
    if not bath.gamma > 0:
        raise ValueError("msd_driven_closed requires gamma > 0; use msd_driven_nodissip")
    if not osc.omega0 > 0:
        raise ValueError("msd_driven_closed requires omega0 > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    gam, m, w0 = bath.gamma, osc.m, osc.omega0
    out = np.empty_like(t)

    small = t * max(gam, w0) <= 1.0
    out[small] = _msd_driven_series(t[small], osc, bath, g)

    tl = t[~small]
    w1 = omega1(osc, bath)
    E = np.exp(-gam * tl)
    if w1.regime is Regime.UNDERDAMPED:
        w = w1.value
        e_sq = E * np.sin(w * tl) ** 2 / (w * w)          # e^{-gt} sin^2(w1 t)/w1^2
        e_tw = E * np.sin(2.0 * w * tl) / w                # e^{-gt} sin(2 w1 t)/w1
    elif w1.regime is Regime.OVERDAMPED:
        k = w1.value
        decay = np.exp(-(gam - 2.0 * k) * tl)
        e_sq = decay * np.expm1(-2.0 * k * tl) ** 2 / (4.0 * k * k)
        e_tw = decay * (-np.expm1(-4.0 * k * tl)) / (2.0 * k)
    else:
        w1sq = (w0 - 0.5 * gam) * (w0 + 0.5 * gam)
        u = w1sq * tl * tl
        s_u = 1.0 - u / 3.0 + 2.0 * u * u / 45.0 - u ** 3 / 315.0
        t_u = 1.0 - 2.0 * u / 3.0 + 2.0 * u * u / 15.0 - 4.0 * u ** 3 / 315.0
        e_sq = E * tl * tl * s_u
        e_tw = E * 2.0 * tl * t_u
    # braces divided by gamma*w1^2; (1-E)/gamma via expm1 stays finite as gamma -> 0
    braces = 2.0 * (-np.expm1(-gam * tl)) / gam - (gam * e_sq + e_tw)
    out[~small] = g / (4.0 * m * m * w0 * w0) * braces
    return out[()] if out.ndim == 0 else out


def msd_driven_nodissip(t, osc: OscillatorParams, g: float):
    """Undamped limit ``g t / (2 m^2 w0^2) * (1 - sin(2 w0 t)/(2 w0 t))``."""
    if not osc.omega0 > 0:
        raise ValueError("msd_driven_nodissip requires omega0 > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    w0 = osc.omega0
    out = g / (2.0 * osc.m ** 2 * w0 * w0) * t * one_minus_sinc(2.0 * w0 * t)
    return out[()] if np.ndim(out) == 0 else out


def msd_driven_saturation(osc: OscillatorParams, bath: BathParams, g: float) -> float:
    """Long-time plateau ``g / (2 m^2 gamma w0^2)`` of the damped driven MSD."""
    return g / (2.0 * osc.m ** 2 * bath.gamma * osc.omega0 ** 2)


def _green_zeros(t: float, osc, bath) -> list:
    w1 = omega1(osc, bath)
    if w1.regime is not Regime.UNDERDAMPED:
        return []
    period = math.pi / w1.value
    n = int(t / period)
    return [k * period for k in range(1, min(n, 500) + 1) if k * period < t]


def msd_driven_quadrature(t: float, osc: OscillatorParams, bath: BathParams, g: float,
                          quad_controls: QuadControls = ORACLE_QUAD) -> float:
    """``g * int_0^t G(t')^2 dt'`` by adaptive quadrature of the closed Green
    function, split at the zeros of ``G``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    edges = [0.0, *_green_zeros(t, osc, bath), float(t)]
    val, _ = quad_pieces(lambda s: green_closed(s, osc, bath) ** 2, edges, quad_controls)
    return g * val


# --- general correlation kernels --------------------------------------------

@dataclass(frozen=True)
class CorrelationKernel:
    """Force autocorrelation ``<f(t') f(t'')> = k(t' - t'')``.

    Build with :meth:`delta`, :meth:`exponential` or :meth:`tabulated`.
    """

    kind: str
    g: float = 0.0
    tau_c: float = 0.0
    lags: Optional[tuple] = None
    values: Optional[tuple] = None

    @classmethod
    def delta(cls, g: float) -> "CorrelationKernel":
        if g < 0:
            raise ValueError("delta strength g must be >= 0")
        return cls("delta", g=g)

    @classmethod
    def exponential(cls, g: float, tau_c: float) -> "CorrelationKernel":
        """``g/(2 tau_c) exp(-|lag|/tau_c)``; unit-normalised so its area is g."""
        if g < 0 or not tau_c > 0:
            raise ValueError("need g >= 0 and tau_c > 0")
        return cls("exponential", g=g, tau_c=tau_c)

    @classmethod
    def tabulated(cls, lags: Sequence[float], values: Sequence[float]) -> "CorrelationKernel":
        """Even kernel given on non-negative lags, linearly interpolated and
        zero beyond the last lag."""
        lags = tuple(float(x) for x in lags)
        values = tuple(float(x) for x in values)
        if len(lags) != len(values) or len(lags) < 2:
            raise ValueError("lags and values must have equal length >= 2")
        if lags[0] != 0.0 or any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must start at 0 and increase strictly")
        return cls("tabulated", lags=lags, values=values)

    def __call__(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        if self.kind == "exponential":
            return self.g / (2.0 * self.tau_c) * np.exp(-lag / self.tau_c)
        if self.kind == "tabulated":
            return np.interp(lag, self.lags, self.values, right=0.0)
        raise ValueError("a delta kernel has no pointwise values")

    def breakpoints(self, t: float) -> list:
        if self.kind == "exponential":
            pts = [self.tau_c * k for k in (1, 5, 20, 50)]
        elif self.kind == "tabulated":
            pts = list(self.lags[1:])
        else:
            pts = []
        return [p for p in pts if 0 < p < t]


def msd_driven_general(t: float, osc: OscillatorParams, bath: BathParams,
                       kernel: CorrelationKernel,
                       quad_controls: QuadControls = QuadControls(epsabs=1e-13, epsrel=1e-10)) -> float:
    """Driven MSD ``int_0^t int_0^t G(t-t')G(t-t'')k(t'-t'') dt' dt''``.

    The square is folded onto the lag axis: with the overlap integral
    ``R(tau) = int_tau^t G(u) G(u - tau) du`` the double integral becomes
    ``2 int_0^t k(tau) R(tau) d tau``, which keeps sharp kernels resolvable.
    A delta kernel reduces exactly to ``g * int_0^t G^2``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if kernel.kind == "delta":
        return msd_driven_quadrature(t, osc, bath, kernel.g)
    if t == 0:
        return 0.0

    def overlap(tau):
        val, _ = quad(lambda u: green_closed(u, osc, bath) * green_closed(u - tau, osc, bath),
                      tau, t, quad_controls)
        return val

    edges = [0.0, *kernel.breakpoints(t), float(t)]
    val, _ = quad_pieces(lambda tau: float(kernel(tau)) * overlap(tau), edges, quad_controls)
    return 2.0 * val


# --- thermal part ------------------------------------------------------------

def _coth_weight(w, osc, bath, units):
    """``Im alpha(w) * coth(hbar w / 2 kT)``, finite at ``w = 0``."""
    w = np.asarray(w, dtype=float)
    kT = units.kB * bath.temperature
    if kT == 0:
        return im_alpha(w, osc, bath)
    x = units.hbar * w / (2.0 * kT)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcothx = np.where(np.abs(x) < 1e-4, 1.0 + x * x / 3.0, x / np.tanh(x))
    # Im alpha / w is regular at w = 0
    re = osc.K - osc.m * w * w
    im = osc.m * bath.gamma * w
    return osc.m * bath.gamma / (re * re + im * im) * (2.0 * kT / units.hbar) * xcothx


def _thermal_edges(osc, bath, t=None):
    w0, gam = osc.omega0, bath.gamma
    w_c = max(10.0 * w0, 10.0 * gam, 20.0 / t if t else 0.0)
    edges = [0.0, w0 / 100.0]
    w1 = omega1(osc, bath)
    if w1.regime is Regime.UNDERDAMPED:
        for w in (w1.value - 5.0 * gam, w1.value, w1.value + 5.0 * gam):
            if edges[-1] < w < w_c:
                edges.append(w)
    edges.append(w_c)
    return edges


def _check_thermal(osc, bath):
    if not bath.gamma > 0:
        raise ValueError("thermal quadrature requires gamma > 0")
    if not osc.omega0 > 0:
        raise ValueError("thermal quadrature requires omega0 > 0")


def thermal_correlation(t: float, osc: OscillatorParams, bath: BathParams,
                        units: Units = Units(),
                        quad_controls: QuadControls = THERMAL_QUAD) -> float:
    """Symmetrised equilibrium correlation
    ``C_0(t) = (hbar/pi) int_0^inf Im alpha(w) coth(hbar w/2kT) cos(w t) dw``."""
    _check_thermal(osc, bath)
    t = abs(float(t))

    def f(w):
        return _coth_weight(w, osc, bath, units)

    edges = _thermal_edges(osc, bath, t or None)
    if t == 0:
        head, _ = quad_pieces(f, edges, quad_controls)
        tail, _ = quad(f, edges[-1], math.inf, quad_controls)
    else:
        head, _ = quad_pieces(f, edges, quad_controls, weight="cos", wvar=t)
        tail, _ = quad(f, edges[-1], math.inf, quad_controls, weight="cos", wvar=t)
    return units.hbar / math.pi * (head + tail)


def msd_thermal(t: float, osc: OscillatorParams, bath: BathParams,
                units: Units = Units(), form: str = "direct",
                quad_controls: QuadControls = THERMAL_QUAD) -> float:
    """Thermal mean-square displacement ``s_0(t)``.

    ``form="direct"`` integrates ``(2 hbar/pi) Im alpha coth (1 - cos w t)``
    with the ``1 - cos`` factor written as ``2 sin^2(w t/2)``;
    ``form="correlation"`` returns ``2 (C_0(0) - C_0(t))``.
    """
    _check_thermal(osc, bath)
    t = abs(float(t))
    if t == 0:
        return 0.0
    if form == "correlation":
        return 2.0 * (thermal_correlation(0.0, osc, bath, units, quad_controls)
                      - thermal_correlation(t, osc, bath, units, quad_controls))
    if form != "direct":
        raise ValueError(f"unknown form {form!r}")

    def f(w):
        return _coth_weight(w, osc, bath, units) * 2.0 * np.sin(0.5 * w * t) ** 2

    edges = _thermal_edges(osc, bath, t)
    # one panel per oscillation keeps the adaptive rule from aliasing
    period = 2.0 * math.pi / t
    w_c = edges[-1]
    fine = sorted(set(edges) | {k * period for k in range(1, int(w_c / period) + 1)
                                if k * period < w_c})
    head, _ = quad_pieces(f, fine, quad_controls)
    # beyond w_c: int h - int h cos(w t), both absolutely convergent
    g = lambda w: _coth_weight(w, osc, bath, units)
    flat, _ = quad(g, w_c, math.inf, quad_controls)
    osc_tail, _ = quad(g, w_c, math.inf, quad_controls, weight="cos", wvar=t)
    return 2.0 * units.hbar / math.pi * (head + flat - osc_tail)


def msd_thermal_undamped(t, osc: OscillatorParams, bath: BathParams, units: Units = Units()):
    """``gamma -> 0`` limit of ``s_0``:
    ``(hbar/(m w0)) coth(hbar w0/2kT) (1 - cos w0 t)``."""
    if not osc.omega0 > 0:
        raise ValueError("msd_thermal_undamped requires omega0 > 0")
    t = np.asarray(t, dtype=float)
    w0 = osc.omega0
    kT = units.kB * bath.temperature
    coth = 1.0 if kT == 0 else 1.0 / math.tanh(units.hbar * w0 / (2.0 * kT))
    out = units.hbar / (osc.m * w0) * coth * 2.0 * np.sin(0.5 * w0 * t) ** 2
    return out[()] if out.ndim == 0 else out


def msd_total(t: float, osc: OscillatorParams, bath: BathParams, g: float,
              units: Units = Units()) -> SpreadingResult:
    """Thermal plus driven MSD.  ``gamma = 0`` uses the undamped limits of
    both parts."""
    if bath.gamma > 0:
        s_d = float(msd_driven_closed(t, osc, bath, g))
        s_0 = msd_thermal(t, osc, bath, units)
    else:
        s_d = float(msd_driven_nodissip(t, osc, g))
        s_0 = float(msd_thermal_undamped(t, osc, bath, units))
    return SpreadingResult(time=float(t), s_d=s_d, s_0=s_0)


# --- free particle -------------------------------------------------------------

def free_packet_width(t, osc: OscillatorParams, cat: CatParams, s0,
                      units: Units = Units(), commutator: str = "dissipationless"):
    """Squared width ``sigma^2 + (hbar t)^2/(4 m^2 sigma^2) + s_0`` of a free
    packet.  Only the dissipationless commutator ``[x(t1), x(t1+t)] = i hbar t/m``
    is supported."""
    if commutator != "dissipationless":
        raise NotImplementedError("only the dissipationless commutator is implemented")
    if osc.omega0 != 0:
        raise ValueError("free_packet_width requires omega0 = 0")
    t = np.asarray(t, dtype=float)
    sig2 = cat.sigma ** 2
    out = sig2 + (units.hbar * t) ** 2 / (4.0 * osc.m ** 2 * sig2) + np.asarray(s0, dtype=float)
    return out[()] if out.ndim == 0 else out


# --- grid evaluation -----------------------------------------------------------

def on_grid(func: Callable[[float], float], times, workers: Optional[int] = None) -> np.ndarray:
    """Evaluate a pointwise function on ``times``; results are independent of
    ``workers`` because each point is computed in isolation."""
    times = [float(x) for x in np.atleast_1d(times)]
    if not workers or workers <= 1:
        return np.array([func(x) for x in times], dtype=float)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(func, times, chunksize=16)), dtype=float)
