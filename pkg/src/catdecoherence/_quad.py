"""Thin wrapper over :func:`scipy.integrate.quad` that raises on failure."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from scipy import integrate


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadControls:
    epsabs: float = 1e-10
    epsrel: float = 1e-8
    limit: int = 2000


def quad(f, a, b, controls: QuadControls = QuadControls(), **kwargs):
    """Integrate ``f`` over ``[a, b]``; return ``(value, abserr)``.

    Any :class:`scipy.integrate.IntegrationWarning` is promoted to
    :class:`QuadratureError`.
    """
    if a == b:
        return 0.0, 0.0
    kwargs.setdefault("limit", controls.limit)
    if "weight" in kwargs and b == float("inf"):
        # QAWF takes its own cycle budget; ``limit`` still bounds each cycle.
        kwargs.setdefault("limlst", 200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(f, a, b, epsabs=controls.epsabs,
                                        epsrel=controls.epsrel, **kwargs)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from None
    return value, err


def quad_pieces(f, edges, controls: QuadControls = QuadControls(), **kwargs):
    """Sum of :func:`quad` over consecutive intervals given by ``edges``."""
    total = 0.0
    total_err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = quad(f, a, b, controls, **kwargs)
        total += value
        total_err += err
    return total, total_err
