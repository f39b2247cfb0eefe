"""Parameter types, unit conventions and validation.

Quantities are expressed in natural units with ``hbar = kB = 1`` unless a
:class:`Units` instance overrides them.  A free particle is represented by an
oscillator with ``omega0 = 0``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

CRITICAL_RTOL = 1e-8


class ParameterError(ValueError):
    """A parameter violates one of its invariants.

    ``field`` names the offending parameter.
    """

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ParameterError(name, message)


def _finite(name: str, value: float) -> None:
    _require(math.isfinite(value), name, f"{name} must be finite")


class Regime(str, enum.Enum):
    UNDERDAMPED = "underdamped"
    CRITICAL = "critical"
    OVERDAMPED = "overdamped"


@dataclass(frozen=True)
class Units:
    hbar: float = 1.0
    kB: float = 1.0

    def validate(self) -> "Units":
        for name in ("hbar", "kB"):
            value = getattr(self, name)
            _finite(name, value)
            _require(value > 0, name, f"{name} must be > 0")
        return self


@dataclass(frozen=True)
class OscillatorParams:
    m: float = 1.0
    omega0: float = 1.0

    @property
    def K(self) -> float:
        """Force constant ``m * omega0**2``."""
        return self.m * self.omega0 * self.omega0

    @property
    def is_free(self) -> bool:
        return self.omega0 == 0.0

    def validate(self) -> "OscillatorParams":
        _finite("m", self.m)
        _require(self.m > 0, "m", "m must be > 0")
        _finite("omega0", self.omega0)
        _require(self.omega0 >= 0, "omega0", "omega0 must be >= 0")
        return self


@dataclass(frozen=True)
class BathParams:
    """Ohmic reservoir: constant damping rate and temperature."""

    gamma: float = 0.0
    temperature: float = 0.0

    def validate(self) -> "BathParams":
        _finite("gamma", self.gamma)
        _require(self.gamma >= 0, "gamma", "gamma must be >= 0")
        _finite("temperature", self.temperature)
        _require(self.temperature >= 0, "temperature", "temperature must be >= 0")
        return self


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * np.asarray(t) + self.phase)


@dataclass(frozen=True)
class Constant:
    amplitude: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.amplitude)


Deterministic = Union[Sinusoid, Constant]


@dataclass(frozen=True)
class DriveParams:
    """Engineered force: white noise of intensity ``g`` plus an optional
    deterministic part.

    ``g`` has units of force**2 * time, so that
    ``<f(t') f(t'')> = g * delta(t' - t'')``.
    """

    g: float = 0.0
    deterministic: Optional[Deterministic] = None

    def force(self, t):
        """Deterministic part of the drive at time ``t`` (zero if absent)."""
        if self.deterministic is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.deterministic(t)

    def validate(self) -> "DriveParams":
        _finite("g", self.g)
        _require(self.g >= 0, "g", "g must be >= 0")
        det = self.deterministic
        if det is not None:
            _require(isinstance(det, (Sinusoid, Constant)), "deterministic",
                     "deterministic drive must be a Sinusoid or Constant")
            for f in dataclasses.fields(det):
                _finite(f.name, getattr(det, f.name))
        return self


@dataclass(frozen=True)
class CatParams:
    d: float = 4.0
    sigma: float = 1.0

    def validate(self) -> "CatParams":
        _finite("d", self.d)
        _require(self.d > 0, "d", "d must be > 0")
        _finite("sigma", self.sigma)
        _require(self.sigma > 0, "sigma", "sigma must be > 0")
        return self


@dataclass(frozen=True)
class TimeGrid:
    t_max: float = 10.0
    n_steps: int = 1000

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * (self.t_max / self.n_steps)

    def validate(self) -> "TimeGrid":
        _finite("t_max", self.t_max)
        _require(self.t_max > 0, "t_max", "t_max must be > 0")
        _require(int(self.n_steps) == self.n_steps and self.n_steps >= 1,
                 "n_steps", "n_steps must be an integer >= 1")
        return self


@dataclass
class CurveTable:
    """Sampled time series with named value columns and optional standard
    errors (stored under the same name as the value column)."""

    time: np.ndarray
    columns: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        if self.time.ndim != 1:
            raise ValueError("time must be one-dimensional")
        if self.time.size > 1 and not np.all(np.diff(self.time) > 0):
            raise ValueError("time must be strictly increasing")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        self.stderr = {k: np.asarray(v, dtype=float) for k, v in self.stderr.items()}
        for name, col in {**self.columns, **self.stderr}.items():
            if col.shape != self.time.shape:
                raise ValueError(f"column {name!r} has length {col.size}, "
                                 f"expected {self.time.size}")
        unknown = set(self.stderr) - set(self.columns)
        if unknown:
            raise ValueError(f"standard errors without values: {sorted(unknown)}")

    def header(self) -> list:
        names = ["t"]
        for name in self.columns:
            names.append(name)
            if name in self.stderr:
                names.append(f"{name}_se")
        return names

    def rows(self):
        cols = [self.time]
        for name, col in self.columns.items():
            cols.append(col)
            if name in self.stderr:
                cols.append(self.stderr[name])
        return zip(*cols)


@dataclass(frozen=True)
class Params:
    """Full parameter bundle shared by the computational modules."""

    osc: OscillatorParams = field(default_factory=OscillatorParams)
    bath: BathParams = field(default_factory=BathParams)
    drive: DriveParams = field(default_factory=DriveParams)
    cat: CatParams = field(default_factory=CatParams)
    grid: TimeGrid = field(default_factory=TimeGrid)
    units: Units = field(default_factory=Units)
    seed: int = 42

    @property
    def regime(self) -> Regime:
        return classify_regime(self.osc, self.bath)


def classify_regime(osc: OscillatorParams, bath: BathParams) -> Regime:
    two_w0 = 2.0 * osc.omega0
    if abs(bath.gamma - two_w0) <= CRITICAL_RTOL * osc.omega0:
        return Regime.CRITICAL
    return Regime.UNDERDAMPED if bath.gamma < two_w0 else Regime.OVERDAMPED


def validate(params: Params) -> Params:
    """Check every invariant of ``params`` and return it unchanged.

    Raises :class:`ParameterError` naming the first offending field.
    """
    params.osc.validate()
    params.bath.validate()
    params.drive.validate()
    params.cat.validate()
    params.grid.validate()
    params.units.validate()
    _require(isinstance(params.seed, (int, np.integer)) and 0 <= params.seed < 2**64,
             "seed", "seed must be an integer in [0, 2**64)")
    return params


# --- key=value configuration -------------------------------------------------

CONFIG_KEYS = ("m", "omega0", "gamma", "temperature", "g", "d", "sigma",
               "t_max", "n_steps", "hbar", "kB", "seed")
_INT_KEYS = {"n_steps", "seed"}


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines with ``#`` comments into a typed dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError("config", f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParameterError(key, f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ParameterError(key, f"line {lineno}: bad value for {key}: {value!r}") from None
    return values


def load_config(path: Union[str, Path]) -> dict:
    return parse_config(Path(path).read_text())


def format_config(values: Mapping[str, float]) -> str:
    """Inverse of :func:`parse_config`; floats are written with ``repr`` so
    they round-trip exactly."""
    lines = []
    for key in CONFIG_KEYS:
        if key in values:
            lines.append(f"{key}={values[key]!r}")
    return "\n".join(lines) + "\n"


def params_from_mapping(values: Mapping[str, float],
                        deterministic: Optional[Deterministic] = None) -> Params:
    v = dict(values)
    return Params(
        osc=OscillatorParams(m=v.get("m", 1.0), omega0=v.get("omega0", 1.0)),
        bath=BathParams(gamma=v.get("gamma", 0.0), temperature=v.get("temperature", 0.0)),
        drive=DriveParams(g=v.get("g", 0.0), deterministic=deterministic),
        cat=CatParams(d=v.get("d", 4.0), sigma=v.get("sigma", 1.0)),
        grid=TimeGrid(t_max=v.get("t_max", 10.0), n_steps=int(v.get("n_steps", 1000))),
        units=Units(hbar=v.get("hbar", 1.0), kB=v.get("kB", 1.0)),
        seed=int(v.get("seed", 42)),
    )


def params_to_mapping(params: Params) -> dict:
    return {
        "m": params.osc.m, "omega0": params.osc.omega0,
        "gamma": params.bath.gamma, "temperature": params.bath.temperature,
        "g": params.drive.g, "d": params.cat.d, "sigma": params.cat.sigma,
        "t_max": params.grid.t_max, "n_steps": params.grid.n_steps,
        "hbar": params.units.hbar, "kB": params.units.kB, "seed": params.seed,
    }


def as_times(grid: Union[TimeGrid, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(grid, TimeGrid):
        return grid.validate().times
    return np.atleast_1d(np.asarray(grid, dtype=float))
