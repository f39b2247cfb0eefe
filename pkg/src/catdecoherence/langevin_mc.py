"""Monte Carlo ensembles of the classical Langevin oscillator.

    dx = v dt
    m dv = (-m gamma v - K x + f_det(t)) dt + dW_thermal + dW_engineered

with ``<dW_thermal^2> = 2 m gamma kB T dt`` and ``<dW_engineered^2> = g dt``.
Trajectories are integrated with semi-implicit Euler (velocity first, then
position with the new velocity).

Trajectory ``i`` draws from its own PCG64 stream seeded by
``SeedSequence(master_seed, spawn_key=(i,))``, noise is drawn in fixed-size
time chunks, and trajectories are reduced in fixed blocks of
``BLOCK_SIZE`` in block order.  Results are therefore bitwise identical for
any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numba
import numpy as np

from ._quad import QuadControls, quad
from .model import (BathParams, DriveParams, OscillatorParams, ParameterError, TimeGrid,
                    CurveTable, Units, as_times)
from .response import green_closed

BLOCK_SIZE = 512
CHUNK_STEPS = 4096
MAX_DT_RATE = 0.01


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_traj: int = 100_000
    dt: float = 1e-3
    n_steps: Optional[int] = None  # None: just long enough for the last sample
    master_seed: int = 42
    scheme: str = "semi-implicit-euler"
    initial: str = "point"  # or "thermal"

    def validate(self, osc: OscillatorParams, bath: BathParams) -> "McConfig":
        def need(cond, name, msg):
            if not cond:
                raise ParameterError(name, msg)

        need(int(self.n_traj) == self.n_traj and self.n_traj >= 1, "n_traj", "n_traj must be >= 1")
        need(math.isfinite(self.dt) and self.dt > 0, "dt", "dt must be > 0")
        need(self.dt * osc.omega0 <= MAX_DT_RATE, "dt",
             f"dt*omega0 = {self.dt * osc.omega0:g} exceeds {MAX_DT_RATE}")
        need(self.dt * bath.gamma <= MAX_DT_RATE, "dt",
             f"dt*gamma = {self.dt * bath.gamma:g} exceeds {MAX_DT_RATE}")
        need(self.n_steps is None or (int(self.n_steps) == self.n_steps and self.n_steps >= 1),
             "n_steps", "n_steps must be >= 1")
        need(0 <= self.master_seed < 2 ** 64, "master_seed", "master_seed must fit in 64 bits")
        need(self.scheme == "semi-implicit-euler", "scheme", "only semi-implicit-euler is supported")
        need(self.initial in ("point", "thermal"), "initial", "initial must be 'point' or 'thermal'")
        return self


@dataclass
class EnsembleStats:
    """Per-sample ensemble averages with standard errors.

    ``msd`` is measured from each trajectory's own ``x(0)``; ``var_x`` is the
    spread about the ensemble mean path.  ``work_rate[i]`` is the mean power
    of the thermal force over ``(time[i-1], time[i]]`` (zero at ``i = 0``).
    ``block_energy`` holds per-block mean energies for error estimates of
    derived fits.
    """

    time: np.ndarray
    n_traj: int
    mean_x: np.ndarray
    se_mean_x: np.ndarray
    msd: np.ndarray
    se_msd: np.ndarray
    var_x: np.ndarray
    se_var_x: np.ndarray
    energy: np.ndarray
    se_energy: np.ndarray
    work_rate: np.ndarray
    se_work_rate: np.ndarray
    block_sizes: np.ndarray = field(repr=False)
    block_energy: np.ndarray = field(repr=False)

    def to_table(self) -> CurveTable:
        return CurveTable(
            self.time,
            columns={"mean_x": self.mean_x, "msd": self.msd, "var_x": self.var_x,
                     "energy": self.energy, "work_rate": self.work_rate},
            stderr={"mean_x": self.se_mean_x, "msd": self.se_msd, "var_x": self.se_var_x,
                    "energy": self.se_energy, "work_rate": self.se_work_rate},
        )


# --- integration kernel ----------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _advance(x, v, wacc, z, step0, dt, gamma, w0sq, inv_m, m, sig_th, sig_eng,
             force, sample_steps, p0, x_out, e_out, w_out, bad):
    """Advance every trajectory of a block through one time chunk.

    ``z[b, j, c]`` is the standard normal for trajectory ``b``, chunk step
    ``j`` and channel ``c`` (thermal first when present).  Returns the
    sample pointer after the chunk.
    """
    n_b, n_j = z.shape[0], z.shape[1]
    has_th = sig_th > 0.0
    eng_ch = 1 if has_th else 0
    has_eng = sig_eng > 0.0
    p_end = p0
    for b in range(n_b):
        if bad[b] >= 0:
            continue
        xb, vb, wb = x[b], v[b], wacc[b]
        p = p0
        for j in range(n_j):
            n = step0 + j
            imp_th = sig_th * z[b, j, 0] if has_th else 0.0
            imp = imp_th
            if has_eng:
                imp += sig_eng * z[b, j, eng_ch]
            v_new = vb + dt * (-gamma * vb - w0sq * xb + force[j] * inv_m) + imp * inv_m
            x_new = xb + dt * v_new
            if not (math.isfinite(x_new) and math.isfinite(v_new)):
                bad[b] = n
                break
            wb += imp_th * 0.5 * (vb + v_new)
            xb, vb = x_new, v_new
            if p < sample_steps.size and n + 1 == sample_steps[p]:
                x_out[b, p] = xb
                e_out[b, p] = 0.5 * m * (vb * vb + w0sq * xb * xb)
                if not (math.isfinite(e_out[b, p]) and math.isfinite(xb * xb)):
                    bad[b] = n
                    break
                w_out[b, p] = wb / ((sample_steps[p] - sample_steps[p - 1]) * dt)
                wb = 0.0
                p += 1
        x[b], v[b], wacc[b] = xb, vb, wb
        p_end = p
    return p_end


# --- block statistics ------------------------------------------------------------

@dataclass
class _Moments:
    """Count, mean and sum of squared deviations along axis 0."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, a: np.ndarray) -> "_Moments":
        mean = a.mean(axis=0)
        return cls(a.shape[0], mean, ((a - mean) ** 2).sum(axis=0))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _pairwise(items):
    """Fixed-order pairwise reduction of a list of mergeable items."""
    items = list(items)
    while len(items) > 1:
        merged = [a.merge(b) for a, b in zip(items[0::2], items[1::2])]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


@dataclass
class _BlockResult:
    x: _Moments
    dx2: _Moments
    energy: _Moments
    work: _Moments
    mean_x2: np.ndarray


def _sample_steps(times: np.ndarray, dt: float) -> np.ndarray:
    if np.any(times < 0):
        raise ParameterError("grid", "sample times must be >= 0")
    steps = np.rint(times / dt).astype(np.int64)
    if steps[0] != 0:
        steps = np.concatenate([[0], steps])
    if np.any(np.diff(steps) <= 0):
        raise ParameterError("grid", "sample times must be increasing and at least dt apart")
    return steps


def _stream(master_seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(i,))))


def _run_block(start, count, osc, bath, drive, mc, units, steps, force_mid, n_steps):
    m = osc.m
    kT = units.kB * bath.temperature
    sig_th = math.sqrt(2.0 * m * bath.gamma * kT * mc.dt)
    sig_eng = math.sqrt(drive.g * mc.dt)
    n_ch = int(sig_th > 0) + int(sig_eng > 0)

    gens = [_stream(mc.master_seed, start + b) for b in range(count)]
    x = np.zeros(count)
    v = np.zeros(count)
    if mc.initial == "thermal" and kT > 0:
        if not osc.K > 0:
            raise ParameterError("initial", "thermal initial state needs omega0 > 0")
        for b, gen in enumerate(gens):
            zx, zv = gen.standard_normal(2)
            x[b] = zx * math.sqrt(kT / osc.K)
            v[b] = zv * math.sqrt(kT / m)
    x0 = x.copy()

    ns = steps.size
    x_out = np.zeros((count, ns))
    e_out = np.zeros((count, ns))
    w_out = np.zeros((count, ns))
    x_out[:, 0] = x
    e_out[:, 0] = 0.5 * m * (v * v + osc.omega0 ** 2 * x * x)
    wacc = np.zeros(count)
    bad = np.full(count, -1, dtype=np.int64)

    p = 1
    for step0 in range(0, n_steps, CHUNK_STEPS):
        n_j = min(CHUNK_STEPS, n_steps - step0)
        zc = np.zeros((count, n_j, max(n_ch, 1)))
        if n_ch:
            for b, gen in enumerate(gens):
                gen.standard_normal(out=zc[b])
        p = _advance(x, v, wacc, zc, step0, mc.dt, bath.gamma, osc.omega0 ** 2, 1.0 / m, m,
                     sig_th, sig_eng, force_mid[step0:step0 + n_j], steps, p,
                     x_out, e_out, w_out, bad)
    hit = np.nonzero(bad >= 0)[0]
    if hit.size:
        b = int(hit[0])
        raise SimulationError(f"non-finite state in trajectory {start + b} at step {int(bad[b])}")

    dx = x_out - x0[:, None]
    return _BlockResult(_Moments.of(x_out), _Moments.of(dx * dx), _Moments.of(e_out),
                        _Moments.of(w_out), (x_out * x_out).mean(axis=0))


def _centered_variance(blocks: Sequence[_BlockResult], total: _Moments):
    """Variance about the ensemble mean and its delete-one-block jackknife
    standard error."""
    n = total.n
    var = total.m2 / (n - 1) if n > 1 else np.zeros_like(total.mean)
    nb = len(blocks)
    if nb < 2:
        return var, np.zeros_like(var)
    sizes = np.array([b.x.n for b in blocks], dtype=float)
    means = np.stack([b.x.mean for b in blocks])
    means2 = np.stack([b.mean_x2 for b in blocks])
    s1 = (sizes[:, None] * means).sum(axis=0)
    s2 = (sizes[:, None] * means2).sum(axis=0)
    reps = np.empty_like(means)
    for j in range(nb):
        nj = n - sizes[j]
        mu = (s1 - sizes[j] * means[j]) / nj
        reps[j] = ((s2 - sizes[j] * means2[j]) / nj - mu * mu) * nj / (nj - 1)
    se = np.sqrt((nb - 1) / nb * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    return var, se


def simulate_ensemble(osc: OscillatorParams, bath: BathParams, drive: DriveParams,
                      mc: McConfig, grid: Union[TimeGrid, Sequence[float], np.ndarray],
                      units: Units = Units(), workers: int = 1) -> EnsembleStats:
    """Simulate ``mc.n_traj`` trajectories and collect statistics at the grid
    times (each snapped to the nearest multiple of ``dt``; the snapped times
    are reported).  ``t = 0`` is always sampled."""
    osc.validate(); bath.validate(); drive.validate(); units.validate()
    mc.validate(osc, bath)
    steps = _sample_steps(as_times(grid), mc.dt)
    n_steps = int(steps[-1]) if mc.n_steps is None else int(mc.n_steps)
    if steps[-1] > n_steps:
        raise ParameterError("n_steps", "grid extends beyond n_steps * dt")
    force_mid = np.asarray(drive.force((np.arange(n_steps) + 0.5) * mc.dt), dtype=float)

    starts = list(range(0, mc.n_traj, BLOCK_SIZE))

    def work(start):
        return _run_block(start, min(BLOCK_SIZE, mc.n_traj - start), osc, bath, drive, mc,
                          units, steps, force_mid, n_steps)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(work, starts))
    else:
        blocks = [work(s) for s in starts]

    xs = _pairwise(b.x for b in blocks)
    dx2 = _pairwise(b.dx2 for b in blocks)
    en = _pairwise(b.energy for b in blocks)
    wr = _pairwise(b.work for b in blocks)
    var, se_var = _centered_variance(blocks, xs)
    return EnsembleStats(
        time=steps * mc.dt, n_traj=mc.n_traj,
        mean_x=xs.mean, se_mean_x=xs.stderr(),
        msd=dx2.mean, se_msd=dx2.stderr(),
        var_x=var, se_var_x=se_var,
        energy=en.mean, se_energy=en.stderr(),
        work_rate=wr.mean, se_work_rate=wr.stderr(),
        block_sizes=np.array([b.x.n for b in blocks]),
        block_energy=np.stack([b.energy.mean for b in blocks]),
    )


# --- estimators ------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    stderr: float
    intercept: float
    r2: float


def _ls_weights(t: np.ndarray) -> np.ndarray:
    tc = t - t.mean()
    return tc / (tc @ tc)


def estimate_energy_growth(stats: EnsembleStats, window=(None, None)) -> LinearFit:
    """Least-squares slope of the mean energy over ``window``.

    The slope is a fixed linear functional of the energy curve, so its
    standard error follows from the spread of per-block slopes.
    """
    lo, hi = window
    mask = np.ones(stats.time.size, dtype=bool)
    if lo is not None:
        mask &= stats.time >= lo
    if hi is not None:
        mask &= stats.time <= hi
    if mask.sum() < 3:
        raise ValueError("energy fit needs at least 3 points in the window")
    t = stats.time[mask]
    e = stats.energy[mask]
    w = _ls_weights(t)
    slope = float(w @ e)
    intercept = float(e.mean() - slope * t.mean())
    resid = e - (intercept + slope * t)
    ss_tot = float(((e - e.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0

    sizes = stats.block_sizes.astype(float)
    if sizes.size >= 2:
        block_slopes = stats.block_energy[:, mask] @ w
        frac = sizes / sizes.sum()
        se = math.sqrt(sizes.size / (sizes.size - 1) * float((frac ** 2 * (block_slopes - slope) ** 2).sum()))
    else:
        se = 0.0
    return LinearFit(slope=slope, stderr=se, intercept=intercept, r2=r2)


def estimate_work_rate(stats: EnsembleStats, gamma: float,
                       t_equilibrate: Optional[float] = None) -> Estimate:
    """Average power of the thermal force after equilibration.

    Sampling intervals that start at or after ``t_equilibrate`` (default
    ``10/gamma``) are averaged with weights equal to their length; work
    increments on disjoint intervals are uncorrelated, so the interval
    standard errors add in quadrature.
    """
    if t_equilibrate is None:
        if not gamma > 0:
            raise ValueError("gamma must be > 0 to define the equilibration time")
        t_equilibrate = 10.0 / gamma
    t = stats.time
    keep = np.zeros(t.size, dtype=bool)
    keep[1:] = t[:-1] >= t_equilibrate * (1.0 - 1e-12)
    if keep.sum() < 1:
        raise ValueError("no sampling intervals after equilibration")
    lengths = np.diff(t)[keep[1:]]
    total = lengths.sum()
    value = float((lengths * stats.work_rate[keep]).sum() / total)
    se = float(np.sqrt(((lengths * stats.se_work_rate[keep]) ** 2).sum()) / total)
    return Estimate(value, se)


def mean_response(times, osc: OscillatorParams, bath: BathParams, drive: DriveParams,
                  quad_controls: QuadControls = QuadControls(epsabs=1e-12, epsrel=1e-10)) -> np.ndarray:
    """Deterministic mean path ``int_0^t G(t - t') f_det(t') dt'`` by quadrature."""
    out = []
    for t in np.atleast_1d(np.asarray(times, dtype=float)):
        if t <= 0:
            out.append(0.0)
            continue
        val, _ = quad(lambda s: float(green_closed(t - s, osc, bath) * drive.force(s)), 0.0, t,
                      quad_controls)
        out.append(val)
    return np.array(out)


@dataclass(frozen=True)
class Decomposition:
    time: np.ndarray
    mean_x: np.ndarray
    se_mean_x: np.ndarray
    var_x: np.ndarray
    se_var_x: np.ndarray
    stats: EnsembleStats


def variance_decomposition(osc: OscillatorParams, bath: BathParams, drive: DriveParams,
                           mc: McConfig, grid, units: Units = Units(),
                           workers: int = 1) -> Decomposition:
    """Split the motion into the ensemble mean path and the spread about it."""
    stats = simulate_ensemble(osc, bath, drive, mc, grid, units, workers)
    return Decomposition(stats.time, stats.mean_x, stats.se_mean_x, stats.var_x,
                         stats.se_var_x, stats)
