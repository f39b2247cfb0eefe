"""Acceptance gate.  Each test carries a ``criterion`` marker; the terminal
summary prints one PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from catdecoherence import cli
from catdecoherence.decoherence import (attenuation_asymptotic, attenuation_engineered,
                                        attenuation_exact, attenuation_scaled, decoherence_time,
                                        plateau_exponent, tau0)
from catdecoherence.langevin_mc import (McConfig, estimate_energy_growth, estimate_work_rate,
                                        mean_response, simulate_ensemble)
from catdecoherence.model import (BathParams, CatParams, DriveParams, OscillatorParams, Sinusoid)
from catdecoherence.spreading import (msd_driven_closed, msd_driven_nodissip,
                                      msd_driven_quadrature, msd_thermal)

UNIT = OscillatorParams(1.0, 1.0)
CAT = CatParams(d=4.0, sigma=1.0)
CHECK_TIMES = (1.0, 2.0, math.pi, 5.0)
MC = McConfig(n_traj=100_000, dt=1e-3, master_seed=42)
MC_GRID = np.union1d(np.round(np.linspace(0.0, 5.0, 51), 12), CHECK_TIMES)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def at(stats, t):
    return int(np.argmin(np.abs(stats.time - t)))


@pytest.fixture(scope="module")
def run_damped():
    return timed(simulate_ensemble, UNIT, BathParams(0.5), DriveParams(1.0), MC, MC_GRID)


@pytest.fixture(scope="module")
def run_undamped():
    return timed(simulate_ensemble, UNIT, BathParams(0.0), DriveParams(1.0), MC, MC_GRID)


# --- 1 -----------------------------------------------------------------------------

@pytest.mark.criterion(1, "closed-form driven MSD vs quadrature < 1e-9 relative, < 10 s")
def test_closed_form_vs_quadrature():
    t = np.linspace(0.0, 10.0, 201)[1:]
    start = time.perf_counter()
    worst = 0.0
    for gamma in (0.1, 0.5, 1.9, 2.0 - 1e-6, 2.0, 2.0 + 1e-6, 3.0):
        bath = BathParams(gamma)
        closed = msd_driven_closed(t, UNIT, bath, 1.0)
        quad = np.array([msd_driven_quadrature(x, UNIT, bath, 1.0) for x in t])
        worst = max(worst, float(np.max(np.abs(closed - quad) / quad)))
    elapsed = time.perf_counter() - start
    assert worst < 1e-9
    assert elapsed < 10.0


# --- 2 -----------------------------------------------------------------------------

@pytest.mark.criterion(2, "dissipationless limit within 1e-5 relative; s_d(pi) = pi/2, < 1 s")
def test_dissipationless_limit():
    start = time.perf_counter()
    t = np.linspace(0.0, 10.0, 1001)[1:]
    closed = msd_driven_closed(t, UNIT, BathParams(1e-6), 1.0)
    limit = msd_driven_nodissip(t, UNIT, 1.0)
    anchor = msd_driven_nodissip(math.pi, UNIT, 1.0)
    elapsed = time.perf_counter() - start
    assert np.max(np.abs(closed / limit - 1.0)) < 1e-5
    assert anchor == pytest.approx(math.pi / 2, rel=1e-15)
    assert elapsed < 1.0


# --- 3 -----------------------------------------------------------------------------

@pytest.mark.criterion(3, "Monte Carlo MSD within 3 standard errors of closed forms, < 60 s")
@pytest.mark.parametrize("which", ["damped", "undamped"])
def test_monte_carlo_msd(which, run_damped, run_undamped):
    stats, elapsed = run_damped if which == "damped" else run_undamped
    for t in CHECK_TIMES:
        i = at(stats, t)
        ts = stats.time[i]
        exact = (msd_driven_closed(ts, UNIT, BathParams(0.5), 1.0) if which == "damped"
                 else msd_driven_nodissip(ts, UNIT, 1.0))
        assert abs(stats.msd[i] - exact) <= 3.0 * stats.se_msd[i], (which, ts)
    assert stats.n_traj == 100_000
    assert elapsed < 60.0


# --- 4 -----------------------------------------------------------------------------

@pytest.mark.criterion(4, "undamped energy grows with slope g/2m within 3 errors, R^2 > 0.999")
def test_energy_growth(run_undamped):
    stats, elapsed = run_undamped
    fit = estimate_energy_growth(stats, window=(0.5, 5.0))
    assert abs(fit.slope - 0.5) <= 3.0 * fit.stderr
    assert fit.r2 > 0.999
    assert elapsed < 60.0


# --- 5 -----------------------------------------------------------------------------

@pytest.mark.criterion(5, "thermal work rate kT*gamma = 0.5 within 3 errors, < 60 s")
def test_work_rate():
    gamma, kT = 0.5, 1.0
    grid = np.arange(0.0, 61.0, 1.0)
    mc = McConfig(n_traj=20_000, dt=0.01, master_seed=42, initial="thermal")
    stats, elapsed = timed(simulate_ensemble, UNIT, BathParams(gamma, kT), DriveParams(0.0), mc, grid)
    est = estimate_work_rate(stats, gamma)
    assert abs(est.value - kT * gamma) <= 3.0 * est.stderr
    assert elapsed < 60.0


# --- 6 -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def run_with_sinusoid():
    drive = DriveParams(1.0, Sinusoid(1.0, 0.5))
    return simulate_ensemble(UNIT, BathParams(0.5), drive, MC, MC_GRID)


@pytest.mark.criterion(6, "deterministic drive leaves the spread unchanged; mean path = G * f within 1e-2")
def test_spread_unchanged_by_drive(run_with_sinusoid, run_damped):
    both, (ref, _) = run_with_sinusoid, run_damped
    for i in range(1, both.time.size):
        se = math.hypot(both.se_var_x[i], ref.se_var_x[i])
        assert abs(both.var_x[i] - ref.msd[i]) <= 3.0 * se, both.time[i]
        exact = msd_driven_closed(both.time[i], UNIT, BathParams(0.5), 1.0)
        assert abs(both.var_x[i] - exact) <= 3.0 * both.se_var_x[i], both.time[i]


@pytest.mark.criterion(6, "deterministic drive leaves the spread unchanged; mean path = G * f within 1e-2")
def test_mean_path_convolution(run_with_sinusoid):
    drive = DriveParams(0.0, Sinusoid(1.0, 0.5))
    only = simulate_ensemble(UNIT, BathParams(0.5), drive,
                             McConfig(n_traj=1, dt=1e-3, master_seed=42), MC_GRID)
    conv = mean_response(only.time, UNIT, BathParams(0.5), drive)
    assert np.max(np.abs(only.mean_x - conv)) / np.max(np.abs(conv)) <= 1e-2
    both = run_with_sinusoid
    assert np.all(np.abs(both.mean_x - only.mean_x) <= 3.0 * both.se_mean_x + 1e-15)


# --- 7 -----------------------------------------------------------------------------

@pytest.mark.criterion(7, "attenuation laws: a(0)=1, monotone, plateau, small/long-time forms, d^2 scaling")
def test_attenuation_laws():
    t = np.linspace(0.0, 50.0, 50_001)
    exact = attenuation_exact(t, UNIT, CAT, 1.0)
    assert exact.a[0] == 1.0
    assert attenuation_scaled(0.0, UNIT, CAT, 1.0).a == 1.0
    for kind in ("small_time", "long_time"):
        assert attenuation_asymptotic(0.0, UNIT, CAT, 1.0, kind).a == 1.0
    assert np.all(np.diff(exact.exponent) >= -1e-12)
    assert np.all(exact.a >= math.exp(-plateau_exponent(CAT)))

    t_small = 0.05 / 2.0
    small = attenuation_asymptotic(t_small, UNIT, CAT, 1.0, "small_time")
    scaled = attenuation_scaled(t_small, UNIT, CAT, 1.0)
    assert abs(small.exponent / scaled.exponent - 1.0) <= 1e-3
    assert abs(small.a / scaled.a - 1.0) <= 1e-3

    for k in range(1, 6):
        tk = k * math.pi
        long = attenuation_asymptotic(tk, UNIT, CAT, 1.0, "long_time").a
        assert attenuation_scaled(tk, UNIT, CAT, 1.0).a == pytest.approx(long, rel=1e-15, abs=0)

    s_d = msd_driven_nodissip(t[1:], UNIT, 1.0)
    for d2 in (1.0, 7.5, 30.0):
        e1 = attenuation_engineered(t[1:], CAT, s_d).exponent
        e2 = attenuation_engineered(t[1:], CatParams(d=d2, sigma=1.0), s_d).exponent
        assert np.max(np.abs(e1 / e2 / (CAT.d ** 2 / d2 ** 2) - 1.0)) <= 1e-12


# --- 8 -----------------------------------------------------------------------------

@pytest.mark.criterion(8, "long-time tau_d(d)/tau_d(2d) in [3.8, 4.2]; tau0 = 1 at unit parameters")
def test_decoherence_time_scaling():
    assert tau0(UNIT, CAT, 1.0) == 1.0
    # tau0 = 625 and 156: many oscillation periods, s_d << sigma^2 at the crossing
    g = 1e-4
    a = decoherence_time(UNIT, CatParams(d=16.0, sigma=1.0), g)
    b = decoherence_time(UNIT, CatParams(d=32.0, sigma=1.0), g)
    assert 3.8 <= a.tau_d / b.tau_d <= 4.2
    assert 3.8 <= a.tau_d_scaled / b.tau_d_scaled <= 4.2


# --- 9 -----------------------------------------------------------------------------

@pytest.mark.criterion(9, "thermal plateau 2kT/m w0^2 within 1e-3; weak-coupling T=0 law within 2%")
def test_thermal_quadrature():
    hot = BathParams(0.5, 100.0)
    assert msd_thermal(100.0, UNIT, hot) == pytest.approx(200.0, rel=1e-3)
    cold = BathParams(0.01, 0.0)
    # relative test where 1 - cos is not near a zero; absolute test over a full period
    for t in np.linspace(0.1, 5.0, 50):
        assert msd_thermal(t, UNIT, cold) == pytest.approx(1.0 - math.cos(t), rel=2e-2)
    for t in np.linspace(0.0, 2 * math.pi, 64):
        assert abs(msd_thermal(t, UNIT, cold) - (1.0 - math.cos(t))) <= 2e-2 * 2.0


# --- 10 ----------------------------------------------------------------------------

@pytest.mark.criterion(10, "mc-validate output byte-identical across runs and worker counts")
def test_mc_validate_determinism(tmp_path, capsys):
    outputs = []
    for n, workers in enumerate((1, 1, 3)):
        out = tmp_path / f"run{n}.csv"
        code = cli.main(["mc-validate", "--n-traj", "2000", "--seed", "42",
                         "--workers", str(workers), "--out", str(out)])
        assert code in (0, 1)
        outputs.append((out.read_bytes(), (tmp_path / f"run{n}.csv.manifest.json").read_bytes()))
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]
