"""Command-line front end.

Subcommands ``spreading``, ``attenuation``, ``tau-d`` and ``mc-validate``
write deterministic CSV (17 significant digits, LF line endings).  With
``--out PATH`` a flat JSON manifest is written next to the CSV as
``PATH.manifest.json``.

Exit status: 0 success, 1 validation failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from ._quad import QuadratureError
from .decoherence import (attenuation_asymptotic, attenuation_exact, attenuation_scaled,
                          decoherence_time, tau0)
from .langevin_mc import (McConfig, SimulationError, estimate_energy_growth, estimate_work_rate,
                          mean_response, simulate_ensemble)
from .model import (BathParams, CatParams, CONFIG_KEYS, CurveTable, DriveParams, OscillatorParams,
                    ParameterError, Params, Sinusoid, load_config, params_from_mapping,
                    params_to_mapping, validate)
from .spreading import (msd_driven_closed, msd_driven_nodissip, msd_driven_quadrature, msd_thermal,
                        msd_thermal_undamped, on_grid)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DEFAULTS = {"m": 1.0, "omega0": 1.0, "gamma": 0.5, "temperature": 0.0, "g": 1.0,
            "d": 4.0, "sigma": 1.0, "t_max": 10.0, "n_steps": 1000, "hbar": 1.0,
            "kB": 1.0, "seed": 42}
# attenuation laws hold only for the undamped, zero-temperature case
REGIME_DEFAULTS = {"attenuation": {"gamma": 0.0}, "tau-d": {"gamma": 0.0}}


class InputError(Exception):
    pass


# --- CSV ------------------------------------------------------------------------

def format_value(value) -> str:
    if isinstance(value, str):
        return value
    return "%.17g" % value


def write_csv(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue().encode()


def table_csv(table: CurveTable) -> bytes:
    return write_csv(table.header(), table.rows())


# --- subcommands ------------------------------------------------------------------

@dataclass
class Output:
    csv: bytes
    extra: dict
    status: int = EXIT_OK
    summary: str = ""


def cmd_spreading(params: Params, workers: int = 1) -> Output:
    osc, bath, g, units = params.osc, params.bath, params.drive.g, params.units
    times = params.grid.times
    cols = {}
    extra = {}
    s_d_quad = on_grid(partial(msd_driven_quadrature, osc=osc, bath=bath, g=g), times, workers)
    if bath.gamma > 0:
        s_d = msd_driven_closed(times, osc, bath, g)
        cols["s_d_closed"] = s_d
        cols["s_d_quad"] = s_d_quad
        s_0 = on_grid(partial(msd_thermal, osc=osc, bath=bath, units=units), times, workers)
    else:
        s_d = msd_driven_nodissip(times, osc, g)
        cols["s_d_quad"] = s_d_quad
        cols["s_d_nodissip"] = s_d
        s_0 = msd_thermal_undamped(times, osc, bath, units)
    pos = s_d > 0
    extra["max_rel_discrepancy"] = float(np.max(np.abs(s_d[pos] - s_d_quad[pos]) / s_d[pos])) if pos.any() else 0.0
    cols["s_0"] = s_0
    cols["s_total"] = s_d + s_0
    return Output(table_csv(CurveTable(times, cols)), extra)


def _check_attenuation_regime(params: Params):
    if params.bath.gamma != 0 or params.bath.temperature != 0:
        raise InputError("attenuation laws are defined only for gamma=0 and temperature=0")
    if not params.osc.omega0 > 0:
        raise InputError("omega0 must be > 0")
    if not params.drive.g > 0:
        raise InputError("g must be > 0")


def cmd_attenuation(params: Params) -> Output:
    _check_attenuation_regime(params)
    osc, cat, g = params.osc, params.cat, params.drive.g
    times = params.grid.times
    cols = {
        "a_exact": attenuation_exact(times, osc, cat, g).a,
        "a_scaled": attenuation_scaled(times, osc, cat, g).a,
        "a_small_time": attenuation_asymptotic(times, osc, cat, g, "small_time").a,
        "a_long_time": attenuation_asymptotic(times, osc, cat, g, "long_time").a,
    }
    return Output(table_csv(CurveTable(times, cols)), {"tau0": tau0(osc, cat, g)})


def cmd_tau_d(params: Params, scan_d: Optional[Sequence[float]] = None) -> Output:
    _check_attenuation_regime(params)
    scan = list(scan_d) if scan_d else [params.cat.d]
    rows = []
    for d in scan:
        cat = CatParams(d=d, sigma=params.cat.sigma).validate()
        res = decoherence_time(params.osc, cat, params.drive.g)
        rows.append((d, res.tau0, res.tau_d if res.tau_d is not None else math.nan,
                     res.status, res.tau_d_scaled))
    return Output(write_csv(["d", "tau0", "tau_d", "status", "tau_d_scaled"], rows), {})


# --- Monte Carlo validation ---------------------------------------------------------

CHECK_TIMES = (1.0, 2.0, math.pi, 5.0)
Z_LIMIT = 3.0


def _z(estimate, expected, se):
    diff = estimate - expected
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def mc_validation_rows(params: Params, n_traj: int, dt: float, workers: int = 1) -> list:
    """Run the Monte Carlo validation suites and return result rows
    ``(check, t, estimate, stderr, expected, score, pass)``.

    For z-score checks ``score`` is the z-score and a check passes iff
    ``|z| <= 3``; for tolerance checks ``score`` is the relative error.
    """
    osc, units, g, seed = params.osc, params.units, params.drive.g, params.seed
    rows = []

    def zrow(name, t, est, se, exp):
        z = _z(est, exp, se)
        rows.append((name, t, est, se, exp, z, "pass" if abs(z) <= Z_LIMIT else "fail"))

    grid = np.union1d(np.round(np.linspace(0.0, 5.0, 51), 12), CHECK_TIMES)
    mc = McConfig(n_traj=n_traj, dt=dt, master_seed=seed)

    # driven MSD, damped and undamped, zero temperature
    runs = {}
    gammas = ([params.bath.gamma] if params.bath.gamma > 0 else []) + [0.0]
    for gam in gammas:
        bath = BathParams(gamma=gam)
        stats = simulate_ensemble(osc, bath, DriveParams(g=g), mc, grid, units, workers)
        runs[gam] = stats
        label = "msd_damped" if gam > 0 else "msd_undamped"
        for t in CHECK_TIMES:
            i = int(np.argmin(np.abs(stats.time - t)))
            ts = stats.time[i]
            exp = float(msd_driven_closed(ts, osc, bath, g) if gam > 0 else msd_driven_nodissip(ts, osc, g))
            zrow(label, ts, stats.msd[i], stats.se_msd[i], exp)

    # linear energy growth without damping
    fit = estimate_energy_growth(runs[0.0], window=(0.5, 5.0))
    zrow("energy_slope", math.nan, fit.slope, fit.stderr, g / (2.0 * osc.m))
    r2_ok = g == 0 or fit.r2 > 0.999
    rows.append(("energy_r2", math.nan, fit.r2, 0.0, 0.999, 1.0 - fit.r2, "pass" if r2_ok else "fail"))

    # power of the thermal force at equilibrium
    gam_w = params.bath.gamma if params.bath.gamma > 0 else 0.5
    kT = units.kB * params.bath.temperature if params.bath.temperature > 0 else 1.0
    bath_w = BathParams(gamma=gam_w, temperature=kT / units.kB)
    dt_w = 0.01 / max(osc.omega0, gam_w)
    t_eq = 10.0 / gam_w
    grid_w = np.arange(0, int(round((t_eq + 20.0 / gam_w) / 1.0)) + 1) * 1.0
    stats_w = simulate_ensemble(osc, bath_w, DriveParams(), McConfig(
        n_traj=max(1, n_traj // 10), dt=dt_w, master_seed=seed, initial="thermal"),
        grid_w, units, workers)
    est = estimate_work_rate(stats_w, gam_w, t_eq)
    zrow("work_rate", math.nan, est.value, est.stderr, kT * gam_w)

    # a deterministic force shifts the mean but leaves the spread unchanged
    ref_gam = gammas[0]
    bath_d = BathParams(gamma=ref_gam)
    ref = runs[ref_gam]
    sinus = Sinusoid(amplitude=1.0, frequency=0.5 * osc.omega0 if osc.omega0 > 0 else 1.0)
    both = simulate_ensemble(osc, bath_d, DriveParams(g=g, deterministic=sinus), mc, grid, units, workers)
    only = simulate_ensemble(osc, bath_d, DriveParams(deterministic=sinus),
                             McConfig(n_traj=1, dt=dt, master_seed=seed), grid, units, workers)
    for i in range(1, grid.size):
        se = math.hypot(both.se_var_x[i], ref.se_var_x[i])
        zrow("centered_msd_with_drive", both.time[i], both.var_x[i], se, ref.var_x[i])
    for i in range(1, grid.size):
        zrow("mean_path_superposition", both.time[i], both.mean_x[i], both.se_mean_x[i], only.mean_x[i])
    conv = mean_response(only.time, osc, bath_d, DriveParams(deterministic=sinus))
    rel = float(np.max(np.abs(only.mean_x - conv)) / np.max(np.abs(conv)))
    rows.append(("mean_path_convolution", math.nan, rel, 0.0, 0.0, rel, "pass" if rel <= 1e-2 else "fail"))
    return rows


def cmd_mc_validate(params: Params, n_traj: int, dt: float, workers: int = 1) -> Output:
    osc = params.osc
    McConfig(n_traj=n_traj, dt=dt, master_seed=params.seed).validate(osc, params.bath)
    rows = mc_validation_rows(params, n_traj, dt, workers)
    failed = [r for r in rows if r[-1] != "pass"]
    lines = [f"{'FAIL' if r[-1] != 'pass' else 'PASS'} {r[0]} t={format_value(r[1])} "
             f"estimate={r[2]:.6g} expected={r[4]:.6g} score={r[5]:.3g}" for r in rows]
    lines.append(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    csv = write_csv(["check", "t", "estimate", "stderr", "expected", "score", "result"], rows)
    return Output(csv, {"n_traj": n_traj, "dt": dt, "failed": len(failed)},
                  EXIT_FAIL if failed else EXIT_OK, "\n".join(lines))


# --- argument handling ----------------------------------------------------------------

def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catdecoherence", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spreading", "attenuation", "tau-d", "mc-validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value parameter file")
        p.add_argument("--out", type=Path, help="CSV output path (stdout if omitted)")
        p.add_argument("--workers", type=int, default=1)
        for key in CONFIG_KEYS:
            typ = int if key in ("n_steps", "seed") else float
            p.add_argument(_flag(key), dest=key, type=typ, default=None)
        if name == "tau-d":
            p.add_argument("--scan-d", type=str, default=None, help="comma-separated separations")
        if name == "mc-validate":
            p.add_argument("--n-traj", type=int, default=100_000)
            p.add_argument("--dt", type=float, default=1e-3)
    return parser


def resolve_params(args) -> Params:
    values = dict(DEFAULTS)
    values.update(REGIME_DEFAULTS.get(args.command, {}))
    if args.config is not None:
        try:
            values.update(load_config(args.config))
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
    for key in CONFIG_KEYS:
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    return validate(params_from_mapping(values))


def _parse_scan(text: Optional[str]):
    if not text:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --scan-d list: {text!r}") from None


def run(args) -> Output:
    params = resolve_params(args)
    if args.command == "spreading":
        return cmd_spreading(params, args.workers)
    if args.command == "attenuation":
        return cmd_attenuation(params)
    if args.command == "tau-d":
        return cmd_tau_d(params, _parse_scan(args.scan_d))
    return cmd_mc_validate(params, args.n_traj, args.dt, args.workers)


def manifest(args, params: Params, out: Output) -> dict:
    data = {"subcommand": args.command, "version": __version__, "seed": params.seed,
            "parameters": params_to_mapping(params),
            "sha256": hashlib.sha256(out.csv).hexdigest()}
    if args.command == "tau-d" and args.scan_d:
        data["scan_d"] = args.scan_d
    data.update(out.extra)
    return data


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve_params(args)
        out = run(args)
    except (ParameterError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QuadratureError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out is None:
        sys.stdout.buffer.write(out.csv)
        sys.stdout.flush()
    else:
        try:
            args.out.write_bytes(out.csv)
            Path(str(args.out) + ".manifest.json").write_text(
                json.dumps(manifest(args, params, out), indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
    if out.summary:
        print(out.summary, file=sys.stderr)
    return out.status


if __name__ == "__main__":
    sys.exit(main())
