"""Command-line entry point: ``exclusion-ldp <subcommand> [options]``.

Options may also come from a TOML file given with ``--config``.  Top-level
keys apply to every subcommand, a table named after the subcommand (for
example ``[simulate]``) applies to that one only, and flags on the command
line override both.  Keys are the long option names with dashes replaced by
underscores, e.g.::

    seed = 3
    a = 1.0
    alpha = 0.2
    beta = 0.8

    [simulate]
    n = 128
    replicas = 50
    tilt = "sine:1.0"

Every run writes into a new directory ``<output-dir>/<timestamp>_seed<seed>``
whose path is printed on completion.

Exit codes: 0 success, 1 a checked criterion failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io, verify
from .criteria import CRITERIA
from .model import ModelParams
from .pde import Grid, SchemeError, solve_hydro, solve_tilted
from .rate import METHODS, TrajectoryData, explicit_rate
from .sim import (MajorantViolation, SimConfig, aggregate_profiles, log_rn_statistics,
                  run_replicas)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class UsageError(ValueError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list[int]:
    return [int(v) for v in _floats(text)]


def _params(args, n_sites: int = 2) -> ModelParams:
    return ModelParams(a=float(args.a), alpha=float(args.alpha), beta=float(args.beta),
                       n_sites=int(n_sites))


def _positive(name: str, value) -> float:
    value = float(value)
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value}")
    return value


def _out(args) -> Path:
    """Fresh run directory <output-dir>/<timestamp>_seed<seed> for this invocation."""
    return io.timestamped_dir(args.output_dir, getattr(args, "seed", None))


def _config_record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "output_dir")}


# ------------------------------------------------------------------ subcommands

def cmd_simulate(args) -> int:
    horizon = _positive("horizon", args.horizon)
    p = _params(args, args.n)
    rho0 = io.named_profile(args.profile, p)
    tilt = io.named_tilt(args.tilt, sup_norm_bound=args.sup_norm_bound)
    if args.boundary_sign != 1.0:
        tilt = type(tilt)(tilt.terms, tilt.sup_norm_bound, float(args.boundary_sign))
    boxes = args.boxes if args.boxes else verify.box_count(p.n_sites)
    times = np.linspace(0.0, horizon, int(args.snapshots))
    cfg = SimConfig(p, horizon, seed=int(args.seed), replica_count=int(args.replicas),
                    profile_boxes=int(boxes), snapshot_times=tuple(times))
    recs = run_replicas(cfg, rho0, tilt=tilt, n_jobs=int(args.threads))
    out = _out(args)
    centers = recs[0].box_centers
    agg = [aggregate_profiles(recs, t) for t in times]
    files = [io.write_profiles_csv(out / "profiles.csv", times, centers,
                                   [a[0] for a in agg], [a[1] for a in agg])]
    rows = [(i, float(t), float(c), float(v))
            for i, r in enumerate(recs) for t, snap in zip(times, r.snapshots)
            for c, v in zip(centers, snap)]
    files.append(io.write_rows(out / "replica_profiles.csv", ("replica", "t", "box_center", "density"),
                               rows))
    files.append(io.write_rows(out / "log_rn.csv", ("replica", "log_rn", "log_rn_per_site"),
                               [(i, r.log_rn, r.log_rn / p.n_sites) for i, r in enumerate(recs)]))
    mean, se = log_rn_statistics(recs) if len(recs) > 1 else (recs[0].log_rn / p.n_sites, np.nan)
    files.append(io.write_json(out / "log_rn_summary.json",
                               {"mean_log_rn_per_site": mean, "stderr": se,
                                "events_total": sum(r.n_events for r in recs)}))
    io.write_manifest(out, "simulate", {**_config_record(args), "params": io.params_dict(p)},
                      int(args.seed), files)
    print(f"simulated {len(recs)} replicas, N={p.n_sites}, T={horizon}; "
          f"mean log_rn/N = {mean:.6g} (stderr {se:.3g}); output in {out}")
    return 0


def _solve(args, tilted: bool) -> int:
    horizon = _positive("horizon", args.horizon)
    p = _params(args)
    rho0 = io.named_profile(args.profile, p)
    grid = Grid(int(args.m_cells), horizon, n_saves=int(args.n_saves))
    if tilted:
        f = solve_tilted(p, grid, rho0, io.named_tilt(args.tilt))
    else:
        f = solve_hydro(p, grid, rho0)
    out = _out(args)
    name = "tilted" if tilted else "field"
    path = io.write_field_csv(out / f"{name}.csv", f)
    io.write_manifest(out, "solve-tilted" if tilted else "solve-pde",
                      {**_config_record(args), "params": io.params_dict(p)}, None,
                      [path, path.with_suffix(".json")])
    mass_ok = f.max_mass_residual < CRITERIA["mass_balance"].thresholds["residual"]
    print(f"{name}: M={grid.m_cells}, steps={f.n_steps}, dt={f.dt:.3e}, "
          f"u in [{f.u.min():.6g}, {f.u.max():.6g}], max clip {f.max_clip:.2e}, "
          f"max mass residual {f.max_mass_residual:.2e}; wrote {path}")
    return 0 if mass_ok else 1


def cmd_solve_pde(args) -> int:
    return _solve(args, tilted=False)


def cmd_solve_tilted(args) -> int:
    return _solve(args, tilted=True)


def cmd_rate(args) -> int:
    traj = io.read_field_csv(args.trajectory)
    if args.window:
        lo, hi = _floats(args.window)
        traj = traj.restrict((lo, hi))
    names = list(METHODS) if args.method == "all" else [args.method]
    results = {}
    for name in names:
        if name == "explicit":
            results[name] = explicit_rate(traj)[0]
        else:
            results[name] = METHODS[name](traj)
    out = _out(args)
    payload = {name: r.to_dict() for name, r in results.items()}
    code = 0
    if len(results) > 1:
        ref = results["explicit"].total
        spread = max(abs(r.total - ref) for r in results.values()) / ref if ref > 0 else 0.0
        payload["agreement"] = {"max_relative_to_explicit": spread,
                                "tolerance": CRITERIA["consistency"].thresholds["rel_tol"]}
        if ref > 0 and spread > CRITERIA["consistency"].thresholds["rel_tol"]:
            code = 1
    path = io.write_json(out / "rates.json", payload)
    io.write_manifest(out, "rate", _config_record(args), None, [path])
    for name, r in results.items():
        print(f"{name:>22}: total {r.total:.8g} (bulk {r.bulk:.6g}, left {r.left_boundary:.6g}, "
              f"right {r.right_boundary:.6g})")
    print(f"output in {out}")
    return code


def _report(args, report: verify.ExperimentReport, command: str) -> int:
    out = _out(args)
    files = report.write(out)
    io.write_manifest(out, command, _config_record(args), getattr(args, "seed", None), files)
    print(report.summary())
    print(f"output in {out}")
    return 0 if report.passed else 1


def cmd_entropy(args) -> int:
    horizon = _positive("horizon", args.horizon)
    p = _params(args, args.n)
    rho0 = io.named_profile(args.profile, p)
    report = verify.entropy_identity(p, io.named_tilt(args.tilt), int(args.n), int(args.replicas),
                                     horizon, rho0=rho0, m_cells=int(args.m_cells),
                                     seed=int(args.seed), n_jobs=int(args.threads))
    return _report(args, report, "entropy")


def cmd_converge(args) -> int:
    horizon = _positive("horizon", args.horizon)
    p = _params(args)
    report = verify.hydro_convergence(p, io.named_profile(args.profile, p), _ints(args.n_list),
                                      int(args.replicas), horizon, m_cells=int(args.m_cells),
                                      seed=int(args.seed), n_jobs=int(args.threads))
    return _report(args, report, "converge")


def cmd_contract(args) -> int:
    horizon = _positive("horizon", args.horizon)
    p = _params(args)
    report = verify.contraction_check(p, io.named_profile(args.profile_a, p),
                                      io.named_profile(args.profile_b, p),
                                      Grid(int(args.m_cells), horizon))
    return _report(args, report, "contract")


def cmd_equilibrium(args) -> int:
    rho = float(args.rho)
    p = ModelParams(a=float(args.a), alpha=rho, beta=rho, n_sites=int(args.n))
    report = verify.equilibrium_check(p)
    m = report.metrics
    print(f"stationarity residual {m['stationarity_residual']:.3e}, "
          f"detailed balance residual {m['detailed_balance_residual']:.3e}")
    if args.output_dir:
        return _report(args, report, "equilibrium")
    return 0 if report.passed else 1


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with option values")
    common.add_argument("--output-dir", default="runs",
                        help="root under which a <timestamp>_seed<seed> run directory is created")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="maximum parallel workers")
    common.add_argument("--a", type=float, default=1.0, help="interaction strength (> -1/2)")
    common.add_argument("--alpha", type=float, default=0.3, help="left reservoir density")
    common.add_argument("--beta", type=float, default=0.7, help="right reservoir density")

    parser = argparse.ArgumentParser(prog="exclusion-ldp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="particle system replicas")
    s.add_argument("--n", type=int, default=64, help="scale N (2N-1 sites)")
    s.add_argument("--horizon", type=float, default=0.5)
    s.add_argument("--replicas", type=int, default=10)
    s.add_argument("--boxes", type=int, default=None, help="profile boxes (default about 16N/256 sites each)")
    s.add_argument("--snapshots", type=int, default=6, help="equally spaced snapshot count")
    s.add_argument("--profile", default="stationary", help="initial profile name")
    s.add_argument("--tilt", default="zero", help="control field, e.g. sine:1.0")
    s.add_argument("--sup-norm-bound", type=float, default=None)
    s.add_argument("--boundary-sign", type=float, default=1.0, choices=(1.0, -1.0))
    s.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("solve-pde", cmd_solve_pde, "hydrodynamic equation"),
                              ("solve-tilted", cmd_solve_tilted, "controlled equation")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--m-cells", type=int, default=128)
        s.add_argument("--horizon", type=float, default=0.5)
        s.add_argument("--n-saves", type=int, default=100)
        s.add_argument("--profile", default="stationary")
        if name == "solve-tilted":
            s.add_argument("--tilt", default="sine:1.0")
        s.set_defaults(func=func)

    s = sub.add_parser("rate", parents=[common], help="large-deviation cost of a trajectory CSV")
    s.add_argument("--trajectory", required=True, help="CSV written by solve-pde or solve-tilted")
    s.add_argument("--method", default="all", choices=["all", *METHODS])
    s.add_argument("--window", default=None, help="t0,t1 sub-window")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("entropy", parents=[common], help="relative entropy of tilted paths vs rate")
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--replicas", type=int, default=200)
    s.add_argument("--horizon", type=float, default=0.5)
    s.add_argument("--tilt", default="sine:1.0")
    s.add_argument("--profile", default="stationary")
    s.add_argument("--m-cells", type=int, default=256)
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("converge", parents=[common], help="hydrodynamic limit in L1")
    s.add_argument("--n-list", default="64,128,256")
    s.add_argument("--replicas", type=int, default=100)
    s.add_argument("--horizon", type=float, default=0.5)
    s.add_argument("--profile", default="step:0.8,0.2")
    s.add_argument("--m-cells", type=int, default=512)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("contract", parents=[common], help="L1 contraction of two solutions")
    s.add_argument("--profile-a", default="constant:0")
    s.add_argument("--profile-b", default="constant:1")
    s.add_argument("--m-cells", type=int, default=128)
    s.add_argument("--horizon", type=float, default=5.0)
    s.set_defaults(func=cmd_contract)

    s = sub.add_parser("equilibrium", parents=[common], help="reversibility of the product measure")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--rho", type=float, default=0.5)
    s.set_defaults(func=cmd_equilibrium, output_dir=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv, args) -> argparse.Namespace:
    with open(args.config, "rb") as fh:
        tree = tomllib.load(fh)
    values = {k: v for k, v in tree.items() if not isinstance(v, dict)}
    section = tree.get(args.command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config entry {args.command!r} must be a table")
    values.update(section)
    known = set(vars(args))
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        if int(args.threads) < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except (UsageError, ValueError, OSError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemeError, MajorantViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
