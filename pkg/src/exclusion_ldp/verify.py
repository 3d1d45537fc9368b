"""Experiments tying the modules together, each returning an ExperimentReport."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io
from .criteria import CRITERIA, CRITERIA_VERSION, REFERENCE_TILT, threshold
from .model import (ModelParams, build_generator_matrix, gradient_form_current,
                    instantaneous_current, product_measure_weights)
from .pde import Grid, march, solve_hydro, solve_tilted, stationary_profile
from .rate import METHODS, TrajectoryData, explicit_rate
from .sim import SimConfig, aggregate_profiles, box_edges, log_rn_statistics, run_replicas
from .tilt import TiltSchedule, TiltTerm


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    seed: int | None
    metrics: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)
    runtime: float = 0.0
    artifacts: dict = field(default_factory=dict, repr=False)

    @property
    def inputs_digest(self) -> str:
        return io.digest({"name": self.name, "inputs": self.inputs, "seed": self.seed,
                          "criteria_version": CRITERIA_VERSION})

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.criteria.values())

    def to_dict(self) -> dict:
        return {"name": self.name, "inputs": self.inputs, "inputs_digest": self.inputs_digest,
                "seed": self.seed, "criteria_version": CRITERIA_VERSION,
                "metrics": self.metrics, "criteria": self.criteria, "passed": self.passed,
                "runtime_seconds": self.runtime}

    def write(self, run_dir) -> list[Path]:
        """Report JSON plus one CSV per artifact table; returns the written paths."""
        run_dir = Path(run_dir)
        out = [io.write_json(run_dir / f"{self.name}.json", self.to_dict())]
        for key, (header, rows) in sorted(self.artifacts.items()):
            out.append(io.write_rows(run_dir / f"{self.name}_{key}.csv", header, rows))
        return out

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items() if np.isscalar(v))
        return f"[{status}] {self.name}: {body}"


def _short(v):
    return f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# ------------------------------------------------------------------ reference setup

def reference_params(n_sites: int = 128) -> ModelParams:
    r = REFERENCE_TILT
    return ModelParams(a=r["a"], alpha=r["alpha"], beta=r["beta"], n_sites=n_sites)


def reference_tilt(scale: float = 1.0) -> TiltSchedule:
    """Smooth control vanishing before t_on: scale * ramp(t) * sin(pi x / 2)."""
    r = REFERENCE_TILT
    term = TiltTerm(lambda x: np.sin(0.5 * np.pi * np.asarray(x, dtype=float)), kind="ramp",
                    t_on=r["t_on"], t_full=r["t_full"], amplitude=scale * r["amplitude"])
    return TiltSchedule((term,))


def reference_trajectory(m_cells: int = 512, n_saves: int = 200, scale: float = 1.0):
    """Controlled trajectory used by the consistency and additivity checks."""
    p = reference_params()
    tilt = reference_tilt(scale)
    f = solve_tilted(p, Grid(m_cells, REFERENCE_TILT["horizon"], n_saves=n_saves),
                     stationary_profile(p), tilt)
    return p, tilt, f


# ------------------------------------------------------------------ lattice checks

def gradient_identity_check(a_values: Sequence[float] = (-0.4, 0.0, 1.0),
                            random_configs: int | None = None, n_sites: int = 32,
                            seed: int = 0) -> ExperimentReport:
    """Compare the bond current with its gradient form on all local patterns and random states."""
    tol = threshold("gradient_identity", "tol")
    random_configs = threshold("gradient_identity", "random_configs") if random_configs is None \
        else random_configs
    rng = np.random.default_rng(seed)
    worst_local = worst_random = 0.0
    with _Timer() as clock:
        for a in a_values:
            small = ModelParams(a, 0.5, 0.5, 4)
            for pattern in itertools.product((0, 1), repeat=4):
                eta = np.zeros(small.n_lattice, dtype=np.uint8)
                eta[2:6] = pattern  # sites -1, 0, 1, 2 around bond 0
                diff = instantaneous_current(small, eta, 0) - gradient_form_current(small, eta, 0)
                worst_local = max(worst_local, abs(diff))
            big = ModelParams(a, 0.5, 0.5, n_sites)
            bonds = range(-n_sites + 2, n_sites - 2)
            for _ in range(random_configs):
                eta = (rng.random(big.n_lattice) < rng.random()).astype(np.uint8)
                x = int(rng.choice(bonds))
                diff = instantaneous_current(big, eta, x) - gradient_form_current(big, eta, x)
                worst_random = max(worst_random, abs(diff))
    return ExperimentReport(
        "gradient_identity", {"a_values": list(a_values), "random_configs": random_configs,
                              "n_sites": n_sites}, seed,
        metrics={"max_local_error": worst_local, "max_random_error": worst_random},
        criteria={"local_patterns": worst_local <= tol, "random_configs": worst_random <= tol},
        runtime=clock.elapsed)


def equilibrium_check(p: ModelParams) -> ExperimentReport:
    """Stationarity and detailed balance of the product measure when both reservoirs agree."""
    if p.alpha != p.beta:
        raise ValueError("equilibrium check needs equal reservoir densities")
    if p.n_sites > 5:
        raise ValueError("equilibrium check enumerates states; n_sites must be <= 5")
    tol = threshold("reversibility", "residual")
    with _Timer() as clock:
        L = build_generator_matrix(p)
        nu = product_measure_weights(p, p.alpha)
        scale = np.abs(np.diag(L)).max()
        stationarity = float(np.abs(nu @ L).max() / scale)
        flow = nu[:, None] * L
        off = ~np.eye(L.shape[0], dtype=bool)
        balance = float(np.abs(flow - flow.T)[off].max() / scale)
        positive = L[off][L[off] != 0.0]
        min_rate = float(positive.min())
    return ExperimentReport(
        "equilibrium", {"params": io.params_dict(p)}, None,
        metrics={"stationarity_residual": stationarity, "detailed_balance_residual": balance,
                 "min_positive_rate": min_rate},
        criteria={"stationary": stationarity < tol, "detailed_balance": balance < tol,
                  "rates_positive": min_rate > 0.0},
        runtime=clock.elapsed)


def reversibility_suite() -> ExperimentReport:
    th = CRITERIA["reversibility"].thresholds
    worst_s = worst_b = 0.0
    min_rate = np.inf
    rows = []
    with _Timer() as clock:
        for n, c, a in itertools.product(th["n_values"], th["densities"], th["a_values"]):
            r = equilibrium_check(ModelParams(a, c, c, n))
            m = r.metrics
            rows.append((n, float(c), float(a), m["stationarity_residual"],
                         m["detailed_balance_residual"]))
            worst_s = max(worst_s, m["stationarity_residual"])
            worst_b = max(worst_b, m["detailed_balance_residual"])
            min_rate = min(min_rate, m["min_positive_rate"])
    return ExperimentReport(
        "reversibility", dict(th), None,
        metrics={"max_stationarity_residual": worst_s, "max_detailed_balance_residual": worst_b,
                 "min_positive_rate": min_rate},
        criteria={"stationary": worst_s < th["residual"], "detailed_balance": worst_b < th["residual"],
                  "rates_positive": min_rate > 0, "runtime": clock.elapsed < th["max_seconds"]},
        runtime=clock.elapsed,
        artifacts={"cases": (("n", "c", "a", "stationarity", "detailed_balance"), rows)})


# ------------------------------------------------------------------ hydrodynamic limit

def box_count(n_sites: int, sites_per_box_at_256: int = 16) -> int:
    """Boxes of about 16 N / 256 sites; the last one absorbs the remainder."""
    size = max(1, int(round(sites_per_box_at_256 * n_sites / 256)))
    return max(1, (2 * n_sites - 1) // size)


def hydro_convergence(p: ModelParams, rho0, n_list: Sequence[int], replicas: int, horizon: float,
                      snapshot_times: Sequence[float] | None = None, m_cells: int = 512,
                      seed: int = 0, n_jobs: int = 1,
                      sites_per_box_at_256: int = 16) -> ExperimentReport:
    """Replica-averaged box profiles against the PDE, in L1, for increasing N."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, horizon, 6)
    times = np.asarray(snapshot_times, dtype=float)
    max_error = threshold("hydro_limit", "max_error")
    # save points every horizon / n_saves must hit every snapshot time
    n_saves = 1000
    grid = Grid(m_cells, horizon, n_saves=n_saves)
    with _Timer() as clock:
        ref = solve_hydro(p, grid, rho0)
        ref_idx = [int(np.argmin(np.abs(ref.t - t))) for t in times]
        if max(abs(ref.t[i] - t) for i, t in zip(ref_idx, times)) > 1e-9:
            raise ValueError("snapshot times must be multiples of horizon / 1000")
        errors, errors0, rows = [], [], []
        for n in n_list:
            pn = p.with_n(n)
            boxes = box_count(n, sites_per_box_at_256)
            cfg = SimConfig(pn, horizon, seed=seed + n, replica_count=replicas,
                            profile_boxes=boxes, snapshot_times=tuple(times))
            recs = run_replicas(cfg, rho0, n_jobs=n_jobs)
            edges = box_edges(pn.n_lattice, boxes)
            sites = pn.sites / n
            widths = np.diff(edges) / n
            errs = []
            for t, k in zip(times, ref_idx):
                mean, se = aggregate_profiles(recs, t)
                pde_sites = np.interp(sites, ref.x, ref.u[k])
                pde_box = np.array([pde_sites[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])])
                errs.append(float(np.sum(np.abs(mean - pde_box) * widths)))
                centers = recs[0].box_centers
                rows.extend((n, float(t), float(c), float(m), float(s), float(q))
                            for c, m, s, q in zip(centers, mean, se, pde_box))
            errs = np.array(errs)
            errors0.append(float(errs[times == 0.0][0]) if np.any(times == 0.0) else np.nan)
            errors.append(float(errs[times > 0.0].mean()))
    decreasing = bool(np.all(np.diff(errors) < 0))
    return ExperimentReport(
        "hydro_convergence",
        {"params": io.params_dict(p), "n_list": n_list, "replicas": replicas, "horizon": horizon,
         "snapshot_times": times, "m_cells": m_cells, "sites_per_box_at_256": sites_per_box_at_256},
        seed,
        metrics={"errors": errors, "errors_t0": errors0, "final_error": errors[-1],
                 "decreasing": decreasing, "pde_max_mass_residual": ref.max_mass_residual,
                 "pde_max_clip": ref.max_clip},
        criteria={"decreasing_in_N": decreasing, "final_error_below": errors[-1] < max_error},
        runtime=clock.elapsed,
        artifacts={"profiles": (("n", "t", "box_center", "mean_density", "stderr", "pde_density"),
                                rows)})


# ------------------------------------------------------------------ entropy identity

def entropy_identity(p: ModelParams, tilt: TiltSchedule, n_sites: int, replicas: int,
                     horizon: float, rho0=None, m_cells: int = 256, seed: int = 0,
                     n_jobs: int = 1) -> ExperimentReport:
    """Mean of log_rn / N under the tilted dynamics against the explicit rate of the controlled PDE."""
    if not tilt.is_zero and not tilt.activation_time() > 0.0:
        raise ValueError("the control must vanish on an initial time interval")
    th = CRITERIA["entropy_identity"].thresholds
    pn = p.with_n(n_sites)
    if rho0 is None:
        rho0 = stationary_profile(pn)
    with _Timer() as clock:
        f = solve_tilted(pn, Grid(m_cells, horizon), rho0, tilt)
        rate, _ = explicit_rate(TrajectoryData.from_field(f))
        cfg = SimConfig(pn, horizon, seed=seed, replica_count=replicas, profile_boxes=1)
        recs = run_replicas(cfg, rho0, tilt=tilt, n_jobs=n_jobs)
        mean, se = log_rn_statistics(recs)
    target = rate.total
    gap = abs(mean - target)
    band = th["stderr_mult"] * se + th["rel_band"] * target
    return ExperimentReport(
        "entropy_identity",
        {"params": io.params_dict(pn), "replicas": replicas, "horizon": horizon,
         "m_cells": m_cells, "boundary_sign": tilt.boundary_sign},
        seed,
        metrics={"mean_log_rn_per_site": mean, "stderr": se, "rate_explicit": target,
                 "gap": gap, "relative_gap": gap / target if target > 0 else 0.0, "band": band,
                 "pde_max_mass_residual": f.max_mass_residual},
        criteria={"within_band": gap <= band},
        runtime=clock.elapsed,
        artifacts={"log_rn": (("replica", "log_rn_per_site"),
                              [(i, r.log_rn / n_sites) for i, r in enumerate(recs)])})


# ------------------------------------------------------------------ PDE checks

def contraction_check(p: ModelParams, rho_a, rho_b, grid: Grid) -> ExperimentReport:
    """March two hydrodynamic solutions in lockstep and track their L1 distance."""
    th = CRITERIA["contraction"].thresholds
    dists, times = [], []
    max_res = max_clip = 0.0
    with _Timer() as clock:
        for (k, t, u, ia), (_, _, v, ib) in zip(march(p, grid, rho_a), march(p, grid, rho_b)):
            dists.append(grid.dx * np.abs(u - v).sum())
            times.append(t)
            if k > 0:
                max_res = max(max_res, ia["mass_residual"], ib["mass_residual"])
                max_clip = max(max_clip, ia["clip"], ib["clip"])
    d = np.array(dists)
    t = np.array(times)
    increase = float(max(np.max(np.diff(d)), 0.0)) if d.size > 1 else 0.0
    ratio = float(d[-1] / d[0]) if d[0] > 0 else 0.0
    strictly = bool(np.all(np.diff(d) < 0)) if d[0] > 0 else True
    sq = float(np.trapezoid(d**2, t))
    tail_rate = np.nan
    if d[-1] > 0:
        cut = t >= t[0] + 0.8 * (t[-1] - t[0])
        tail_rate = -float(np.polyfit(t[cut], np.log(d[cut]), 1)[0])
        tail = d[-1] ** 2 / (2.0 * tail_rate) if tail_rate > 0 else np.inf
    else:
        tail = 0.0
    stride = max(1, t.size // 1000)
    return ExperimentReport(
        "contraction",
        {"params": io.params_dict(p), "m_cells": grid.m_cells, "horizon": grid.horizon},
        None,
        metrics={"initial_distance": float(d[0]), "final_distance": float(d[-1]),
                 "final_fraction": ratio, "max_step_increase": increase,
                 "strictly_decreasing": strictly, "tail_decay_rate": tail_rate,
                 "squared_distance_integral": sq + tail, "max_mass_residual": max_res,
                 "max_clip": max_clip},
        criteria={"no_increase": increase <= th["step_slack"],
                  "final_fraction": ratio < th["final_fraction"],
                  "square_integrable": bool(np.isfinite(sq + tail))},
        runtime=clock.elapsed,
        artifacts={"distance": (("t", "l1_distance"), list(zip(t[::stride], d[::stride])))})


def max_principle_check(p: ModelParams, rho0, grid: Grid) -> ExperimentReport:
    """Clip magnitudes and the interior margin min(u, 1-u) on [0.05 T, T]."""
    th = CRITERIA["max_principle"].thresholds
    t_min = th["delta_fraction"] * grid.horizon
    max_clip = max_res = 0.0
    eps = np.inf
    lo, hi = np.inf, -np.inf
    with _Timer() as clock:
        for k, t, u, info in march(p, grid, rho0):
            lo, hi = min(lo, u.min()), max(hi, u.max())
            if k > 0:
                max_clip = max(max_clip, info["clip"])
                max_res = max(max_res, info["mass_residual"])
            if t >= t_min - 1e-12:
                eps = min(eps, float(np.min(np.minimum(u, 1.0 - u))))
    return ExperimentReport(
        "max_principle", {"params": io.params_dict(p), "m_cells": grid.m_cells,
                          "horizon": grid.horizon}, None,
        metrics={"max_clip": max_clip, "epsilon": eps, "min_u": float(lo), "max_u": float(hi),
                 "max_mass_residual": max_res},
        criteria={"clip_small": max_clip < th["clip"], "interior": eps > 0.0,
                  "in_unit_interval": bool(lo >= -1e-12 and hi <= 1 + 1e-12)},
        runtime=clock.elapsed)


# ------------------------------------------------------------------ rate checks

def zero_rate_check(p: ModelParams, rho0, grid: Grid) -> ExperimentReport:
    th = CRITERIA["zero_rate"].thresholds
    with _Timer() as clock:
        f = solve_hydro(p, grid, rho0)
        traj = TrajectoryData.from_field(f)
        totals = {name: fn(traj).total for name, fn in METHODS.items()}
        _, tilt = explicit_rate(traj)
    sup_h = tilt.sup_norm()
    return ExperimentReport(
        "zero_rate", {"params": io.params_dict(p), "m_cells": grid.m_cells,
                      "horizon": grid.horizon}, None,
        metrics={**{f"total_{k}": v for k, v in totals.items()}, "sup_H": sup_h,
                 "max_mass_residual": f.max_mass_residual},
        criteria={"totals_vanish": all(abs(v) <= th["max_total"] for v in totals.values()),
                  "control_vanishes": sup_h <= th["max_sup_H"]},
        runtime=clock.elapsed)


def rate_consistency(traj: TrajectoryData, true_tilt: Callable | None = None) -> ExperimentReport:
    """Four rate methods on one trajectory; optional round trip against the generating control."""
    th = CRITERIA["consistency"].thresholds
    with _Timer() as clock:
        explicit, field_h = explicit_rate(traj)
        results = {"explicit": explicit}
        for name in ("variational", "decomposition", "smooth_decomposition"):
            results[name] = METHODS[name](traj)
        roundtrip = np.nan
        if true_tilt is not None and field_h is not None:
            errs = []
            for k, t in enumerate(field_h.t):
                errs.append(np.abs(field_h.values[k] - true_tilt(t, traj.x)).max())
                errs.append(abs(field_h.left[k] - float(true_tilt(t, -1.0))))
                errs.append(abs(field_h.right[k] - float(true_tilt(t, 1.0))))
            roundtrip = float(max(errs))
    ref = explicit.total
    rel = {name: abs(r.total - ref) / ref if ref > 0 else np.inf for name, r in results.items()}
    totals = [r.total for r in results.values()]
    pairwise = max(abs(x - y) / ref for x in totals for y in totals) if ref > 0 else np.inf
    metrics = {**{f"total_{k}": r.total for k, r in results.items()},
               "max_pairwise_relative": pairwise, "epsilon": traj.epsilon}
    criteria = {"reference_large_enough": ref >= th["min_value"],
                "pairwise_agreement": pairwise <= th["rel_tol"],
                "all_converged": all(r.converged for r in results.values())}
    if true_tilt is not None:
        metrics["roundtrip_sup_error"] = roundtrip
        criteria["roundtrip"] = roundtrip <= th["roundtrip_tol"]
    return ExperimentReport(
        "rate_consistency", {"m_cells": int(traj.x.size), "saves": int(traj.t.size),
                             "params": io.params_dict(traj.params), "window": traj.window},
        None, metrics=metrics, criteria=criteria, runtime=clock.elapsed,
        artifacts={"breakdown": (("method", "bulk", "left", "right", "total"),
                                 [(k, r.bulk, r.left_boundary, r.right_boundary, r.total)
                                  for k, r in results.items()])})


def additivity_check(traj: TrajectoryData) -> ExperimentReport:
    th = CRITERIA["additivity"].thresholds
    t0, t1 = traj.window
    mid = 0.5 * (t0 + t1)
    if not np.any(np.isclose(traj.t, mid, rtol=0, atol=1e-12)):
        raise ValueError("the midpoint of the window must be a saved time")
    with _Timer() as clock:
        whole = explicit_rate(traj)[0].total
        first = explicit_rate(traj.restrict((t0, mid)))[0].total
        second = explicit_rate(traj.restrict((mid, t1)))[0].total
    rel = abs(whole - first - second) / whole if whole > 0 else 0.0
    return ExperimentReport(
        "additivity", {"m_cells": int(traj.x.size), "window": traj.window}, None,
        metrics={"whole": whole, "first_half": first, "second_half": second,
                 "relative_difference": rel},
        criteria={"additive": rel <= th["rel_tol"]}, runtime=clock.elapsed)
