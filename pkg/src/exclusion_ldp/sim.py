"""Exact continuous-time simulation of the boundary-driven exclusion process.

Untilted runs are plain Gillespie; tilted runs use Poisson thinning against a
state-dependent, time-constant majorant and accumulate the log Radon-Nikodym
derivative of the tilted path law with respect to the untilted one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .model import ModelParams, _check_config
from .tilt import TiltSchedule

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class MajorantViolation(RuntimeError):
    """The declared bound on the control field was smaller than its actual size."""


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    horizon: float
    seed: int = 0
    replica_count: int = 1
    profile_boxes: int | None = None
    snapshot_times: Sequence[float] = field(default_factory=tuple)
    record_events: bool = False
    max_events: int = 1_000_000
    quadrature_step: float = 1e-2

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.replica_count < 1:
            raise ValueError("replica_count must be >= 1")
        boxes = self.boxes
        if not 1 <= boxes <= self.params.n_lattice:
            raise ValueError(f"profile_boxes must lie in [1, {self.params.n_lattice}]")
        times = np.asarray(self.snapshot_times, dtype=float)
        if np.any(times < 0) or np.any(times > self.horizon) or np.any(np.diff(times) < 0):
            raise ValueError("snapshot times must be sorted and inside [0, horizon]")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in times))

    @property
    def boxes(self) -> int:
        return self.params.n_lattice if self.profile_boxes is None else int(self.profile_boxes)


@dataclass
class PathRecord:
    params: ModelParams
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    box_edges: np.ndarray
    log_rn: float
    log_rn_jumps: float
    log_rn_integral: float
    n_events: int
    n_proposals: int
    final_config: np.ndarray
    jump_times: np.ndarray | None = None
    event_kind: np.ndarray | None = None
    event_site: np.ndarray | None = None
    worst_ratio: float = 0.0

    @property
    def events(self) -> list[tuple[str, int]]:
        if self.event_kind is None:
            return []
        names = ("exchange", "flip")
        return [(names[k], int(s)) for k, s in zip(self.event_kind, self.event_site)]

    @property
    def box_centers(self) -> np.ndarray:
        return box_centers(self.params, self.box_edges)


def box_edges(n_lattice: int, boxes: int) -> np.ndarray:
    """Site-index edges of contiguous boxes; the last box absorbs the remainder."""
    size = n_lattice // boxes
    edges = np.arange(boxes + 1) * size
    edges[-1] = n_lattice
    return edges


def box_centers(p: ModelParams, edges: np.ndarray) -> np.ndarray:
    sites = p.sites / p.n_sites
    return np.array([sites[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])])


def sample_product_measure(p: ModelParams, rho0, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli occupations with mean rho0(x/N)."""
    x = p.sites / p.n_sites
    dens = np.broadcast_to(np.asarray(rho0(x) if callable(rho0) else rho0, dtype=float), x.shape)
    if np.any(dens < 0) or np.any(dens > 1) or not np.all(np.isfinite(dens)):
        raise ValueError("initial density profile must take values in [0, 1]")
    return (rng.random(x.size) < dens).astype(np.uint8)


def _run(cfg: SimConfig, eta0, tilt: TiltSchedule | None, seed: int) -> PathRecord:
    p = cfg.params
    eta = np.array(_check_config(p, eta0), dtype=np.uint8)
    if np.any(eta > 1):
        raise ValueError("configuration entries must be 0 or 1")
    edges = box_edges(p.n_lattice, cfg.boxes)
    snap_t = np.asarray(cfg.snapshot_times, dtype=float)

    if tilt is None or tilt.is_zero:
        g_site = np.zeros((0, p.n_lattice))
        kinds = np.zeros(0, dtype=np.int64)
        t0 = t1 = amp = breaks = np.zeros(0)
        bond_b = flip_b = 0.0
        sign = 1.0
        t_start, t_frozen = np.inf, np.inf
    else:
        g_site, kinds, t0, t1, amp, breaks = tilt.kernel_arrays(p.n_sites)
        bond_b, flip_b = tilt.majorant_exponents(p.n_sites, cfg.horizon)
        sign = float(tilt.boundary_sign)
        t_start, t_frozen = tilt.activation_time(), tilt.freeze_time()

    cap = cfg.max_events if cfg.record_events else 0
    ev_t = np.zeros(cap)
    ev_k = np.zeros(cap, dtype=np.int8)
    ev_s = np.zeros(cap, dtype=np.int64)
    status, n_ev, n_prop, lj, li, snaps, worst = _kernels.simulate_path(
        eta, p.n_sites, p.a, p.alpha, p.beta, float(cfg.horizon), int(seed),
        snap_t, edges[:-1].astype(np.int64), edges[1:].astype(np.int64),
        np.ascontiguousarray(g_site, dtype=float), kinds, t0, t1, amp, sign,
        bond_b, flip_b, breaks, _GL_X, _GL_W, float(cfg.quadrature_step),
        float(t_start), float(t_frozen),
        cfg.record_events, ev_t, ev_k, ev_s,
    )
    if status == _kernels.STATUS_MAJORANT_VIOLATED:
        raise MajorantViolation(
            f"tilted rate exceeded the majorant (ratio {worst:.6g}); "
            f"bond exponent bound {bond_b:.6g}, boundary bound {flip_b:.6g}"
        )
    if status == _kernels.STATUS_PARTICLE_COUNT:
        raise RuntimeError("particle bookkeeping mismatch: an exchange changed the particle count")
    if status == _kernels.STATUS_EVENT_BUFFER_FULL:
        raise RuntimeError(f"event buffer full ({cap}); raise max_events or disable recording")
    rec = PathRecord(
        params=p,
        snapshot_times=snap_t,
        snapshots=snaps,
        box_edges=edges,
        log_rn=float(lj - li),
        log_rn_jumps=float(lj),
        log_rn_integral=float(li),
        n_events=int(n_ev),
        n_proposals=int(n_prop),
        final_config=eta,
        worst_ratio=float(worst),
    )
    if cfg.record_events:
        rec.jump_times = ev_t[:n_ev].copy()
        rec.event_kind = ev_k[:n_ev].copy()
        rec.event_site = ev_s[:n_ev] - (p.n_sites - 1)
    return rec


def run_untilted(cfg: SimConfig, eta0, seed: int | None = None) -> PathRecord:
    """Gillespie trajectory of the untilted chain starting from ``eta0``."""
    return _run(cfg, eta0, None, cfg.seed if seed is None else seed)


def run_tilted(cfg: SimConfig, eta0, tilt: TiltSchedule, seed: int | None = None) -> PathRecord:
    """Trajectory of the chain with exponentially tilted rates.

    Exchanges of bond (x, x+1) are multiplied by exp(-(eta(x+1)-eta(x)) dG) and
    boundary flips by exp(s (1 - 2 eta) G) at the boundary site, where s is
    ``tilt.boundary_sign``.  With a vanishing field the path coincides with
    :func:`run_untilted` for the same seed and ``log_rn`` is exactly zero.
    """
    return _run(cfg, eta0, tilt, cfg.seed if seed is None else seed)


def replica_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def _one_replica(cfg, rho0, tilt, child):
    rng = np.random.default_rng(child)
    eta0 = sample_product_measure(cfg.params, rho0, rng)
    kernel_seed = int(child.generate_state(1, dtype=np.uint32)[0])
    return _run(cfg, eta0, tilt, kernel_seed)


def run_replicas(cfg: SimConfig, rho0, tilt: TiltSchedule | None = None,
                 n_jobs: int = 1) -> list[PathRecord]:
    """Independent replicas, each with its own stream spawned from ``cfg.seed``.

    Initial configurations are drawn from the product measure with profile
    ``rho0``.  Results do not depend on ``n_jobs``.
    """
    children = replica_seeds(cfg.seed, cfg.replica_count)
    if n_jobs == 1:
        return [_one_replica(cfg, rho0, tilt, c) for c in children]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(_one_replica)(cfg, rho0, tilt, c) for c in children)


def empirical_pairing(eta, p: ModelParams, testfn: Callable) -> float:
    """Integral of ``testfn`` against the measure with mass 1/N per particle."""
    eta = _check_config(p, eta)
    x = p.sites / p.n_sites
    vals = np.broadcast_to(np.asarray(testfn(x), dtype=float), x.shape)
    return float(np.dot(eta.astype(float), vals) / p.n_sites)


def _snapshot_index(record: PathRecord, t: float) -> int:
    hits = np.flatnonzero(np.isclose(record.snapshot_times, t, rtol=0.0, atol=1e-12))
    if hits.size == 0:
        raise KeyError(f"no snapshot recorded at t={t}")
    return int(hits[0])


def profile_extract(record: PathRecord, t: float) -> np.ndarray:
    return record.snapshots[_snapshot_index(record, t)].copy()


def aggregate_profiles(records: Sequence[PathRecord], t: float) -> tuple[np.ndarray, np.ndarray]:
    """Replica mean and standard error of the box profile at time t."""
    stack = np.vstack([profile_extract(r, t) for r in records])
    mean = stack.mean(axis=0)
    if len(records) < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, stack.std(axis=0, ddof=1) / np.sqrt(len(records))


def log_rn_statistics(records: Sequence[PathRecord]) -> tuple[float, float]:
    """Mean and standard error of log_rn / N over replicas."""
    vals = np.array([r.log_rn / r.params.n_sites for r in records])
    se = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else np.nan
    return float(vals.mean()), float(se)
