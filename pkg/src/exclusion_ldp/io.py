"""Named profiles and tilts, CSV/JSON artifacts and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import subprocess
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .model import ModelParams
from .pde import DensityField, stationary_profile
from .rate import TrajectoryData
from .tilt import TiltSchedule, TiltTerm

_FLOAT = "%.17g"


# ---------------------------------------------------------------- profiles

def smootherstep(s):
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s**3 * (10.0 + s * (-15.0 + 6.0 * s))


def named_profile(spec: str, params: ModelParams | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Initial density profile from a short name.

    constant:c, step:c1,c2 (c1 on x<0, c2 on x>=0), cosine (0.5 + 0.3 cos(pi x)),
    stationary (needs params), file:path.csv (columns x,value; linear interpolation).
    """
    name, _, arg = spec.partition(":")
    if name == "constant":
        c = _density(arg)
        return lambda x: np.full(np.shape(x), c)
    if name == "step":
        parts = arg.split(",")
        if len(parts) != 2:
            raise ValueError("step profile needs two values: step:c1,c2")
        c1, c2 = (_density(v) for v in parts)
        return lambda x: np.where(np.asarray(x) < 0.0, c1, c2)
    if name == "cosine":
        return lambda x: 0.5 + 0.3 * np.cos(np.pi * np.asarray(x, dtype=float))
    if name == "stationary":
        if params is None:
            raise ValueError("the stationary profile needs model parameters")
        return stationary_profile(params)
    if name == "file":
        return read_profile_csv(arg)
    raise ValueError(f"unknown profile {spec!r}")


def _density(text: str) -> float:
    try:
        c = float(text)
    except ValueError:
        raise ValueError(f"not a number: {text!r}") from None
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"density {c} outside [0, 1]")
    return c


def read_profile_csv(path) -> Callable[[np.ndarray], np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if "x" not in data.dtype.names or "value" not in data.dtype.names:
        raise ValueError(f"{path}: expected columns x,value")
    order = np.argsort(data["x"])
    xs, vs = np.asarray(data["x"])[order], np.asarray(data["value"])[order]
    if np.any(vs < 0) or np.any(vs > 1):
        raise ValueError(f"{path}: profile values outside [0, 1]")
    return lambda x: np.interp(x, xs, vs)


_SHAPES = {
    "sine": lambda x: np.sin(0.5 * np.pi * np.asarray(x, dtype=float)),
    "cosine": lambda x: np.cos(0.5 * np.pi * np.asarray(x, dtype=float)),
    "x": lambda x: np.asarray(x, dtype=float),
    "one": lambda x: np.ones(np.shape(x)),
}


def named_tilt(spec: str, sup_norm_bound: float | None = None) -> TiltSchedule:
    """Control field from 'shape:amplitude[:kind[:t_on[:t_full]]]'; terms joined by '+'.

    Shapes: sine (sin(pi x/2)), cosine (cos(pi x/2)), x, one.  Kinds: ramp
    (default, t_on=0.05, t_full=0.25), linear, constant.  'zero' gives no field.
    """
    if spec in ("", "zero", "none"):
        return TiltSchedule((), sup_norm_bound=sup_norm_bound)
    terms = []
    for chunk in spec.split("+"):
        fields = chunk.strip().split(":")
        shape = fields[0]
        if shape not in _SHAPES:
            raise ValueError(f"unknown tilt shape {shape!r}; choose from {sorted(_SHAPES)}")
        amp = float(fields[1]) if len(fields) > 1 else 1.0
        kind = fields[2] if len(fields) > 2 else "ramp"
        t_on = float(fields[3]) if len(fields) > 3 else 0.05
        t_full = float(fields[4]) if len(fields) > 4 else 0.25
        terms.append(TiltTerm(_SHAPES[shape], kind=kind, t_on=t_on, t_full=t_full, amplitude=amp))
    return TiltSchedule(tuple(terms), sup_norm_bound=sup_norm_bound)


# ---------------------------------------------------------------- writing

def _fmt(v) -> str:
    return _FLOAT % v


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_profiles_csv(path, times, centers, means, stderrs) -> Path:
    """Long-format box profiles: t, box_center, mean_density, stderr."""
    rows = []
    for t, m, s in zip(times, means, stderrs):
        rows.extend((float(t), float(c), float(mi), float(si)) for c, mi, si in zip(centers, m, s))
    return write_rows(path, ("t", "box_center", "mean_density", "stderr"), rows)


def write_field_csv(path, f: DensityField) -> Path:
    """Space-time field as t, x, u plus the exact scheme tendency dudt."""
    rows = []
    for k, t in enumerate(f.t):
        rows.extend((float(t), float(x), float(u), float(d))
                    for x, u, d in zip(f.x, f.u[k], f.dudt[k]))
    path = write_rows(path, ("t", "x", "u", "dudt"), rows)
    write_json(Path(path).with_suffix(".json"), field_metadata(f))
    return path


def field_metadata(f: DensityField) -> dict:
    p = f.params
    return {
        "params": params_dict(p),
        "grid": {"m_cells": int(f.x.size), "dx": f.dx, "dt": f.dt, "steps": int(f.n_steps),
                 "saves": int(f.t.size), "horizon": float(f.t[-1])},
        "scheme": f.metadata.get("scheme", ""),
        "cfl": {"diffusive": f.metadata.get("diffusive_cfl")},
        "max_clip": f.max_clip,
        "max_mass_residual": f.max_mass_residual,
        "controlled": f.H is not None,
    }


def read_field_csv(path, params: ModelParams | None = None) -> TrajectoryData:
    """Trajectory from a t,x,u[,dudt] CSV; parameters come from the JSON sidecar if absent."""
    path = Path(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names or ()
    if not {"t", "x", "u"} <= set(names):
        raise ValueError(f"{path}: expected columns t,x,u")
    t_all = np.asarray(data["t"])
    times = np.unique(t_all)
    m = t_all.size // times.size
    if m * times.size != t_all.size:
        raise ValueError(f"{path}: ragged space-time table")
    order = np.lexsort((data["x"], t_all))
    x = np.asarray(data["x"])[order][:m]
    u = np.asarray(data["u"])[order].reshape(times.size, m)
    dudt = np.asarray(data["dudt"])[order].reshape(times.size, m) if "dudt" in names else None
    if params is None:
        side = path.with_suffix(".json")
        if not side.exists():
            raise ValueError(f"{path}: no model parameters given and no sidecar {side.name}")
        meta = json.loads(side.read_text())["params"]
        params = ModelParams(a=meta["a"], alpha=meta["alpha"], beta=meta["beta"],
                             n_sites=meta.get("n_sites", 2))
    return TrajectoryData(params=params, t=times, x=x, u=u, dudt=dudt)


def params_dict(p: ModelParams) -> dict:
    return {"a": p.a, "alpha": p.alpha, "beta": p.beta, "n_sites": p.n_sites}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def digest(obj) -> str:
    """sha256 of the canonical JSON form of ``obj``."""
    text = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- manifests

def version_string() -> str:
    """git-describe-style version, falling back to the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5, check=True)
        desc = out.stdout.strip()
        if desc:
            return f"v{__version__}-g{desc}" if not desc.startswith("v") else desc
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def write_manifest(run_dir, command: str, config: dict, seed: int | None, outputs) -> Path:
    """Manifest with deterministic content plus a separate timestamp block."""
    run_dir = Path(run_dir)
    write_json(run_dir / "manifest.json", {
        "command": command,
        "config": config,
        "seed": seed,
        "version": version_string(),
        "outputs": sorted(str(Path(o).relative_to(run_dir)) for o in outputs),
    })
    stamp = run_dir / "timestamp.json"
    stamp.write_text(json.dumps({"created": _dt.datetime.now(_dt.timezone.utc).isoformat()}) + "\n")
    return run_dir / "manifest.json"


def timestamped_dir(root, seed: int | None) -> Path:
    """Create and return a fresh run directory root/<timestamp>_seed<seed>[-k]."""
    now = _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    base = Path(root) / f"{now}_seed{seed if seed is not None else 'none'}"
    path, k = base, 0
    while True:
        try:
            path.mkdir(parents=True)
            return path
        except FileExistsError:
            k += 1
            path = base.with_name(f"{base.name}-{k}")
