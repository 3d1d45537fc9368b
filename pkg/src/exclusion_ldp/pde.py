"""Finite-volume solvers for the hydrodynamic and controlled equations.

Cells i = 1..M have width dx = 2/M and centres x_i = -1 + (i - 1/2) dx.  The
flux convention is J = D(u) du/dx - 2 sigma(u) dH/dx, so that du/dt = dJ/dx;
at x = -1 the flux is -p_alpha(u_1, H(-1)) and at x = 1 it is
p_beta(u_M, H(1)).  Boundary densities use the nearest cell value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, mobility, potential

CLIP_TOL_HYDRO = 1e-10
CLIP_TOL_TILTED = 1e-12


class SchemeError(RuntimeError):
    """Raised when a stability or range requirement of the scheme fails."""


def boundary_p(rho: float, u, m):
    """(1-u) rho e^m - u (1-rho) e^-m, written so that m = 0 gives rho - u exactly."""
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    return (rho - u) + (1.0 - u) * rho * np.expm1(m) - u * (1.0 - rho) * np.expm1(-m)


def boundary_p_dm(rho: float, u, m):
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    return (1.0 - u) * rho * np.exp(m) + u * (1.0 - rho) * np.exp(-m)


def boundary_c(rho: float, u, m):
    """Boundary cost (1-u) rho (1 - e^m + m e^m) + u (1-rho)(1 - e^-m - m e^-m); zero at m = 0."""
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    return (1.0 - u) * rho * (m * np.exp(m) - np.expm1(m)) + u * (1.0 - rho) * (
        -np.expm1(-m) - m * np.exp(-m)
    )


@dataclass(frozen=True)
class Grid:
    """Cell grid and explicit time stepping on [0, horizon].

    If ``dt`` is omitted the largest step allowed by the diffusive CFL bound
    that fits an integer number of steps between ``n_saves`` save points is used.
    """

    m_cells: int
    horizon: float
    dt: float | None = None
    n_saves: int = 200
    cfl_safety: float = 0.4

    def __post_init__(self):
        if self.m_cells < 3:
            raise ValueError("need at least 3 cells")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_saves < 1:
            raise ValueError("n_saves must be >= 1")

    @property
    def dx(self) -> float:
        return 2.0 / self.m_cells

    @property
    def x(self) -> np.ndarray:
        return -1.0 + (np.arange(self.m_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return -1.0 + np.arange(self.m_cells + 1) * self.dx

    def dt_limit(self, p: ModelParams) -> float:
        d_max = max(1.0, 1.0 + 2.0 * p.a)
        return self.cfl_safety * self.dx**2 / d_max

    def schedule(self, p: ModelParams) -> tuple[float, int, int]:
        """(dt, total steps, steps between saves)."""
        limit = self.dt_limit(p)
        if self.dt is None:
            stride = int(np.ceil(self.horizon / limit / self.n_saves))
            steps = stride * self.n_saves
            return self.horizon / steps, steps, stride
        if self.dt > limit * (1 + 1e-12):
            raise SchemeError(f"dt={self.dt:.3e} violates the CFL bound {limit:.3e}")
        steps = int(round(self.horizon / self.dt))
        if not np.isclose(steps * self.dt, self.horizon, rtol=1e-12, atol=0):
            raise ValueError("horizon must be an integer multiple of dt")
        stride = max(1, steps // self.n_saves)
        if steps % stride:
            raise ValueError("number of steps must be a multiple of the save stride")
        return self.dt, steps, stride


@dataclass
class DensityField:
    """Saved states of a solve together with their exact semi-discrete tendency."""

    params: ModelParams
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    dudt: np.ndarray
    dt: float
    n_steps: int
    H: np.ndarray | None = None
    H_left: np.ndarray | None = None
    H_right: np.ndarray | None = None
    max_clip: float = 0.0
    max_mass_residual: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return 2.0 / self.x.size

    def mass(self) -> np.ndarray:
        return self.u.sum(axis=1) * self.dx


@dataclass
class TiltField:
    """Tabulated control field: values at cell centres plus both boundary traces."""

    t: np.ndarray
    x: np.ndarray
    values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __call__(self, t, x):
        """Linear interpolation in t and in x (through the traces at +-1)."""
        xs = np.concatenate([[-1.0], self.x, [1.0]])
        table = np.column_stack([self.left, self.values, self.right])
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.asarray(x, dtype=float)
        rows = np.array([np.interp(t, self.t, table[:, j]) for j in range(xs.size)]).T
        out = np.array([np.interp(x, xs, r) for r in rows])
        return out[0] if out.shape[0] == 1 else out

    def sup_norm(self) -> float:
        return float(max(np.abs(self.values).max(), np.abs(self.left).max(), np.abs(self.right).max()))


def _profile_values(rho0, x: np.ndarray) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(rho0(x) if callable(rho0) else rho0, dtype=float), x.shape)
    vals = np.array(vals, dtype=float)
    if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
        raise ValueError("initial profile must take values in [0, 1]")
    return vals


def face_fluxes(p: ModelParams, u: np.ndarray, dx: float, h_cells=None,
                h_left: float = 0.0, h_right: float = 0.0) -> np.ndarray:
    """Fluxes on the M+1 faces for cell values ``u`` and control ``h_cells``."""
    pu = potential(p.a, u)
    flux = np.empty(u.size + 1)
    flux[1:-1] = (pu[1:] - pu[:-1]) / dx
    if h_cells is not None:
        ubar = 0.5 * (u[1:] + u[:-1])
        flux[1:-1] -= 2.0 * mobility(p.a, ubar) * (h_cells[1:] - h_cells[:-1]) / dx
        flux[0] = -boundary_p(p.alpha, u[0], h_left)
        flux[-1] = boundary_p(p.beta, u[-1], h_right)
    else:
        flux[0] = -(p.alpha - u[0])
        flux[-1] = p.beta - u[-1]
    return flux


def tendency(p: ModelParams, u: np.ndarray, dx: float, h_cells=None,
             h_left: float = 0.0, h_right: float = 0.0) -> np.ndarray:
    flux = face_fluxes(p, u, dx, h_cells, h_left, h_right)
    return (flux[1:] - flux[:-1]) / dx


def march(p: ModelParams, grid: Grid, rho0, tilt: Callable | None = None,
          clip_tol: float | None = None) -> Iterator[tuple[int, float, np.ndarray, dict]]:
    """Yield (step, time, u, info) after every explicit Euler step, starting at step 0.

    ``info`` carries the tendency at the yielded state, the clip magnitude and
    the mass-balance residual of the step that produced it.
    """
    dt, steps, _ = grid.schedule(p)
    dx = grid.dx
    x = grid.x
    if clip_tol is None:
        clip_tol = CLIP_TOL_HYDRO if tilt is None else CLIP_TOL_TILTED
    u = _profile_values(rho0, x)
    if tilt is not None:
        if hasattr(tilt, "on_points"):
            eval_cells, eval_ends = tilt.on_points(x), tilt.on_points(np.array([-1.0, 1.0]))
        else:
            eval_cells = lambda t: np.asarray(tilt(t, x), dtype=float)  # noqa: E731
            eval_ends = lambda t: np.array([float(tilt(t, -1.0)), float(tilt(t, 1.0))])  # noqa: E731
    for k in range(steps + 1):
        t = k * dt
        if tilt is None:
            h = None
            hl = hr = 0.0
        else:
            h = eval_cells(t)
            hl, hr = (float(v) for v in eval_ends(t))
            if not (np.all(np.isfinite(h)) and np.isfinite(hl) and np.isfinite(hr)):
                raise SchemeError(f"control field not finite at t={t}")
        flux = face_fluxes(p, u, dx, h, hl, hr)
        dudt = (flux[1:] - flux[:-1]) / dx
        info = {"dudt": dudt, "H": h, "H_left": hl, "H_right": hr, "flux": flux}
        if k > 0:
            info.update(last)
        yield k, t, u, info
        if k == steps:
            return
        if h is not None:
            adv = np.max(np.abs(2.0 * mobility(p.a, 0.5 * (u[1:] + u[:-1])) * np.diff(h) / dx))
            if adv > 0 and dt > grid.cfl_safety * dx / adv:
                raise SchemeError(f"advective CFL violated at t={t}: dt={dt:.3e}, speed={adv:.3e}")
        new = u + dt * dudt
        clip = float(max(0.0, -new.min(), new.max() - 1.0))
        if clip > clip_tol:
            raise SchemeError(f"density left [0,1] by {clip:.3e} at t={t + dt}; scheme unstable")
        clipped = np.clip(new, 0.0, 1.0)
        residual = abs(dx * np.sum(new - u) - dt * (flux[-1] - flux[0]))
        last = {"clip": clip, "mass_residual": residual}
        u = clipped


def _solve(p: ModelParams, grid: Grid, rho0, tilt) -> DensityField:
    dt, steps, stride = grid.schedule(p)
    saves_u, saves_d, saves_t, saves_h, saves_l, saves_r = [], [], [], [], [], []
    max_clip = 0.0
    max_res = 0.0
    for k, t, u, info in march(p, grid, rho0, tilt):
        if k > 0:
            max_clip = max(max_clip, info["clip"])
            max_res = max(max_res, info["mass_residual"])
        if k % stride == 0:
            saves_t.append(t)
            saves_u.append(u.copy())
            saves_d.append(info["dudt"].copy())
            if tilt is not None:
                saves_h.append(info["H"].copy())
                saves_l.append(info["H_left"])
                saves_r.append(info["H_right"])
    field_ = DensityField(
        params=p,
        t=np.array(saves_t),
        x=grid.x,
        u=np.array(saves_u),
        dudt=np.array(saves_d),
        dt=dt,
        n_steps=steps,
        max_clip=max_clip,
        max_mass_residual=max_res,
        metadata={"scheme": "explicit Euler, conservative finite volume",
                  "m_cells": grid.m_cells, "dt": dt, "steps": steps, "save_stride": stride,
                  "diffusive_cfl": dt * max(1.0, 1.0 + 2.0 * p.a) / grid.dx**2},
    )
    if tilt is not None:
        field_.H = np.array(saves_h)
        field_.H_left = np.array(saves_l)
        field_.H_right = np.array(saves_r)
    return field_


def solve_hydro(p: ModelParams, grid: Grid, rho0) -> DensityField:
    """Solve du/dt = (D(u) u')' with Robin fluxes u - alpha at -1 and beta - u at 1."""
    return _solve(p, grid, rho0, None)


def solve_tilted(p: ModelParams, grid: Grid, rho0, H: Callable) -> DensityField:
    """Solve the controlled equation du/dt = (D u' - 2 sigma H')' with exponential Robin fluxes.

    ``H(t, x)`` must accept arrays of x and the scalars -1 and 1.
    """
    return _solve(p, grid, rho0, H)


def stationary_profile(p: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Stationary solution of the hydrodynamic equation by shooting on the left density.

    The flux D u' is constant, equal to u(-1) - alpha, so P(u(x)) = P(u(-1)) + J (x + 1);
    the right boundary condition fixes u(-1).
    """
    a = p.a

    def p_inv(v):
        # clip to the range of P over [0, 1] so the shooting residual stays defined
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0 + a)
        if a == 0.0:
            return v
        return 2.0 * v / (1.0 + np.sqrt(1.0 + 4.0 * a * v))

    def right_residual(ul):
        j = ul - p.alpha
        ur = p_inv(potential(a, ul) + 2.0 * j)
        return float(p.beta - ur - j)

    lo, hi = min(p.alpha, p.beta), max(p.alpha, p.beta)
    if lo == hi:
        ul = lo
    else:
        ul = brentq(right_residual, lo, hi, xtol=1e-15, rtol=1e-15)
    j = ul - p.alpha
    base = float(potential(a, ul))

    def profile(x):
        return p_inv(base + j * (np.asarray(x, dtype=float) + 1.0))

    profile.flux = j
    profile.left = ul
    return profile


@dataclass
class EllipticSolution:
    H: np.ndarray
    H_left: float
    H_right: float
    flux: np.ndarray
    residual: float
    bracket: tuple[float, float]


_TRACE_MIN = 1e-6
_SIGMA_FLOOR = 1e-10


def _trace_gap(d: np.ndarray) -> float:
    # distance from a boundary trace to the adjacent cell centre, third order
    if d.size >= 2:
        return (7.0 * d[0] - 3.0 * d[1]) / 8.0
    return 0.5 * d[0]


def solve_elliptic_H(p: ModelParams, u: np.ndarray, dudt: np.ndarray,
                     xtol: float = 1e-13) -> EllipticSolution:
    """Control field H that makes ``dudt`` the tendency of the controlled equation at ``u``.

    The flux is integrated from the left boundary, where it equals
    -p_alpha(u_1, h0); H follows from J = P(u)' - 2 sigma H', and h0 is fixed by
    the right boundary condition.  The residual is strictly decreasing in h0.
    """
    u = np.asarray(u, dtype=float)
    dudt = np.asarray(dudt, dtype=float)
    if u.shape != dudt.shape or u.ndim != 1:
        raise ValueError("u and dudt must be 1-d arrays of equal length")
    if np.min(np.minimum(u, 1.0 - u)) < _TRACE_MIN:
        raise ValueError("density touches 0 or 1; mobility is degenerate")
    m = u.size
    dx = 2.0 / m
    dp = np.diff(potential(p.a, u))
    sig = np.maximum(mobility(p.a, 0.5 * (u[1:] + u[:-1])), _SIGMA_FLOOR)
    cum = dx * np.cumsum(dudt)

    def build(h0):
        j_left = -boundary_p(p.alpha, u[0], h0)
        flux = np.concatenate([[j_left], j_left + cum])
        d = (dp - dx * flux[1:-1]) / (2.0 * sig)
        h1 = h0 + _trace_gap(d)
        H = h1 + np.concatenate([[0.0], np.cumsum(d)])
        h_right = H[-1] + _trace_gap(d[::-1])
        return H, h_right, flux

    def residual(h0):
        _, hr, flux = build(h0)
        return float(flux[-1] - boundary_p(p.beta, u[-1], hr))

    lo, hi = -1.0, 1.0
    r_lo, r_hi = residual(lo), residual(hi)
    while r_lo < 0 or r_hi > 0:
        if hi - lo > 200:
            raise RuntimeError(f"no sign change of the boundary residual in [{lo}, {hi}]")
        width = hi - lo
        if r_lo < 0:
            lo -= width
            r_lo = residual(lo)
        if r_hi > 0:
            hi += width
            r_hi = residual(hi)
    if r_lo == 0:
        h0 = lo
    elif r_hi == 0:
        h0 = hi
    else:
        h0 = brentq(residual, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    H, hr, flux = build(h0)
    flux[-1] = boundary_p(p.beta, u[-1], hr)
    return EllipticSolution(H=H, H_left=float(h0), H_right=float(hr), flux=flux,
                            residual=residual(h0), bracket=(lo, hi))


def l1_distance(u: DensityField, v: DensityField, k: int) -> float:
    if u.x.shape != v.x.shape or not np.allclose(u.x, v.x):
        raise ValueError("fields live on different grids")
    return float(u.dx * np.sum(np.abs(u.u[k] - v.u[k])))


def weak_form_residual(f: DensityField, H: Callable, dH_dt: Callable) -> float:
    """Defect of the weak formulation of the hydrodynamic equation for a test field H.

    Returns <u_T,H_T> - <u_0,H_0> - int <u, dH/dt> + int <D u', H'>
    - int (alpha - u(-1)) H(-1) - int (beta - u(1)) H(1), with time integrals
    by the trapezoidal rule over the saved times.
    """
    p = f.params
    dx = f.dx
    x = f.x
    faces = -1.0 + np.arange(1, x.size) * dx
    dens = np.empty(f.t.size)
    for k, t in enumerate(f.t):
        u = f.u[k]
        hx = H(t, x)
        dp = np.diff(potential(p.a, u)) / dx
        grad_h = (H(t, faces + 0.5 * dx) - H(t, faces - 0.5 * dx)) / dx
        dens[k] = (
            dx * np.sum(u * dH_dt(t, x))
            - dx * np.sum(dp * grad_h)
            + (p.alpha - u[0]) * float(H(t, -1.0))
            + (p.beta - u[-1]) * float(H(t, 1.0))
        )
        if k == 0:
            start = dx * np.sum(u * hx)
        if k == f.t.size - 1:
            end = dx * np.sum(u * hx)
    return float(end - start - np.trapezoid(dens, f.t))
