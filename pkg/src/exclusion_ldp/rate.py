"""Large-deviation cost of a density trajectory, computed four ways.

* ``explicit_rate``: per time slice, solve the elliptic problem for the
  optimal control and integrate sigma (H')^2 plus the two boundary costs.
* ``variational_rate``: maximise the concave functional J_H over nodal
  values of H slice by slice.
* ``decomposition_rate``: bulk part from the flux primitive, boundary part
  from a two-variable concave problem (face-based quadrature).
* ``smooth_decomposition_rate``: the same split written through the
  sigma-harmonic interpolant Xi (cell-based quadrature).

The functional is local in time for smooth trajectories, so every method is
a trapezoidal time integral of per-slice densities.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .model import ModelParams, compressibility, mobility, potential
from .pde import (DensityField, Grid, TiltField, boundary_c, boundary_p, boundary_p_dm,
                  solve_elliptic_H, solve_hydro)

INTERIOR_EPS = 1e-6


@dataclass
class TrajectoryData:
    """Density u[k, i] at times t[k] and cell centres x[i], with its time derivative.

    Without ``dudt`` the derivative is taken by second-order centred differences.
    """

    params: ModelParams
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    dudt: np.ndarray | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.t.size, self.x.size):
            raise ValueError(f"u has shape {self.u.shape}, expected {(self.t.size, self.x.size)}")
        if self.dudt is None:
            if self.t.size < 3:
                raise ValueError("need at least 3 time slices to differentiate in time")
            self.dudt = np.gradient(self.u, self.t, axis=0, edge_order=2)
        self.dudt = np.asarray(self.dudt, dtype=float)
        if self.window is None:
            self.window = (float(self.t[0]), float(self.t[-1]))

    @classmethod
    def from_field(cls, f: DensityField, window=None) -> "TrajectoryData":
        return cls(f.params, f.t, f.x, f.u, f.dudt, window)

    @property
    def dx(self) -> float:
        return 2.0 / self.x.size

    def mask(self) -> np.ndarray:
        lo, hi = self.window
        tol = 1e-9 * max(1.0, abs(hi))
        return (self.t >= lo - tol) & (self.t <= hi + tol)

    def restrict(self, window: tuple[float, float]) -> "TrajectoryData":
        sub = TrajectoryData(self.params, self.t, self.x, self.u, self.dudt, window)
        m = sub.mask()
        return TrajectoryData(self.params, self.t[m], self.x, self.u[m], self.dudt[m], window)

    @property
    def epsilon(self) -> float:
        """min over the window of min(u, 1-u)."""
        u = self.u[self.mask()]
        return float(np.min(np.minimum(u, 1.0 - u)))


@dataclass
class RateBreakdown:
    method: str
    bulk: float
    left_boundary: float
    right_boundary: float
    total: float
    converged: bool = True
    reason: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diagnostics"] = {k: _jsonable(v) for k, v in self.diagnostics.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _infinite(method: str, reason: str) -> RateBreakdown:
    return RateBreakdown(method, np.inf, np.inf, np.inf, np.inf, converged=True, reason=reason)


def _time_integral(values: np.ndarray, t: np.ndarray) -> float:
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(values, t))


# ---------------------------------------------------------------------------
# boundary kernels


def boundary_B(p: ModelParams, u_left, u_right, h_left, h_right):
    """Boundary term of J_H; vanishes when both traces of H vanish."""
    return (
        u_right * (1 - p.beta) * np.expm1(-h_right) + p.beta * (1 - u_right) * np.expm1(h_right)
        + u_left * (1 - p.alpha) * np.expm1(-h_left) + p.alpha * (1 - u_left) * np.expm1(h_left)
    )


def _psi_side(rho, r, a):
    # 4 rho (1-r)(e^a - a - 1) + 4 r (1-rho)(e^-a + a - 1) and its first two derivatives
    ea, ema = np.exp(a), np.exp(-a)
    val = 4.0 * (rho * (1 - r) * (np.expm1(a) - a) + r * (1 - rho) * (np.expm1(-a) + a))
    d1 = 4.0 * (rho * (1 - r) * np.expm1(a) - r * (1 - rho) * np.expm1(-a))
    d2 = 4.0 * (rho * (1 - r) * ea + r * (1 - rho) * ema)
    return val, d1, d2


def psi(p: ModelParams, r, s, a, b):
    return _psi_side(p.alpha, r, a)[0] + _psi_side(p.beta, s, b)[0]


def upsilon(p: ModelParams, r, s, a, b, S):
    return 4.0 * (a - b) ** 2 * S + psi(p, r, s, a, b)


@dataclass
class PhiResult:
    value: float
    a: float
    b: float
    iterations: int
    converged: bool
    method: str


def solve_phi(p: ModelParams, r: float, s: float, x: float, y: float, S: float,
              tol: float = 1e-12, max_iter: int = 100) -> PhiResult:
    """sup over (a, b) of x a + y b - Upsilon(r, s, a, b) by damped Newton from (0, 0)."""

    def objective(a, b):
        return x * a + y * b - upsilon(p, r, s, a, b, S)

    def grad_hess(a, b):
        _, la, laa = _psi_side(p.alpha, r, a)
        _, lb, lbb = _psi_side(p.beta, s, b)
        g = np.array([x - 8 * (a - b) * S - la, y + 8 * (a - b) * S - lb])
        h = np.array([[-8 * S - laa, 8 * S], [8 * S, -8 * S - lbb]])
        return g, h

    a = b = 0.0
    f = objective(a, b)
    scale = tol * (1.0 + abs(x) + abs(y))
    for it in range(1, max_iter + 1):
        g, h = grad_hess(a, b)
        if np.max(np.abs(g)) < scale:
            return PhiResult(f, a, b, it - 1, True, "newton")
        step = -np.linalg.solve(h, g)
        lam = 1.0
        while lam > 1e-12:
            na, nb = a + lam * step[0], b + lam * step[1]
            nf = objective(na, nb)
            if np.isfinite(nf) and nf >= f:
                break
            lam *= 0.5
        else:
            break
        a, b, f = na, nb, nf
    g, _ = grad_hess(a, b)
    if np.max(np.abs(g)) < scale:
        return PhiResult(f, a, b, max_iter, True, "newton")
    return _phi_bisection(p, r, s, x, y, S, tol)


def _phi_bisection(p, r, s, x, y, S, tol) -> PhiResult:
    """Nested bisection on the two monotone first-order conditions."""

    def root(fun, lo=-1.0, hi=1.0):
        while fun(lo) < 0:
            lo *= 2.0
        while fun(hi) > 0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fun(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)

    def best_a(b):
        return root(lambda a: x - 8 * (a - b) * S - _psi_side(p.alpha, r, a)[1])

    b = root(lambda b: y + 8 * (best_a(b) - b) * S - _psi_side(p.beta, s, b)[1])
    a = best_a(b)
    val = x * a + y * b - upsilon(p, r, s, a, b, S)
    gnorm = max(abs(x - 8 * (a - b) * S - _psi_side(p.alpha, r, a)[1]),
                abs(y + 8 * (a - b) * S - _psi_side(p.beta, s, b)[1]))
    return PhiResult(val, a, b, 0, gnorm < 1e-8 * (1 + abs(x) + abs(y)), "bisection")


# ---------------------------------------------------------------------------
# finite-energy screening


def energy_Q(traj: TrajectoryData) -> float:
    """Space-time integral of (u')^2 / chi(u); +inf if u sits at 0 or 1 where it varies."""
    m = traj.mask()
    u = traj.u[m]
    t = traj.t[m]
    grad = np.gradient(u, traj.x, axis=1, edge_order=2)
    edge = np.minimum(u, 1.0 - u) < INTERIOR_EPS
    bad = edge & (np.abs(grad) > 1e-8)
    if bad.mean() > 1e-3:
        return np.inf
    chi = compressibility(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(grad == 0.0, 0.0, grad**2 / chi)
    if not np.all(np.isfinite(dens)):
        return np.inf
    return _time_integral(traj.dx * dens.sum(axis=1), t)


def _screen(traj: TrajectoryData, method: str) -> RateBreakdown | None:
    if traj.epsilon >= INTERIOR_EPS:
        return None
    if not np.isfinite(energy_Q(traj)):
        return _infinite(method, "infinite_energy")
    raise ValueError(
        f"trajectory reaches min(u, 1-u) = {traj.epsilon:.2e}; the rate formulas need it "
        "bounded away from 0 and 1"
    )


def time_regularity_density(traj: TrajectoryData, g: Callable) -> np.ndarray:
    """t -> <du/dt, g> on the window (the pairing of the time derivative with g)."""
    m = traj.mask()
    gx = np.broadcast_to(np.asarray(g(traj.x), dtype=float), traj.x.shape)
    return traj.dx * traj.dudt[m] @ gx


# ---------------------------------------------------------------------------
# explicit formula


def explicit_rate(traj: TrajectoryData) -> tuple[RateBreakdown, TiltField | None]:
    method = "explicit_formula"
    screened = _screen(traj, method)
    if screened is not None:
        return screened, None
    p = traj.params
    m = traj.mask()
    t = traj.t[m]
    dx = traj.dx
    bulk = np.empty(t.size)
    left = np.empty(t.size)
    right = np.empty(t.size)
    hs, hl, hr, res = [], [], [], []
    for k, (u, d) in enumerate(zip(traj.u[m], traj.dudt[m])):
        sol = solve_elliptic_H(p, u, d)
        dh = np.diff(sol.H)
        sig = mobility(p.a, 0.5 * (u[1:] + u[:-1]))
        half = (mobility(p.a, u[0]) * (sol.H[0] - sol.H_left) ** 2
                + mobility(p.a, u[-1]) * (sol.H_right - sol.H[-1]) ** 2)
        bulk[k] = np.sum(sig * dh**2) / dx + 2.0 * half / dx
        left[k] = boundary_c(p.alpha, u[0], sol.H_left)
        right[k] = boundary_c(p.beta, u[-1], sol.H_right)
        hs.append(sol.H)
        hl.append(sol.H_left)
        hr.append(sol.H_right)
        res.append(abs(sol.residual))
    tilt = TiltField(t, traj.x, np.array(hs), np.array(hl), np.array(hr))
    ib, il, ir = (_time_integral(v, t) for v in (bulk, left, right))
    out = RateBreakdown(method, ib, il, ir, ib + il + ir, diagnostics={
        "max_boundary_residual": float(max(res, default=0.0)),
        "sup_H": tilt.sup_norm(),
        "epsilon": traj.epsilon,
    })
    return out, tilt


# ---------------------------------------------------------------------------
# variational formula


class _SliceFunctional:
    """Discrete J_H for one time slice; unknowns v = (H(-1), H_1..H_M, H(1))."""

    def __init__(self, p: ModelParams, u: np.ndarray, dudt: np.ndarray):
        self.p = p
        self.u = u
        m = u.size
        self.dx = dx = 2.0 / m
        self.lin = np.zeros(m + 2)
        self.lin[1:-1] = dx * dudt
        # edges between consecutive unknowns: two half cells and M-1 interior faces
        self.w = np.empty(m + 1)
        self.w[1:-1] = mobility(p.a, 0.5 * (u[1:] + u[:-1])) / dx
        self.w[0] = 2.0 * mobility(p.a, u[0]) / dx
        self.w[-1] = 2.0 * mobility(p.a, u[-1]) / dx
        self.q = np.zeros(m + 1)
        self.q[1:-1] = np.diff(potential(p.a, u)) / dx
        # half-cell edges: extrapolate the interior gradient to their midpoints
        if m >= 3:
            self.q[0] = self.q[1] + 0.75 * (self.q[1] - self.q[2])
            self.q[-1] = self.q[-2] + 0.75 * (self.q[-2] - self.q[-3])

    def value(self, v):
        dv = np.diff(v)
        return float(self.lin @ v + self.q @ dv - self.w @ dv**2
                     - boundary_B(self.p, self.u[0], self.u[-1], v[0], v[-1]))

    def parts(self, v):
        dv = np.diff(v)
        return (float(self.w @ dv**2), float(boundary_c(self.p.alpha, self.u[0], v[0])),
                float(boundary_c(self.p.beta, self.u[-1], v[-1])))

    def gradient(self, v):
        flux = self.q - 2.0 * self.w * np.diff(v)
        g = self.lin.copy()
        g[1:] += flux
        g[:-1] -= flux
        g[0] -= boundary_p(self.p.alpha, self.u[0], v[0])
        g[-1] -= boundary_p(self.p.beta, self.u[-1], v[-1])
        return g

    def hessian_banded(self, v):
        n = v.size
        ab = np.zeros((3, n))
        ab[0, 1:] = 2.0 * self.w
        ab[2, :-1] = 2.0 * self.w
        diag = np.zeros(n)
        diag[:-1] -= 2.0 * self.w
        diag[1:] -= 2.0 * self.w
        diag[0] -= boundary_p_dm(self.p.alpha, self.u[0], v[0])
        diag[-1] -= boundary_p_dm(self.p.beta, self.u[-1], v[-1])
        ab[1] = diag
        return ab


def _maximise_slice(fun: _SliceFunctional, v0: np.ndarray, tol: float, max_iter: int):
    v = v0.copy()
    f = fun.value(v)
    history = [f]
    monotone = True
    for it in range(max_iter):
        g = fun.gradient(v)
        if np.max(np.abs(g)) < tol:
            return v, f, history, it, True, monotone
        step = solve_banded((1, 1), fun.hessian_banded(v), -g)
        slope = float(g @ step)
        if slope <= 0:  # not an ascent direction; fall back to the gradient
            step, slope = g, float(g @ g)
        lam = 1.0
        while True:
            trial = v + lam * step
            ft = fun.value(trial)
            if np.isfinite(ft) and ft >= f + 1e-4 * lam * slope:
                break
            lam *= 0.5
            if lam < 1e-14:
                ft = f
                trial = v
                break
        if ft < f:
            monotone = False
        if trial is v:
            break
        v, f = trial, ft
        history.append(f)
    g = fun.gradient(v)
    return v, f, history, max_iter, bool(np.max(np.abs(g)) < tol), monotone


def variational_rate(traj: TrajectoryData, tol: float = 1e-7,
                     max_iter: int = 100) -> tuple[RateBreakdown, TiltField | None]:
    """Maximise the discrete J_H over nodal values of H, one time slice at a time.

    Each slice is a strictly concave problem with a tridiagonal Hessian; the
    ascent uses Newton directions with Armijo backtracking and stops when
    the sup-norm of the gradient drops below ``tol``.
    """
    method = "variational"
    screened = _screen(traj, method)
    if screened is not None:
        return screened, None
    p = traj.params
    m = traj.mask()
    t = traj.t[m]
    n = traj.x.size
    vals = np.empty(t.size)
    parts = np.empty((t.size, 3))
    hs = np.empty((t.size, n + 2))
    converged = True
    monotone = True
    iters = []
    v = np.zeros(n + 2)
    for k, (u, d) in enumerate(zip(traj.u[m], traj.dudt[m])):
        fun = _SliceFunctional(p, u, d)
        v, f, hist, it, ok, mono = _maximise_slice(fun, v, tol, max_iter)
        if fun.value(np.zeros_like(v)) > f + 1e-12:
            v, f, hist, it, ok, mono = _maximise_slice(fun, np.zeros_like(v), tol, max_iter)
        converged &= ok
        monotone &= mono and bool(np.all(np.diff(hist) >= -1e-14 * max(1.0, abs(f))))
        iters.append(it)
        vals[k] = f
        parts[k] = fun.parts(v)
        hs[k] = v
    tilt = TiltField(t, traj.x, hs[:, 1:-1], hs[:, 0], hs[:, -1])
    ib, il, ir = (_time_integral(parts[:, j], t) for j in range(3))
    out = RateBreakdown(method, ib, il, ir, _time_integral(vals, t), converged=converged,
                        reason=None if converged else "iteration_cap",
                        diagnostics={"iterations": iters, "monotone_ascent": monotone,
                                     "sup_H": tilt.sup_norm()})
    return out, tilt


def eval_J_H(traj: TrajectoryData, H: Callable) -> float:
    """Discrete J_H(u) for a given control H(t, x), on the same grid as ``variational_rate``."""
    p = traj.params
    m = traj.mask()
    t = traj.t[m]
    vals = np.empty(t.size)
    for k, (tk, u, d) in enumerate(zip(t, traj.u[m], traj.dudt[m])):
        v = np.concatenate([[float(H(tk, -1.0))], np.asarray(H(tk, traj.x), float), [float(H(tk, 1.0))]])
        vals[k] = _SliceFunctional(p, u, d).value(v)
    return _time_integral(vals, t)


# ---------------------------------------------------------------------------
# decompositions


def _face_quantities(p: ModelParams, u: np.ndarray, dudt: np.ndarray, x: np.ndarray):
    n = u.size
    dx = 2.0 / n
    w = np.full(n + 1, dx)
    w[0] = w[-1] = 0.5 * dx
    sig = np.empty(n + 1)
    sig[1:-1] = mobility(p.a, 0.5 * (u[1:] + u[:-1]))
    sig[0] = mobility(p.a, u[0])
    sig[-1] = mobility(p.a, u[-1])
    ddu = np.empty(n + 1)
    ddu[1:-1] = np.diff(potential(p.a, u)) / dx
    ddu[0] = 2.0 * ddu[1] - ddu[2]
    ddu[-1] = 2.0 * ddu[-2] - ddu[-3]
    prim = -np.concatenate([[0.0], dx * np.cumsum(dudt)])
    return w, sig, ddu, prim


def decomposition_rate(traj: TrajectoryData) -> RateBreakdown:
    """Bulk part from the flux primitive plus a boundary part from a 2-variable sup."""
    method = "decomposition"
    screened = _screen(traj, method)
    if screened is not None:
        return screened
    p = traj.params
    msk = traj.mask()
    t = traj.t[msk]
    dx = traj.dx
    bulk = np.empty(t.size)
    phi = np.empty(t.size)
    left = np.empty(t.size)
    right = np.empty(t.size)
    coupling = np.empty(t.size)
    g_arr = np.empty(t.size)
    h_arr = np.empty(t.size)
    ab = np.empty((t.size, 2))
    converged = True
    for k, (u, d) in enumerate(zip(traj.u[msk], traj.dudt[msk])):
        w, sig, ddu, prim = _face_quantities(p, u, d, traj.x)
        inv = w @ (1.0 / sig)
        S = 1.0 / inv
        prim = prim - (w @ (prim / sig)) * S  # centre so that <P / sigma> = 0
        M = prim + ddu
        m_sig = w @ (M / sig)
        bulk[k] = 0.25 * (w @ (M**2 / sig) - m_sig**2 * S)
        p_one = dx * d.sum()
        p_x = dx * d @ traj.x
        mean_ddu = w @ ddu
        mean_m = w @ M
        g = 2.0 * (p_one - p_x - mean_ddu + 2.0 * (u[0] - p.alpha) + mean_m - 2.0 * m_sig * S)
        h = 2.0 * (p_one + p_x + mean_ddu + 2.0 * (u[-1] - p.beta) - mean_m + 2.0 * m_sig * S)
        res = solve_phi(p, u[0], u[-1], g, h, S)
        converged &= res.converged
        phi[k] = res.value
        left[k] = boundary_c(p.alpha, u[0], res.a)
        right[k] = boundary_c(p.beta, u[-1], res.b)
        coupling[k] = (res.a - res.b) ** 2 * S
        g_arr[k], h_arr[k] = g, h
        ab[k] = res.a, res.b
    i1 = _time_integral(bulk, t)
    i2 = 0.25 * _time_integral(phi, t)
    ratio = (np.exp(np.abs(ab[:, 0])) + np.exp(np.abs(ab[:, 1]))) / (1 + np.abs(g_arr) + np.abs(h_arr))
    return RateBreakdown(method, i1, _time_integral(left, t), _time_integral(right, t), i1 + i2,
                         converged=converged, reason=None if converged else "phi_not_converged",
                         diagnostics={"boundary_part": i2,
                                      "coupling": _time_integral(coupling, t),
                                      "g": g_arr, "h": h_arr,
                                      "alpha_opt": ab[:, 0], "beta_opt": ab[:, 1],
                                      "growth_constant": float(ratio.max())})


def smooth_decomposition_rate(traj: TrajectoryData) -> RateBreakdown:
    """Split through Xi = S int sigma^-1 with cell-centred quadrature."""
    method = "smooth_decomposition"
    screened = _screen(traj, method)
    if screened is not None:
        return screened
    p = traj.params
    msk = traj.mask()
    t = traj.t[msk]
    dx = traj.dx
    ia = np.empty(t.size)
    phi = np.empty(t.size)
    left = np.empty(t.size)
    right = np.empty(t.size)
    coupling = np.empty(t.size)
    a_arr = np.empty(t.size)
    b_arr = np.empty(t.size)
    converged = True
    for k, (u, d) in enumerate(zip(traj.u[msk], traj.dudt[msk])):
        inv_sig = 1.0 / mobility(p.a, u)
        S = 1.0 / (dx * inv_sig.sum())
        xi = S * dx * (np.cumsum(inv_sig) - 0.5 * inv_sig)
        grad_xi = S * inv_sig
        ddu = np.gradient(potential(p.a, u), dx, edge_order=2)
        a_t = 4.0 * (dx * d @ (1.0 - xi) - dx * ddu @ grad_xi + u[0] - p.alpha)
        b_t = 4.0 * (dx * d @ xi + dx * ddu @ grad_xi + u[-1] - p.beta)
        prim = -dx * (np.cumsum(d) - 0.5 * d)
        prim = prim - (dx * prim @ inv_sig) * S
        r_t = (dx * ddu @ inv_sig) ** 2 * S
        ia[k] = 0.25 * (dx * ((prim + ddu) ** 2) @ inv_sig - r_t)
        res = solve_phi(p, u[0], u[-1], a_t, b_t, S)
        converged &= res.converged
        phi[k] = res.value
        left[k] = boundary_c(p.alpha, u[0], res.a)
        right[k] = boundary_c(p.beta, u[-1], res.b)
        coupling[k] = (res.a - res.b) ** 2 * S
        a_arr[k], b_arr[k] = a_t, b_t
    i_a = _time_integral(ia, t)
    i_b = 0.25 * _time_integral(phi, t)
    bulk = i_a + _time_integral(coupling, t)
    il, ir = _time_integral(left, t), _time_integral(right, t)
    return RateBreakdown(method, bulk, il, ir, bulk + il + ir, converged=converged,
                         reason=None if converged else "phi_not_converged",
                         diagnostics={"I_a": i_a, "I_b": i_b, "a": a_arr, "b": b_arr})


METHODS = {
    "explicit": lambda tr: explicit_rate(tr)[0],
    "variational": lambda tr: variational_rate(tr)[0],
    "decomposition": decomposition_rate,
    "smooth_decomposition": smooth_decomposition_rate,
}


def all_rates(traj: TrajectoryData) -> dict[str, RateBreakdown]:
    return {name: fn(traj) for name, fn in METHODS.items()}


def is_hydrodynamic(traj: TrajectoryData, tol: float = 1e-3) -> tuple[bool, float]:
    """Re-solve the hydrodynamic equation from u at the window start and compare in L1."""
    m = traj.mask()
    t = traj.t[m]
    steps = np.diff(t)
    if t.size < 2 or not np.allclose(steps, steps[0], rtol=1e-9):
        raise ValueError("forward comparison needs uniformly spaced times")
    u0 = traj.u[m][0]
    grid = Grid(traj.x.size, float(t[-1] - t[0]), n_saves=t.size - 1)
    ref = solve_hydro(traj.params, grid, lambda x: np.interp(x, traj.x, u0))
    dist = traj.dx * np.abs(ref.u - traj.u[m]).sum(axis=1)
    return bool(dist.max() < tol), float(dist.max())
