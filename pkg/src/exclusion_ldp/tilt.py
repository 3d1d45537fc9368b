"""Separable space-time control fields G(t, x) = sum_k phi_k(t) g_k(x).

The same object drives the tilted particle system (evaluated on lattice
sites x/N) and the controlled PDE (evaluated on cell centres and at +-1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernels import KIND_CONSTANT, KIND_LINEAR, KIND_RAMP

_KINDS = {"ramp": KIND_RAMP, "linear": KIND_LINEAR, "constant": KIND_CONSTANT}


@dataclass(frozen=True)
class TiltTerm:
    """One separable term amplitude * phi(t) * spatial(x).

    ``kind`` selects phi: 'ramp' rises smoothly (C^2) from 0 at ``t_on`` to 1
    at ``t_full``; 'linear' is max(t - t_on, 0); 'constant' is a step at t_on.
    """

    spatial: Callable[[np.ndarray], np.ndarray]
    kind: str = "ramp"
    t_on: float = 0.0
    t_full: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown time profile {self.kind!r}; choose from {sorted(_KINDS)}")
        if self.kind == "ramp" and not self.t_full > self.t_on:
            raise ValueError("ramp needs t_full > t_on")

    def weight(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        on = t > self.t_on
        if self.kind == "ramp":
            s = np.clip((t - self.t_on) / (self.t_full - self.t_on), 0.0, 1.0)
            out = np.where(on, s**3 * (10.0 + s * (-15.0 + 6.0 * s)), 0.0)
            out = np.where(s >= 1.0, 1.0, out)
        elif self.kind == "linear":
            out = np.where(on, t - self.t_on, 0.0)
        else:
            out = np.where(on, 1.0, 0.0)
        return self.amplitude * out

    def weight_dt(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "ramp":
            w = self.t_full - self.t_on
            s = (t - self.t_on) / w
            inside = (s > 0.0) & (s < 1.0)
            return np.where(inside, self.amplitude * 30.0 * s**2 * (1.0 - s) ** 2 / w, 0.0)
        if self.kind == "linear":
            return np.where(t > self.t_on, self.amplitude, 0.0)
        return np.zeros_like(t)

    def sup_weight(self, horizon: float) -> float:
        if self.kind == "linear":
            return abs(self.amplitude) * max(horizon - self.t_on, 0.0)
        return abs(self.amplitude)


@dataclass(frozen=True)
class TiltSchedule:
    """Control field with majorant data for thinning.

    ``sup_norm_bound`` is a user-declared bound on sup |G| over the run; if
    given, it caps the majorant exponents and a violation aborts the run.
    ``boundary_sign`` = +1 tilts boundary creation by exp(+G) so that the
    controlled PDE and the particle system see the same field.
    """

    terms: Sequence[TiltTerm] = field(default_factory=tuple)
    sup_norm_bound: float | None = None
    boundary_sign: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.boundary_sign not in (1.0, -1.0):
            raise ValueError("boundary_sign must be +1 or -1")

    @property
    def is_zero(self) -> bool:
        return all(term.amplitude == 0.0 for term in self.terms)

    def active_terms(self) -> tuple[TiltTerm, ...]:
        return tuple(term for term in self.terms if term.amplitude != 0.0)

    def __call__(self, t, x):
        """G(t, x); broadcasts over t and x."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(t, x).shape)
        for term in self.terms:
            out = out + term.weight(t) * np.asarray(term.spatial(x), dtype=float)
        return out

    def dt(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(t, x).shape)
        for term in self.terms:
            out = out + term.weight_dt(t) * np.asarray(term.spatial(x), dtype=float)
        return out

    def on_points(self, x) -> Callable[[float], np.ndarray]:
        """Fast evaluator t -> G(t, x) for a fixed set of points."""
        x = np.asarray(x, dtype=float)
        active = self.active_terms()
        if not active:
            return lambda t: np.zeros(x.shape)
        table = np.vstack([np.broadcast_to(np.asarray(t.spatial(x), float), x.shape).ravel()
                           for t in active])

        def evaluate(t):
            w = np.array([float(term.weight(t)) for term in active])
            return (w @ table).reshape(x.shape)

        return evaluate

    def activation_time(self) -> float:
        active = self.active_terms()
        return min((t.t_on for t in active), default=np.inf)

    def freeze_time(self) -> float:
        """Earliest time after which G no longer changes in t."""
        out = 0.0
        for term in self.active_terms():
            if term.kind == "linear":
                return np.inf
            out = max(out, term.t_full if term.kind == "ramp" else term.t_on)
        return out

    def site_table(self, n: int) -> np.ndarray:
        """Spatial factors on lattice sites x/N, shape (terms, 2N-1)."""
        x = np.arange(-n + 1, n) / n
        active = self.active_terms()
        if not active:
            return np.zeros((0, x.size))
        return np.vstack([np.broadcast_to(np.asarray(t.spatial(x), float), x.shape) for t in active])

    def kernel_arrays(self, n: int):
        active = self.active_terms()
        kinds = np.array([_KINDS[t.kind] for t in active], dtype=np.int64)
        t0 = np.array([t.t_on for t in active], dtype=float)
        t1 = np.array([t.t_full for t in active], dtype=float)
        amp = np.array([t.amplitude for t in active], dtype=float)
        breaks = np.unique(np.concatenate([t0, t1[kinds == KIND_RAMP]])) if active else np.zeros(0)
        return self.site_table(n), kinds, t0, t1, amp, breaks

    def majorant_exponents(self, n: int, horizon: float) -> tuple[float, float]:
        """Upper bounds on |exponent| for bond and boundary moves over [0, horizon]."""
        table = self.site_table(n)
        active = self.active_terms()
        if not active:
            return 0.0, 0.0
        sup_w = np.array([t.sup_weight(horizon) for t in active])
        bond = float(np.sum(sup_w * np.max(np.abs(np.diff(table, axis=1)), axis=1)))
        edge = float(np.sum(sup_w * np.maximum(np.abs(table[:, 0]), np.abs(table[:, -1]))))
        if self.sup_norm_bound is not None:
            bond = min(bond, 2.0 * self.sup_norm_bound)
            edge = min(edge, self.sup_norm_bound)
        return bond, edge
