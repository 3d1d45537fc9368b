"""Lattice model: configurations, exchange and flip rates, currents, generator.

Sites are labelled x = -N+1, ..., N-1.  A configuration is stored as a
``uint8`` array of length 2N-1 with index ``x + N - 1``.  Bonds are labelled
by their left site x = -N+1, ..., N-2.

Rates are returned *before* time acceleration: the bulk clock runs N**2 times
faster and the boundary clock N times faster; those factors are applied by the
simulator and by :func:`build_generator_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_GENERATOR_N = 6


@dataclass(frozen=True)
class ModelParams:
    """Interaction strength ``a``, reservoir densities and the scale N."""

    a: float
    alpha: float
    beta: float
    n_sites: int

    def __post_init__(self):
        if not self.a > -0.5:
            raise ValueError(f"interaction a={self.a} must satisfy a > -1/2")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"reservoir density {name}={v} must lie in (0, 1)")
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites={self.n_sites} must be an integer >= 2")

    @property
    def n_lattice(self) -> int:
        return 2 * self.n_sites - 1

    @property
    def sites(self) -> np.ndarray:
        n = self.n_sites
        return np.arange(-n + 1, n)

    def with_n(self, n_sites: int) -> "ModelParams":
        return ModelParams(self.a, self.alpha, self.beta, n_sites)

    # macroscopic transport coefficients
    def D(self, u):
        return diffusivity(self.a, u)

    def chi(self, u):
        return compressibility(u)

    def sigma(self, u):
        return mobility(self.a, u)

    def P(self, u):
        return potential(self.a, u)


def diffusivity(a: float, u):
    return 1.0 + 2.0 * a * np.asarray(u, dtype=float)


def compressibility(u):
    u = np.asarray(u, dtype=float)
    return u * (1.0 - u)


def mobility(a: float, u):
    return compressibility(u) * diffusivity(a, u)


def potential(a: float, u):
    """Antiderivative of the diffusivity, ``u + a u**2`` (so that P' = D)."""
    u = np.asarray(u, dtype=float)
    return u + a * u * u


def _index(p: ModelParams, x: int) -> int:
    return x + p.n_sites - 1


def _check_config(p: ModelParams, eta) -> np.ndarray:
    eta = np.asarray(eta)
    if eta.shape != (p.n_lattice,):
        raise ValueError(f"configuration must have length {p.n_lattice}, got {eta.shape}")
    return eta


def _check_bond(p: ModelParams, x: int) -> None:
    n = p.n_sites
    if not -n + 1 <= x <= n - 2:
        raise IndexError(f"bond {x} outside [{-n + 1}, {n - 2}]")


def bulk_exchange_rate(p: ModelParams, eta, x: int) -> float:
    """Rate 1 + a[eta(x-1) + eta(x+2)] at which bond (x, x+1) exchanges.

    Neighbours outside the lattice are replaced by the reservoir density of the
    corresponding side.  Only the two outermost bonds see a reservoir, one each,
    even for N = 2.
    """
    eta = _check_config(p, eta)
    _check_bond(p, x)
    n = p.n_sites
    left = p.alpha if x - 1 < -n + 1 else float(eta[_index(p, x - 1)])
    right = p.beta if x + 2 > n - 1 else float(eta[_index(p, x + 2)])
    return 1.0 + p.a * (left + right)


def boundary_flip_rates(p: ModelParams, eta) -> tuple[float, float]:
    eta = _check_config(p, eta)
    el = float(eta[0])
    er = float(eta[-1])
    r_left = el * (1.0 - p.alpha) + (1.0 - el) * p.alpha
    r_right = er * (1.0 - p.beta) + (1.0 - er) * p.beta
    return r_left, r_right


def _check_interior_bond(p: ModelParams, x: int) -> None:
    n = p.n_sites
    if not -n + 2 <= x <= n - 3:
        raise IndexError(
            f"current is only defined on bonds whose neighbours x-1, x+2 lie in the "
            f"lattice; bond {x} is outside [{-n + 2}, {n - 3}]"
        )


def instantaneous_current(p: ModelParams, eta, x: int) -> float:
    eta = _check_config(p, eta)
    _check_interior_bond(p, x)
    i = _index(p, x)
    return bulk_exchange_rate(p, eta, x) * (float(eta[i]) - float(eta[i + 1]))


def gradient_form_current(p: ModelParams, eta, x: int) -> float:
    """Current written as a discrete gradient of local functions.

    With f1 = eta(0) eta(1) and f2 = eta(0) eta(2) this is
    eta(x) - eta(x+1) + a(tau_{x-1} f1 - tau_{x+1} f1) + a(tau_x f2 - tau_{x-1} f2).
    """
    eta = _check_config(p, eta)
    _check_interior_bond(p, x)
    i = _index(p, x)
    em1, e0, e1, e2 = (float(v) for v in eta[i - 1 : i + 3])
    return (e0 - e1) + p.a * (em1 * e0 - e1 * e2) + p.a * (e0 * e2 - em1 * e1)


def apply_exchange(p: ModelParams, eta, x: int) -> np.ndarray:
    eta = _check_config(p, eta)
    _check_bond(p, x)
    out = eta.copy()
    i = _index(p, x)
    out[i], out[i + 1] = eta[i + 1], eta[i]
    return out


def apply_flip(p: ModelParams, eta, x: int) -> np.ndarray:
    eta = _check_config(p, eta)
    n = p.n_sites
    if x not in (-n + 1, n - 1):
        raise IndexError(f"flips only happen at the boundary sites {-n + 1}, {n - 1}; got {x}")
    out = eta.copy()
    i = _index(p, x)
    out[i] = 1 - eta[i]
    return out


def state_to_config(p: ModelParams, state: int) -> np.ndarray:
    """Bit i of ``state`` is the occupation of the site with index i."""
    bits = (int(state) >> np.arange(p.n_lattice)) & 1
    return bits.astype(np.uint8)


def config_to_state(eta) -> int:
    eta = np.asarray(eta, dtype=np.int64)
    return int(np.sum(eta << np.arange(eta.size)))


def build_generator_matrix(p: ModelParams) -> np.ndarray:
    """Dense generator L_N = L_{N,0} + L_{N,b} over all 2**(2N-1) states.

    Entry [s, s'] is the jump rate from state s to s'; the diagonal makes
    every row sum to zero.  Exchanges across equal occupations are identity
    moves and contribute nothing.
    """
    if p.n_sites > MAX_GENERATOR_N:
        raise ValueError(
            f"state space 2**{p.n_lattice} too large; n_sites must be <= {MAX_GENERATOR_N}"
        )
    n = p.n_sites
    size = 1 << p.n_lattice
    L = np.zeros((size, size))
    for s in range(size):
        eta = state_to_config(p, s)
        for x in range(-n + 1, n - 1):
            i = _index(p, x)
            if eta[i] == eta[i + 1]:
                continue
            target = s ^ ((1 << i) | (1 << (i + 1)))
            L[s, target] += n * n * bulk_exchange_rate(p, eta, x)
        r_left, r_right = boundary_flip_rates(p, eta)
        L[s, s ^ 1] += n * r_left
        L[s, s ^ (1 << (p.n_lattice - 1))] += n * r_right
        L[s, s] = -L[s].sum()
    return L


def product_measure_weights(p: ModelParams, density: float) -> np.ndarray:
    """Bernoulli product measure with constant density, indexed by state."""
    states = np.arange(1 << p.n_lattice)
    occupied = np.zeros(states.size, dtype=np.int64)
    for i in range(p.n_lattice):
        occupied += (states >> i) & 1
    empty = p.n_lattice - occupied
    return density**occupied * (1.0 - density) ** empty
