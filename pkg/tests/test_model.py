import itertools

import numpy as np
import pytest

from exclusion_ldp.model import (ModelParams, apply_exchange, apply_flip, boundary_flip_rates,
                                 build_generator_matrix, bulk_exchange_rate, compressibility,
                                 config_to_state, diffusivity, gradient_form_current,
                                 instantaneous_current, mobility, potential,
                                 product_measure_weights, state_to_config)
from exclusion_ldp.verify import equilibrium_check


def cfg(p, values_by_site):
    """Configuration with the given occupied sites (lattice labels)."""
    eta = np.zeros(p.n_lattice, dtype=np.uint8)
    for x, v in values_by_site.items():
        eta[x + p.n_sites - 1] = v
    return eta


# ---------------------------------------------------------------- parameters

@pytest.mark.parametrize("kwargs", [
    dict(a=-0.5, alpha=0.3, beta=0.3, n_sites=4),
    dict(a=0.0, alpha=0.0, beta=0.3, n_sites=4),
    dict(a=0.0, alpha=0.3, beta=1.0, n_sites=4),
    dict(a=0.0, alpha=0.3, beta=0.3, n_sites=1),
    dict(a=0.0, alpha=0.3, beta=0.3, n_sites=2.5),
])
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_transport_coefficients():
    u = np.linspace(0, 1, 11)
    a = 0.7
    assert np.allclose(diffusivity(a, u), 1 + 2 * a * u)
    assert np.allclose(compressibility(u), u * (1 - u))
    assert np.allclose(mobility(a, u), u * (1 - u) * (1 + 2 * a * u))
    assert np.allclose(potential(a, u), u + a * u**2)
    h = 1e-6
    assert np.allclose((potential(a, u + h) - potential(a, u - h)) / (2 * h), diffusivity(a, u))


# ---------------------------------------------------------------- rates

def test_interior_rate_example():
    p = ModelParams(1.0, 0.3, 0.3, 5)
    eta = cfg(p, {-1: 1, 2: 0})
    assert bulk_exchange_rate(p, eta, 0) == 2.0


def test_noninteracting_rate_is_one():
    p = ModelParams(0.0, 0.3, 0.6, 4)
    rng = np.random.default_rng(1)
    for _ in range(20):
        eta = rng.integers(0, 2, p.n_lattice).astype(np.uint8)
        for x in range(-3, 3):
            assert bulk_exchange_rate(p, eta, x) == 1.0


def test_left_boundary_bond_uses_reservoir():
    p = ModelParams(1.0, 0.25, 0.6, 5)
    eta = cfg(p, {-2: 1})  # -N+3 = -2
    assert bulk_exchange_rate(p, eta, -4) == pytest.approx(2.25, abs=1e-15)


def test_right_boundary_bond_uses_reservoir():
    p = ModelParams(1.0, 0.25, 0.6, 5)
    eta = cfg(p, {2: 1})  # N-3 = 2
    assert bulk_exchange_rate(p, eta, 3) == pytest.approx(2.6, abs=1e-15)


def test_two_site_scale_has_two_bonds_each_seeing_one_reservoir():
    p = ModelParams(0.5, 0.2, 0.6, 2)
    eta = cfg(p, {-1: 1, 0: 0, 1: 1})
    assert bulk_exchange_rate(p, eta, -1) == pytest.approx(1 + 0.5 * (0.2 + 1))
    assert bulk_exchange_rate(p, eta, 0) == pytest.approx(1 + 0.5 * (1 + 0.6))


@pytest.mark.parametrize("x", [-5, 4])
def test_bond_index_out_of_range(x):
    p = ModelParams(0.0, 0.3, 0.3, 5)
    with pytest.raises(IndexError):
        bulk_exchange_rate(p, np.zeros(p.n_lattice, dtype=np.uint8), x)


def test_flip_rate_examples():
    p = ModelParams(0.0, 0.3, 0.6, 3)
    assert boundary_flip_rates(p, cfg(p, {}))[0] == pytest.approx(0.3)
    assert boundary_flip_rates(p, cfg(p, {-2: 1}))[0] == pytest.approx(0.7)
    assert boundary_flip_rates(p, cfg(p, {}))[1] == pytest.approx(0.6)
    assert boundary_flip_rates(p, cfg(p, {2: 1}))[1] == pytest.approx(0.4)
    q = ModelParams(0.0, 0.5, 0.5, 3)
    for s in range(1 << q.n_lattice):
        assert boundary_flip_rates(q, state_to_config(q, s)) == (0.5, 0.5)


def test_wrong_config_length_rejected():
    p = ModelParams(0.0, 0.3, 0.3, 3)
    with pytest.raises(ValueError):
        boundary_flip_rates(p, np.zeros(4, dtype=np.uint8))


# ---------------------------------------------------------------- currents

def test_current_examples():
    p = ModelParams(1.0, 0.3, 0.3, 5)
    eta = cfg(p, {-1: 0, 0: 1, 1: 0, 2: 1})
    assert instantaneous_current(p, eta, 0) == 2.0
    assert gradient_form_current(p, eta, 0) == 2.0
    same = cfg(p, {0: 1, 1: 1, -1: 1})
    assert instantaneous_current(p, same, 0) == 0.0
    full = np.ones(p.n_lattice, dtype=np.uint8)
    assert all(instantaneous_current(p, full, x) == 0.0 for x in range(-3, 2))
    assert gradient_form_current(p, np.zeros(p.n_lattice, dtype=np.uint8), 0) == 0.0


@pytest.mark.parametrize("a", [-0.4, 0.0, 0.5, 1.0, 3.0])
def test_gradient_identity_all_local_patterns(a):
    p = ModelParams(a, 0.3, 0.7, 4)
    for pattern in itertools.product((0, 1), repeat=4):
        eta = cfg(p, dict(zip((-1, 0, 1, 2), pattern)))
        assert instantaneous_current(p, eta, 0) == gradient_form_current(p, eta, 0)


@pytest.mark.parametrize("x", [-4, 3])
def test_current_undefined_on_extreme_bonds(x):
    p = ModelParams(1.0, 0.3, 0.3, 5)
    eta = np.zeros(p.n_lattice, dtype=np.uint8)
    with pytest.raises(IndexError):
        instantaneous_current(p, eta, x)
    with pytest.raises(IndexError):
        gradient_form_current(p, eta, x)


# ---------------------------------------------------------------- moves

def test_moves_are_involutions():
    p = ModelParams(0.0, 0.3, 0.3, 4)
    rng = np.random.default_rng(0)
    for _ in range(50):
        eta = rng.integers(0, 2, p.n_lattice).astype(np.uint8)
        x = int(rng.integers(-3, 3))
        assert np.array_equal(apply_exchange(p, apply_exchange(p, eta, x), x), eta)
        for site in (-3, 3):
            once = apply_flip(p, eta, site)
            assert once[site + 3] != eta[site + 3]
            assert np.array_equal(apply_flip(p, once, site), eta)


def test_exchange_of_equal_occupations_is_identity():
    p = ModelParams(0.0, 0.3, 0.3, 4)
    eta = cfg(p, {0: 1, 1: 1})
    assert np.array_equal(apply_exchange(p, eta, 0), eta)


def test_moves_do_not_mutate_input():
    p = ModelParams(0.0, 0.3, 0.3, 3)
    eta = cfg(p, {0: 1})
    before = eta.copy()
    apply_exchange(p, eta, 0)
    apply_flip(p, eta, 2)
    assert np.array_equal(eta, before)


def test_invalid_move_indices():
    p = ModelParams(0.0, 0.3, 0.3, 3)
    eta = np.zeros(p.n_lattice, dtype=np.uint8)
    with pytest.raises(IndexError):
        apply_flip(p, eta, 0)
    with pytest.raises(IndexError):
        apply_exchange(p, eta, 2)


def test_state_roundtrip():
    p = ModelParams(0.0, 0.3, 0.3, 3)
    for s in range(1 << p.n_lattice):
        assert config_to_state(state_to_config(p, s)) == s


# ---------------------------------------------------------------- generator

# three sites (-1, 0, 1) stored as bits 0, 1, 2; a = 0 so every exchange has rate N^2 = 4,
# flips have rate N * r with N = 2, alpha = 0.2, beta = 0.6
HAND_GENERATOR_A0 = np.array([
    #  000   001   010   011   100   101   110   111
    [-1.6, 0.4, 0.0, 0.0, 1.2, 0.0, 0.0, 0.0],    # 000
    [1.6, -6.8, 4.0, 0.0, 0.0, 1.2, 0.0, 0.0],    # 001
    [0.0, 4.0, -9.6, 0.4, 4.0, 0.0, 1.2, 0.0],    # 010
    [0.0, 0.0, 1.6, -6.8, 0.0, 4.0, 0.0, 1.2],    # 011
    [0.8, 0.0, 4.0, 0.0, -5.2, 0.4, 0.0, 0.0],    # 100
    [0.0, 0.8, 0.0, 4.0, 1.6, -10.4, 4.0, 0.0],   # 101
    [0.0, 0.0, 0.8, 0.0, 0.0, 4.0, -5.2, 0.4],    # 110
    [0.0, 0.0, 0.0, 0.8, 0.0, 0.0, 1.6, -2.4],    # 111
])


def test_generator_matches_hand_computed_matrix():
    L = build_generator_matrix(ModelParams(0.0, 0.2, 0.6, 2))
    assert np.allclose(L, HAND_GENERATOR_A0, atol=1e-14)


def test_generator_interacting_rows_by_hand():
    # a = 0.5: bond (-1,0) has rate 1 + a(alpha + eta(1)), bond (0,1) rate 1 + a(eta(-1) + beta)
    L = build_generator_matrix(ModelParams(0.5, 0.2, 0.6, 2))
    assert L[0b001, 0b010] == pytest.approx(4 * (1 + 0.5 * 0.2))
    assert L[0b010, 0b100] == pytest.approx(4 * (1 + 0.5 * 0.6))
    assert L[0b101, 0b110] == pytest.approx(4 * (1 + 0.5 * 1.2))
    assert L[0b101, 0b011] == pytest.approx(4 * (1 + 0.5 * 1.6))
    assert L[0b111, 0b110] == pytest.approx(1.6)
    assert L[0b111, 0b011] == pytest.approx(0.8)
    assert L[0b111, 0b111] == pytest.approx(-2.4)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_generator_structure(n):
    p = ModelParams(0.8, 0.35, 0.55, n)
    L = build_generator_matrix(p)
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12)
    counts = np.array([int(state_to_config(p, s).sum()) for s in range(L.shape[0])])
    rows, cols = np.nonzero(L - np.diag(np.diag(L)))
    assert np.all(L[rows, cols] > 0)
    dn = counts[cols] - counts[rows]
    assert set(np.unique(dn)) <= {-1, 0, 1}
    for r, c, d in zip(rows, cols, dn):
        changed = np.flatnonzero(state_to_config(p, r) != state_to_config(p, c))
        if d == 0:  # exchange: two neighbouring sites swap
            assert changed.size == 2 and changed[1] - changed[0] == 1
            assert L[r, c] >= min(1.0, 1.0 + 2 * p.a) * n * n - 1e-12
        else:  # flip: only the end sites
            assert changed.size == 1 and changed[0] in (0, p.n_lattice - 1)


def test_generator_size_guard():
    with pytest.raises(ValueError):
        build_generator_matrix(ModelParams(0.0, 0.3, 0.3, 7))


def test_product_measure_weights_normalised():
    p = ModelParams(0.0, 0.3, 0.3, 3)
    w = product_measure_weights(p, 0.3)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] == pytest.approx(0.7**5)


# ---------------------------------------------------------------- equilibrium

def test_equilibrium_symmetric_walk():
    r = equilibrium_check(ModelParams(0.0, 0.5, 0.5, 2))
    assert r.metrics["stationarity_residual"] < 1e-14
    assert r.passed


def test_equilibrium_interacting_detailed_balance():
    r = equilibrium_check(ModelParams(1.0, 0.3, 0.3, 4))
    assert r.metrics["detailed_balance_residual"] < 1e-12
    assert r.passed


def test_equilibrium_near_lower_interaction_limit():
    r = equilibrium_check(ModelParams(-0.4, 0.3, 0.3, 3))
    assert r.metrics["min_positive_rate"] > 0
    assert r.passed


def test_unequal_reservoirs_are_not_reversible():
    p = ModelParams(0.0, 0.3, 0.6, 2)
    L = build_generator_matrix(p)
    nu = product_measure_weights(p, 0.3)
    assert np.abs(nu @ L).max() > 1e-3
    with pytest.raises(ValueError):
        equilibrium_check(p)
