import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from exclusion_ldp.model import (ModelParams, apply_exchange, apply_flip, build_generator_matrix,
                                 bulk_exchange_rate, gradient_form_current, instantaneous_current,
                                 product_measure_weights)
from exclusion_ldp.pde import (Grid, boundary_c, boundary_p, boundary_p_dm, face_fluxes, march,
                               solve_elliptic_H, tendency)
from exclusion_ldp.rate import psi, solve_phi, upsilon
from exclusion_ldp.sim import sample_product_measure
from exclusion_ldp.tilt import TiltTerm

SETTINGS = settings(deadline=None, max_examples=60,
                    suppress_health_check=[HealthCheck.too_slow])

interaction = st.floats(-0.49, 5.0)
density = st.floats(0.01, 0.99)


@st.composite
def model_and_config(draw, n_min=3, n_max=12):
    n = draw(st.integers(n_min, n_max))
    p = ModelParams(draw(interaction), draw(density), draw(density), n)
    eta = draw(arrays(np.uint8, p.n_lattice, elements=st.integers(0, 1)))
    return p, eta


# ---------------------------------------------------------------- lattice

@SETTINGS
@given(model_and_config(n_min=4), st.data())
def test_gradient_identity(pc, data):
    p, eta = pc
    x = data.draw(st.integers(-p.n_sites + 2, p.n_sites - 3))
    # the two formulas round differently for a generic real a
    assert abs(instantaneous_current(p, eta, x) - gradient_form_current(p, eta, x)) <= 1e-14


@SETTINGS
@given(model_and_config(), st.data())
def test_moves_are_involutions(pc, data):
    p, eta = pc
    x = data.draw(st.integers(-p.n_sites + 1, p.n_sites - 2))
    assert np.array_equal(apply_exchange(p, apply_exchange(p, eta, x), x), eta)
    site = data.draw(st.sampled_from([-p.n_sites + 1, p.n_sites - 1]))
    assert np.array_equal(apply_flip(p, apply_flip(p, eta, site), site), eta)
    assert apply_exchange(p, eta, x).sum() == eta.sum()


@SETTINGS
@given(model_and_config(n_min=2))
def test_exchange_rates_positive(pc):
    p, eta = pc
    for x in range(-p.n_sites + 1, p.n_sites - 1):
        assert bulk_exchange_rate(p, eta, x) > 0


@settings(deadline=None, max_examples=25)
@given(interaction, density, density, st.integers(2, 4))
def test_generator_rows_sum_to_zero(a, alpha, beta, n):
    L = build_generator_matrix(ModelParams(a, alpha, beta, n))
    assert np.abs(L.sum(axis=1)).max() < 1e-12 * np.abs(L).max()
    off = L - np.diag(np.diag(L))
    assert off.min() >= 0


@settings(deadline=None, max_examples=25)
@given(interaction, density, st.integers(2, 4))
def test_detailed_balance_with_equal_reservoirs(a, c, n):
    p = ModelParams(a, c, c, n)
    L = build_generator_matrix(p)
    nu = product_measure_weights(p, c)
    flow = nu[:, None] * L
    scale = np.abs(L).max()
    assert np.abs(flow - flow.T).max() < 1e-12 * scale
    assert np.abs(nu @ L).max() < 1e-12 * scale


# ---------------------------------------------------------------- boundary functions

unit = st.floats(0.0, 1.0)
control = st.floats(-6.0, 6.0)


@SETTINGS
@given(density, unit, control)
def test_boundary_cost_properties(rho, u, m):
    c = float(boundary_c(rho, u, m))
    assert c >= -1e-14
    assert float(boundary_c(rho, u, 0.0)) == 0.0
    assert float(boundary_p(rho, u, 0.0)) == pytest.approx(rho - u, abs=1e-15)
    # c is the Legendre-type companion of p: dc/dm = m dp/dm
    h = 1e-5
    dc = (boundary_c(rho, u, m + h) - boundary_c(rho, u, m - h)) / (2 * h)
    assert float(dc) == pytest.approx(m * float(boundary_p_dm(rho, u, m)), rel=1e-5, abs=1e-8)
    assert float(boundary_p_dm(rho, u, m)) >= 0


@SETTINGS
@given(density, density, unit, unit, control, control)
def test_psi_nonnegative(alpha, beta, r, s, a, b):
    p = ModelParams(0.0, alpha, beta, 2)
    assert psi(p, r, s, a, b) >= -1e-12
    assert psi(p, r, s, 0.0, 0.0) == 0.0


@SETTINGS
@given(density, density, st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 5.0))
def test_phi_value_identity(r, s, x, y, S):
    p = ModelParams(1.0, 0.3, 0.7, 2)
    res = solve_phi(p, r, s, x, y, S)
    assert res.converged
    quarter = boundary_c(p.alpha, r, res.a) + boundary_c(p.beta, s, res.b) + (res.a - res.b) ** 2 * S
    assert res.value / 4 == pytest.approx(float(quarter), rel=1e-8, abs=1e-12)
    for da, db in ((1e-3, 0), (0, 1e-3), (-1e-3, 1e-3)):
        other = x * (res.a + da) + y * (res.b + db) - upsilon(p, r, s, res.a + da, res.b + db, S)
        assert other <= res.value + 1e-12


# ---------------------------------------------------------------- scheme

smooth_coeffs = st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(0.2, 2.0))


@SETTINGS
@given(interaction, density, density, smooth_coeffs, smooth_coeffs)
def test_elliptic_round_trip(a, alpha, beta, uc, hc):
    p = ModelParams(a, alpha, beta, 2)
    grid = Grid(256, 1.0)
    x = grid.x

    def H(y):
        return hc[0] + hc[1] * y + 0.3 * np.sin(hc[2] * y)

    u = 0.5 + uc[0] * np.cos(uc[2] * x) + uc[1] * x
    d = tendency(p, u, grid.dx, H(x), H(-1.0), H(1.0))
    sol = solve_elliptic_H(p, u, d)
    # third-order boundary traces: error O(dx^3) with modest constants
    assert np.abs(sol.H - H(x)).max() < 2e-5
    assert abs(sol.residual) < 1e-11


@SETTINGS
@given(interaction, density, density, arrays(float, 24, elements=st.floats(0.0, 1.0)),
       arrays(float, 24, elements=st.floats(-2.0, 2.0)), control, control)
def test_tendency_is_a_flux_difference(a, alpha, beta, u, h, hl, hr):
    p = ModelParams(a, alpha, beta, 2)
    dx = 2 / u.size
    flux = face_fluxes(p, u, dx, h, hl, hr)
    total = dx * tendency(p, u, dx, h, hl, hr).sum()
    assert total == pytest.approx(flux[-1] - flux[0], abs=1e-9 * (1 + np.abs(flux).max()))


@settings(deadline=None, max_examples=15)
@given(interaction, density, density, arrays(float, 32, elements=st.floats(0.0, 1.0)),
       arrays(float, 32, elements=st.floats(0.0, 1.0)))
def test_l1_contraction(a, alpha, beta, u0, v0):
    p = ModelParams(a, alpha, beta, 2)
    grid = Grid(32, 0.05)
    xs = grid.x
    d_prev = np.inf
    for (_, _, u, _), (_, _, v, _) in zip(march(p, grid, lambda x: np.interp(x, xs, u0)),
                                          march(p, grid, lambda x: np.interp(x, xs, v0))):
        d = np.abs(u - v).sum() * grid.dx
        assert d <= d_prev + 1e-12
        d_prev = d


# ---------------------------------------------------------------- sampling and controls

@SETTINGS
@given(st.integers(2, 40), density, st.integers(0, 2**32 - 1))
def test_product_measure_is_binary(n, c, seed):
    p = ModelParams(0.0, 0.5, 0.5, n)
    eta = sample_product_measure(p, lambda x: np.full_like(x, c), np.random.default_rng(seed))
    assert eta.dtype == np.uint8 and eta.size == p.n_lattice and set(np.unique(eta)) <= {0, 1}


@SETTINGS
@given(st.floats(0.0, 1.0), st.floats(0.01, 1.0), st.lists(st.floats(-1.0, 3.0), min_size=2,
                                                            max_size=20))
def test_ramp_weight(t_on, width, times):
    term = TiltTerm(lambda x: x, kind="ramp", t_on=t_on, t_full=t_on + width)
    ts = np.sort(np.array(times))
    w = term.weight(ts)
    assert np.all((w >= 0) & (w <= 1))
    assert np.all(np.diff(w) >= -1e-15)
    assert np.all(w[ts <= t_on] == 0.0)
    assert np.all(w[ts >= t_on + width] == 1.0)
