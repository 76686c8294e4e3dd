"""Small closed-form cases, one per operation."""

import numpy as np
import pytest
from scipy import integrate

from fuyau_flow.diagnostics import fit_decay_rate, j_functional
from fuyau_flow.flow import (
    FlowConfig,
    FlowProblem,
    FlowState,
    MuMode,
    conservation_error,
    initial_state,
    rhs,
    rhs_geometric,
    step_imex,
    step_rk4,
    suggest_dt,
)
from fuyau_flow.forms import (
    decompose_rho,
    i_ddbar_form,
    identity_form,
    normalize_mu,
    pair,
    sigma2_hat,
    wedge_quotient,
)
from fuyau_flow.geometry import (
    F_hat,
    ellipticity_bounds,
    higher_norms,
    omega_prime,
    ricci_form,
    scalar_curvature,
    torsion_norm_sq,
    torsion_one_form,
)
from fuyau_flow.grid import (
    build_grid,
    complex_hessian,
    deriv_z,
    from_spectral,
    inf,
    mean,
    sup,
    to_spectral,
)
from fuyau_flow.runner import CONVERGED, run
from fuyau_flow.selftest import random_real_field


def full(grid, f):
    return np.broadcast_to(f, grid.shape).copy()


# --- grid ---------------------------------------------------------------


def test_grid_sizes(grid16, grid8):
    assert grid16.size == 65536 and grid16.spacing == pytest.approx(2 * np.pi / 16)
    assert grid8.size == 4096


def test_spectral_coefficients(grid8, rng):
    c = to_spectral(np.ones(grid8.shape))
    assert c[0, 0, 0, 0] == pytest.approx(1.0) and np.sum(np.abs(c)) == pytest.approx(1.0)
    c = to_spectral(full(grid8, np.cos(grid8.coords[0])))
    assert c[1, 0, 0, 0] == pytest.approx(0.5) and c[-1, 0, 0, 0] == pytest.approx(0.5)
    f = random_real_field(grid8, rng)
    assert np.max(np.abs(from_spectral(to_spectral(f)) - f)) < 1e-13


def test_first_derivative_examples(grid16):
    x1, y1, x2, y2 = grid16.coords
    assert np.max(np.abs(deriv_z(full(grid16, np.cos(x1)), 1, grid16) + 0.5 * np.sin(x1))) < 1e-14
    e = full(grid16, np.exp(1j * y2))
    assert np.max(np.abs(deriv_z(e, 2, grid16) - 0.5 * e)) < 1e-14
    assert np.max(np.abs(deriv_z(np.full(grid16.shape, 3.0), 2, grid16))) == 0


def test_hessian_examples(grid16):
    x1, y1, x2, y2 = grid16.coords
    h = complex_hessian(full(grid16, np.cos(x1)), grid16)
    assert np.max(np.abs(h[0, 0] + 0.25 * np.cos(x1))) < 1e-14
    assert np.max(np.abs(h[1, 1])) + np.max(np.abs(h[0, 1])) < 1e-14
    h = complex_hessian(full(grid16, np.cos(x1 + x2)), grid16)
    for k in range(2):
        for j in range(2):
            assert np.max(np.abs(h[k, j] + 0.25 * np.cos(x1 + x2))) < 1e-14


def test_mean_sup_inf(grid16):
    x1 = grid16.coords[0]
    assert mean(full(grid16, 5 + np.cos(x1))) == pytest.approx(5.0, abs=1e-15)
    assert sup(full(grid16, np.cos(x1))) == 1.0 and inf(full(grid16, np.cos(x1))) == pytest.approx(-1.0)


def test_mean_matches_quadrature(grid16):
    i0, _ = integrate.quad(lambda x: np.exp(np.cos(x)), 0, 2 * np.pi, epsabs=1e-14)
    assert abs(mean(full(grid16, np.exp(np.cos(grid16.coords[0])))) - i0 / (2 * np.pi)) < 1e-12


# --- forms ----------------------------------------------------------------


def test_wedge_examples():
    eye = np.eye(2, dtype=complex)
    assert wedge_quotient(eye, eye) == 2.0
    assert wedge_quotient(np.diag([3.0, 0]).astype(complex), np.diag([0, 5.0]).astype(complex)) == 15.0
    c = 1 + 2j
    a = np.array([[0, c], [np.conj(c), 0]])
    assert wedge_quotient(a, a) == pytest.approx(-2 * abs(c) ** 2)
    assert sigma2_hat(eye) == 1.0 and sigma2_hat(np.zeros((2, 2))) == 0.0
    assert sigma2_hat(np.array([[2, 1j], [-1j, 3]])) == pytest.approx(5.0)


def test_i_ddbar_examples(grid16):
    x1, y1, x2, y2 = grid16.coords
    u = full(grid16, np.cos(x1) * np.cos(y2))
    h = complex_hessian(u, grid16)
    lap = -0.25 * 2 * u
    assert np.max(np.abs(wedge_quotient(h, identity_form(grid16)) - lap)) < 1e-14
    # analytic entries of cos x1 cos y2
    assert np.max(np.abs(h[0, 0] + 0.25 * u)) < 1e-14
    assert np.max(np.abs(h[1, 0] - 0.25j * np.sin(x1) * np.sin(y2))) < 1e-14
    assert np.max(np.abs(i_ddbar_form(3.0 * identity_form(grid16), grid16))) == 0.0


def test_rho_decomposition_examples(grid8, rng):
    g = identity_form(grid8)
    dec = decompose_rho(g, grid8)
    w = random_real_field(grid8, rng)
    hw = complex_hessian(w, grid8)
    assert np.max(np.abs(pair(dec.rho_tilde, hw) - wedge_quotient(hw, g))) < 1e-14
    zero = decompose_rho(np.zeros_like(g), grid8)
    assert not np.any(zero.psi) and not np.any(zero.b) and not np.any(zero.rho_tilde)


def test_normalize_mu_examples(grid8):
    x1, y1, x2, y2 = grid8.coords
    c = full(grid8, np.cos(x1))
    assert np.max(np.abs(normalize_mu(c).mu_tilde - c)) < 1e-15
    assert np.max(np.abs(normalize_mu(np.full(grid8.shape, 3.0)).mu_tilde)) == 0.0
    assert np.max(np.abs(normalize_mu(full(grid8, 1 + np.cos(x2))).mu_tilde - np.cos(x2))) < 1e-15


# --- geometry -------------------------------------------------------------


def test_torsion_examples(grid16):
    x1 = grid16.coords[0]
    u = full(grid16, np.cos(x1))
    t = torsion_one_form(u, grid16)
    assert np.max(np.abs(t[0] - 0.5 * np.sin(x1))) < 1e-14 and np.max(np.abs(t[1])) < 1e-14
    assert np.max(np.abs(torsion_one_form(np.full(grid16.shape, 2.0), grid16))) == 0.0

    M, eps = 50.0, 0.3
    u = full(grid16, np.log(M) + eps * np.cos(x1))
    exact = np.exp(-u) * eps**2 / 4 * np.sin(x1) ** 2
    assert np.max(np.abs(torsion_norm_sq(u, grid16) - exact)) < 1e-16
    assert np.allclose(torsion_norm_sq(u + np.log(7.0), grid16), torsion_norm_sq(u, grid16) / 7.0, rtol=1e-12, atol=0)


def test_curvature_examples(grid16):
    x1 = grid16.coords[0]
    u = full(grid16, np.cos(x1))
    r = ricci_form(u, grid16)
    assert np.max(np.abs(r[0, 0] - 0.5 * np.cos(x1))) < 1e-14
    assert np.max(np.abs(r[1, 1])) < 1e-14
    assert np.max(np.abs(scalar_curvature(u, grid16) - 0.5 * np.exp(-u) * np.cos(x1))) < 1e-14


def test_F_hat_examples(grid16):
    M, a = 10.0, 0.7
    u = np.full(grid16.shape, np.log(M))
    zero = np.zeros((2, 2) + grid16.shape, dtype=complex)
    assert np.allclose(F_hat(u, zero, a, grid16), identity_form(grid16))
    assert np.allclose(F_hat(u, identity_form(grid16), a, grid16), (1 + a / M**2) * identity_form(grid16))

    # Diagonal Hessian: the cofactor swaps the two entries.
    x1, y1, x2, y2 = grid16.coords
    u = full(grid16, 0.3 * np.cos(x1) + 0.2 * np.cos(y2))
    h = complex_hessian(u, grid16)
    s = np.exp(-u)
    f = F_hat(u, zero, a, grid16)
    assert np.max(np.abs(f[0, 0] - (1 + a * s * h[1, 1]))) < 1e-14
    assert np.max(np.abs(f[1, 1] - (1 + a * s * h[0, 0]))) < 1e-14
    assert np.max(np.abs(f[0, 1])) < 1e-14


def test_ellipticity_bound_examples(grid8):
    eye = identity_form(grid8)
    assert ellipticity_bounds(eye) == (1.0, 1.0)
    d = eye.copy()
    d[0, 0], d[1, 1] = 0.5, 2.0
    assert ellipticity_bounds(d) == (0.5, 2.0)
    o = eye.copy()
    o[0, 1] = o[1, 0] = 0.3
    lo, hi = ellipticity_bounds(o)
    assert lo == pytest.approx(0.7) and hi == pytest.approx(1.3)


def test_omega_prime_examples(grid16):
    M = 40.0
    zero = np.zeros((2, 2) + grid16.shape, dtype=complex)
    u = np.full(grid16.shape, np.log(M))
    assert np.allclose(omega_prime(u, zero, 1.0, grid16), M * identity_form(grid16))
    x1 = grid16.coords[0]
    for a in (0.0, 3.0, -3.0):
        u = full(grid16, np.log(M) + 0.5 * np.cos(x1))
        w = omega_prime(u, zero, a, grid16)
        # only the (1bar 1) entry moves: e^u - a cos(x1) / 8
        assert np.max(np.abs(w[0, 0] - (np.exp(u) - a * 0.125 * np.cos(x1)))) < 1e-12
        assert np.min(w[0, 0].real) > 0


def test_higher_norms_are_linear_in_small_amplitude(grid16):
    x1 = grid16.coords[0]
    assert higher_norms(np.zeros(grid16.shape), grid16) == (0.0, 0.0)
    small = [higher_norms(full(grid16, e * np.cos(x1)), grid16) for e in (1e-4, 2e-4)]
    assert small[1][0] / small[0][0] == pytest.approx(2.0, rel=1e-3)
    assert small[1][1] / small[0][1] == pytest.approx(2.0, rel=1e-3)
    # leading order in e: |u_11| = |u_{1bar 1}| = e/4 and |d_1 R| = |d_1bar R| = e/4
    gt, gr = small[0]
    assert gt == pytest.approx(1e-4 * np.sqrt(2) / 4, rel=1e-3)
    assert gr == pytest.approx(1e-4 * np.sqrt(2) / 4, rel=1e-3)


# --- flow -----------------------------------------------------------------


def test_rhs_examples():
    M = 25.0
    p = FlowProblem(FlowConfig(n=8, alpha_prime=1.0, M=M, mu_modes=[MuMode((1, 0, 0, 0), 1.0)]))
    u = p.initial_u()
    expected = np.cos(p.grid.coords[0]) / (2 * M)
    assert np.max(np.abs(rhs(u, p) - expected)) < 1e-16
    assert np.max(np.abs(rhs_geometric(u, p) - expected)) < 1e-16
    heat = FlowProblem(FlowConfig(n=16, alpha_prime=0.0, M=M, initial_modes=[MuMode((1, 0, 0, 0), 1.0)]))
    v = heat.initial_u()
    # log(M + cos x1) is not band-limited; the two assemblies agree to spectral accuracy
    assert np.max(np.abs(rhs(v, heat) - rhs_geometric(v, heat))) < 1e-12


def _mode_ratio(state_before, state_after, M):
    a = np.exp(state_before.u) - M
    b = np.exp(state_after.u) - M
    return float(np.sum(b * a) / np.sum(a * a))


@pytest.mark.parametrize("dt", [1e-3, 0.7, 5.0])
def test_imex_heat_step_is_exact(dt):
    M = 100.0
    p = FlowProblem(FlowConfig(n=8, alpha_prime=0.0, M=M, initial_modes=[MuMode((1, 0, 0, 0), 0.1)]))
    st = initial_state(p)
    # roundoff in log/exp is amplified by M / eps = 1e3
    assert _mode_ratio(st, step_imex(st, p, dt), M) == pytest.approx(np.exp(-dt / 8), rel=1e-12)


def test_rk4_heat_step_is_fifth_order():
    M = 100.0
    p = FlowProblem(FlowConfig(n=8, alpha_prime=0.0, M=M, integrator="rk4", initial_modes=[MuMode((1, 0, 0, 0), 0.1)]))
    st = initial_state(p)
    errs = []
    for dt in (1e-1, 5e-2):
        errs.append(abs(_mode_ratio(st, step_rk4(st, p, dt), M) - np.exp(-dt / 8)))
    assert errs[0] < 1e-9
    # the e^u mode ratio error carries the small log nonlinearity; check it shrinks fast
    assert errs[1] < errs[0] / 8


def test_zero_rhs_step_only_advances_time():
    p = FlowProblem(FlowConfig(n=8, alpha_prime=-1.0, M=3.0))
    st = initial_state(p)
    for stepper in (step_rk4, step_imex):
        new = stepper(st, p, 0.3)
        assert np.array_equal(new.u, st.u) and new.t == 0.3 and new.step_count == 1


def test_rk4_time_reversal():
    p = FlowProblem(FlowConfig(n=8, alpha_prime=1.0, M=20.0, mu_modes=[MuMode((0, 1, 0, 0), 1.0)],
                               initial_modes=[MuMode((1, 0, 0, 0), 0.5)]))
    st = initial_state(p)
    back = step_rk4(step_rk4(st, p, 0.01), p, -0.01)
    assert np.max(np.abs(back.u - st.u)) < 1e-11


def test_rk4_dt_suggestion_for_flat_data():
    p = FlowProblem(FlowConfig(n=16, integrator="rk4", M=1e3, alpha_prime=1.0))
    assert suggest_dt(initial_state(p), p) == pytest.approx(0.5 * 2.8 / 32)


def test_rk4_heat_run_conserves_mass_to_roundoff():
    cfg = FlowConfig(n=8, alpha_prime=0.0, M=100.0, integrator="rk4", dt=1e-3, t_max=1.0,
                     initial_modes=[MuMode((1, 0, 0, 0), 0.1)])
    p = FlowProblem(cfg)
    st = initial_state(p)
    assert conservation_error(st, p.M) == 0.0
    for _ in range(1000):
        st = step_rk4(st, p, 1e-3)
    assert conservation_error(st, p.M) <= 1e-12


def test_perturbed_heat_start_converges_to_log_M():
    cfg = FlowConfig(n=8, alpha_prime=0.0, M=100.0, dt=1.0, t_max=400.0, record_every=5,
                     initial_modes=[MuMode((1, 0, 0, 0), 0.1)])
    res = run(cfg)
    assert res.reason == CONVERGED
    assert np.max(np.abs(res.state.u - np.log(100.0))) < 1e-10
    assert res.records[-1].conservation_error <= 1e-10
    fit = fit_decay_rate([r.t for r in res.records], [r.J for r in res.records])
    assert fit.eta == pytest.approx(0.25, rel=1e-3)


# --- diagnostics ----------------------------------------------------------


def test_j_examples(grid8):
    M, eps = 100.0, 0.1
    assert j_functional(np.full(grid8.shape, np.log(M)), np.zeros(grid8.shape), M) == 0.0
    p = FlowProblem(FlowConfig(n=16, alpha_prime=0.0, M=M, initial_modes=[MuMode((1, 0, 0, 0), eps)]))
    u = p.initial_u()
    r = rhs(u, p)
    v = np.exp(u) * r
    assert np.max(np.abs(v + eps / 8 * np.cos(p.grid.coords[0]))) < 1e-12
    assert abs(np.mean(v)) < 1e-12
    assert j_functional(u, r, M) == pytest.approx(eps**2 / 128, rel=1e-12)


def test_synthetic_decay_rate():
    t = np.linspace(0, 5, 50)
    assert fit_decay_rate(t, np.exp(-3 * t)).eta == pytest.approx(3.0, abs=1e-10)
