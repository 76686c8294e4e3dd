"""The parabolic Fu-Yau flow for the conformal factor u.

Two assemblies of the right-hand side are kept on purpose:

* ``rhs`` is the hand-expanded scalar form
  ``1/2 (Lap u + |Du|^2 + a e^{-u} s2(ddbar u) - a e^{-u} ddbar(e^{-u} rho) + e^{-u} mu)``
  with the rho term taken from :class:`RhoDecomposition`;
* ``rhs_geometric`` goes through the forms calculus only,
  ``e^{-u}/2 [ddbar(e^u g_hat - a e^{-u} rho) + a s2(ddbar u) + mu]``.

Their agreement pins every sign and factor convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .forms import (
    decompose_rho,
    identity_form,
    normalize_mu,
    pair,
    quadratic,
    scalar_times,
    sigma2_hat,
    i_ddbar_form,
)
from .grid import (
    BlowUpError,
    GridSpec,
    build_grid,
    check_finite,
    complex_hessian,
    dealias as _dealias,
    from_spectral,
    gradient_z,
    irfft,
    rfft,
    to_spectral,
)
from .geometry import F_hat, ellipticity_bounds

OVERFLOW_GUARD = 700.0
INTEGRATORS = ("rk4", "imex")
DT_POLICIES = ("fixed", "adaptive")


@dataclass(frozen=True)
class RhoMode:
    """Coefficient of exp(i k.x) in the entry rho_{pbar q} (1-based p, q)."""

    p: int
    q: int
    k: tuple[int, int, int, int]
    re: float = 0.0
    im: float = 0.0

    @property
    def coefficient(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class MuMode:
    """amplitude * cos(k.x + phase)."""

    k: tuple[int, int, int, int]
    amplitude: float
    phase: float = 0.0


@dataclass
class FlowConfig:
    n: int = 16
    alpha_prime: float = 1.0
    M: float = 1000.0
    rho_modes: list[RhoMode] = field(default_factory=list)
    mu_modes: list[MuMode] = field(default_factory=list)
    # Cosine perturbations of e^{u_0} = M + ...; the convergence theory assumes a constant start.
    initial_modes: list[MuMode] = field(default_factory=list)
    t_max: float = 400.0
    integrator: str = "imex"
    dt: float = 0.25
    dt_policy: str = "fixed"
    safety: float = 0.5
    dt_max: float = 1.0
    eps_rhs: float = 1e-10
    eps_residual: float = 1e-9
    conservation_tol: float = 1e-9
    f_hat_min: float = 0.5
    f_hat_max: float = 2.0
    record_every: int = 10
    output_dir: str | None = None
    dealias: bool = False

    def __post_init__(self):
        build_grid(self.n)
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.dt_policy not in DT_POLICIES:
            raise ValueError(f"dt_policy must be one of {DT_POLICIES}, got {self.dt_policy!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def outside_hypotheses(self) -> bool:
        return bool(self.initial_modes)

    def with_(self, **changes) -> "FlowConfig":
        return replace(self, **changes)


def _mode_table(modes: list[RhoMode]) -> dict:
    table: dict[tuple, complex] = {}
    for m in modes:
        if m.p not in (1, 2) or m.q not in (1, 2):
            raise ValueError(f"rho mode slot must be in {{1,2}}, got ({m.p}, {m.q})")
        key = (m.p - 1, m.q - 1, tuple(int(x) for x in m.k))
        table[key] = table.get(key, 0.0) + m.coefficient
    completed = dict(table)
    for (p, q, k), c in table.items():
        mirror = (q, p, tuple(-x for x in k))
        if mirror in table:
            if abs(table[mirror] - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
                raise ValueError(f"rho modes {(p + 1, q + 1, k)} and its mirror are not Hermitian")
        else:
            completed[mirror] = np.conj(c)
    return completed


def build_rho(modes: list[RhoMode], grid: GridSpec) -> np.ndarray:
    """Hermitian-completed rho field from a Fourier-mode table."""
    rho = np.zeros((2, 2) + grid.shape, dtype=complex)
    for (p, q, k), c in _mode_table(modes).items():
        phase = sum(ki * xi for ki, xi in zip(k, grid.coords))
        rho[p, q] = rho[p, q] + c * np.exp(1j * phase)
    for p in range(2):
        rho[p, p] = rho[p, p].real
    rho[1, 0] = np.conj(rho[0, 1])
    return rho


def build_cosines(modes: list[MuMode], grid: GridSpec) -> np.ndarray:
    f = np.zeros(grid.shape)
    for m in modes:
        phase = sum(ki * xi for ki, xi in zip(m.k, grid.coords))
        f = f + m.amplitude * np.cos(phase + m.phase)
    return f


class FlowProblem:
    """Fields derived once from a :class:`FlowConfig`."""

    def __init__(self, config: FlowConfig):
        self.config = config
        self.grid = build_grid(config.n)
        self.alpha_prime = float(config.alpha_prime)
        self.M = float(config.M)
        self.rho = build_rho(config.rho_modes, self.grid)
        self.mu_tilde = normalize_mu(build_cosines(config.mu_modes, self.grid)).mu_tilde
        self.rho_decomposition = decompose_rho(self.rho, self.grid)

    @cached_property
    def has_rho(self) -> bool:
        return bool(np.any(self.rho))

    @cached_property
    def linear_multiplier(self) -> np.ndarray:
        """Fourier symbol of the stiff part 1/2 g^{j kbar} d_j d_kbar."""
        return 0.5 * self.grid.laplacian_multiplier

    def initial_u(self) -> np.ndarray:
        e_u = self.M + build_cosines(self.config.initial_modes, self.grid)
        if np.any(e_u <= 0):
            raise ValueError("initial e^u must be positive")
        return np.log(e_u)


def rhs(
    u: np.ndarray,
    problem: FlowProblem,
    dealias: bool | None = None,
    hessian: np.ndarray | None = None,
) -> np.ndarray:
    g = problem.grid
    dealias = problem.config.dealias if dealias is None else dealias
    if dealias:
        u = _dealias(u, g)
        hessian = None
    a = problem.alpha_prime
    h = complex_hessian(u, g) if hessian is None else hessian
    du = gradient_z(u, g)
    em = np.exp(-u)
    lap = h[0, 0].real + h[1, 1].real
    grad_sq = np.abs(du[0]) ** 2 + np.abs(du[1]) ** 2
    dec = problem.rho_decomposition
    # -i ddbar(e^{-u} rho) / (omega_hat^2/2), expanded by the product rule
    rho_term = em * (
        -dec.psi
        + np.einsum("i...,i...->...", dec.b, du).real
        + pair(dec.rho_tilde, h)
        - quadratic(dec.rho_tilde, du)
    )
    out = 0.5 * (lap + grad_sq + a * em * sigma2_hat(h) + a * em * rho_term + em * problem.mu_tilde)
    if dealias:
        out = _dealias(out, g)
    return check_finite(out, "rhs")


def elliptic_density(u: np.ndarray, problem: FlowProblem) -> np.ndarray:
    """Density of i ddbar(e^u w - a e^{-u} rho) + (a/2) i ddbar u ^ i ddbar u + mu."""
    g = problem.grid
    a = problem.alpha_prime
    s = scalar_times(np.exp(u), identity_form(g)) - a * scalar_times(np.exp(-u), problem.rho)
    return i_ddbar_form(s, g) + a * sigma2_hat(complex_hessian(u, g)) + problem.mu_tilde


def rhs_geometric(u: np.ndarray, problem: FlowProblem, dealias: bool | None = None) -> np.ndarray:
    g = problem.grid
    dealias = problem.config.dealias if dealias is None else dealias
    if dealias:
        u = _dealias(u, g)
    out = 0.5 * np.exp(-u) * elliptic_density(u, problem)
    if dealias:
        out = _dealias(out, g)
    return check_finite(out, "rhs_geometric")


@dataclass(frozen=True)
class FlowState:
    u: np.ndarray
    t: float = 0.0
    step_count: int = 0
    dt_current: float = 0.0

    @property
    def e_u(self) -> np.ndarray:
        return np.exp(self.u)


def initial_state(problem: FlowProblem) -> FlowState:
    return FlowState(u=problem.initial_u(), t=0.0, step_count=0, dt_current=problem.config.dt)


def conservation_error(state: FlowState, M: float) -> float:
    return abs(float(np.mean(np.exp(state.u))) - M) / M


def _guard(u: np.ndarray) -> np.ndarray:
    check_finite(u, "u")
    if np.max(np.abs(u)) > OVERFLOW_GUARD:
        raise BlowUpError(f"sup|u| = {np.max(np.abs(u)):.1f} exceeds overflow guard")
    return u


def step_rk4(state: FlowState, problem: FlowProblem, dt: float | None = None) -> FlowState:
    h = state.dt_current if dt is None else dt
    u = state.u
    k1 = rhs(u, problem)
    k2 = rhs(u + 0.5 * h * k1, problem)
    k3 = rhs(u + 0.5 * h * k2, problem)
    k4 = rhs(u + h * k3, problem)
    u_new = _guard(u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    return FlowState(u=u_new, t=state.t + h, step_count=state.step_count + 1, dt_current=h)


def nonlinear_density(w: np.ndarray, problem: FlowProblem) -> np.ndarray:
    """d_t e^u minus its linear part 1/2 Lap(e^u), as a function of w = e^u."""
    g = problem.grid
    a = problem.alpha_prime
    if np.any(w <= 0):
        raise BlowUpError("e^u became non-positive")
    u = np.log(w)
    out = problem.mu_tilde.copy()
    if a != 0.0:
        out += a * sigma2_hat(complex_hessian(u, g))
        if problem.has_rho:
            out -= a * i_ddbar_form(problem.rho / w, g)
    return check_finite(0.5 * out, "nonlinear term")


class _ETDCoefficients:
    """ETDRK4 weights for a diagonal real symbol, by contour averaging."""

    def __init__(self, symbol: np.ndarray, h: float, points: int = 32):
        z = h * symbol
        self.E = np.exp(z)
        self.E2 = np.exp(z / 2)
        roots = np.exp(1j * np.pi * (np.arange(1, points + 1) - 0.5) / points)
        # Accumulate over contour points to keep memory at the field size.
        q = np.zeros_like(z)
        f1 = np.zeros_like(z)
        f2 = np.zeros_like(z)
        f3 = np.zeros_like(z)
        for r in roots:
            lr = z + r
            el = np.exp(lr)
            q += ((np.exp(lr / 2) - 1.0) / lr).real
            f1 += ((-4.0 - lr + el * (4.0 - 3.0 * lr + lr**2)) / lr**3).real
            f2 += ((2.0 + lr + el * (lr - 2.0)) / lr**3).real
            f3 += ((-4.0 - 3.0 * lr - lr**2 + el * (4.0 - lr)) / lr**3).real
        self.Q = h * q / points
        self.f1 = h * f1 / points
        self.f2 = h * f2 / points
        self.f3 = h * f3 / points


def step_imex(state: FlowState, problem: FlowProblem, dt: float | None = None) -> FlowState:
    """Exponential RK4 step on e^u: the linear heat part is integrated exactly.

    The update acts on the conserved density e^u, so the zero mode only moves
    through the (discretely mean-free) nonlinear terms, and steady states of
    the flow are fixed points of the step.
    """
    h = state.dt_current if dt is None else dt
    cache = problem.__dict__.setdefault("_etd_cache", {})
    if h not in cache:
        if len(cache) > 8:
            cache.clear()
        cache[h] = _ETDCoefficients(problem.grid.half_laplacian_multiplier * 0.5, h)
    c = cache[h]

    g = problem.grid

    def N(v_hat):
        return rfft(nonlinear_density(irfft(v_hat, g), problem))

    v = rfft(np.exp(state.u))
    nv = N(v)
    a = c.E2 * v + c.Q * nv
    na = N(a)
    b = c.E2 * v + c.Q * na
    nb = N(b)
    cc = c.E2 * a + c.Q * (2.0 * nb - nv)
    nc = N(cc)
    v_new = c.E * v + nv * c.f1 + 2.0 * (na + nb) * c.f2 + nc * c.f3
    w = irfft(v_new, g)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise BlowUpError("e^u left the positive finite range")
    u_new = _guard(np.log(w))
    return FlowState(u=u_new, t=state.t + h, step_count=state.step_count + 1, dt_current=h)


def step(state: FlowState, problem: FlowProblem, dt: float | None = None) -> FlowState:
    if problem.config.integrator == "rk4":
        return step_rk4(state, problem, dt)
    return step_imex(state, problem, dt)


RK4_STABILITY = 2.8
IMEX_TARGET_CHANGE = 0.05


def suggest_dt(
    state: FlowState,
    problem: FlowProblem,
    drift_violation: bool = False,
    rhs_value: np.ndarray | None = None,
) -> float:
    cfg = problem.config
    if drift_violation:
        return 0.5 * state.dt_current
    if cfg.integrator == "rk4":
        rt = problem.rho_decomposition.rho_tilde
        _, lam_max = ellipticity_bounds(F_hat(state.u, rt, problem.alpha_prime, problem.grid), strict=False)
        lam_stiff = 0.5 * (cfg.n / 2) ** 2 * max(lam_max, 1.0)
        return min(cfg.dt_max, cfg.safety * RK4_STABILITY / lam_stiff)
    r = rhs(state.u, problem) if rhs_value is None else rhs_value
    lin = from_spectral(to_spectral(state.u - state.u.mean()) * problem.linear_multiplier).real
    nu = float(np.max(np.abs(r - lin)))
    if nu == 0.0:
        return cfg.dt_max
    return min(cfg.dt_max, cfg.safety * IMEX_TARGET_CHANGE / nu)
