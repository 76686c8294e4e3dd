"""Built-in oracle suite: each check compares the code against an independent truth."""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .flow import FlowConfig, FlowProblem, FlowState, MuMode, rhs, rhs_geometric, step
from .forms import decompose_rho, i_ddbar_form, normalize_mu
from .grid import GridSpec, build_grid, dealias, resample

# Low-mode random data: wavevectors with every |k_i| <= K_MAX.  Conformal
# factors use |k_i| <= 1 so that exp(+-u) stays resolved at n = 16.
K_MAX = 2


def random_real_field(grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0, kmax: int = K_MAX) -> np.ndarray:
    """Smooth real field with a handful of random low Fourier modes."""
    f = np.zeros(grid.shape)
    for _ in range(4):
        k = rng.integers(-kmax, kmax + 1, size=4)
        phase = sum(ki * xi for ki, xi in zip(k, grid.coords))
        f = f + rng.normal() * np.cos(phase + rng.uniform(0, 2 * np.pi))
    scale = np.max(np.abs(f))
    return amplitude * f / scale if scale > 0 else f


def random_rho(grid: GridSpec, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """Hermitian 2x2 field with real diagonal and a complex off-diagonal."""
    rho = np.zeros((2, 2) + grid.shape, dtype=complex)
    rho[0, 0] = random_real_field(grid, rng, amplitude)
    rho[1, 1] = random_real_field(grid, rng, amplitude)
    off = random_real_field(grid, rng, amplitude) + 1j * random_real_field(grid, rng, amplitude)
    rho[0, 1] = off
    rho[1, 0] = np.conj(off)
    return rho


def problem_with_fields(
    grid: GridSpec,
    alpha_prime: float,
    rho: np.ndarray,
    mu: np.ndarray,
    M: float = 1.0,
    dealias_fields: bool = True,
) -> FlowProblem:
    """A FlowProblem whose rho and mu are arbitrary arrays instead of mode tables."""
    cfg = FlowConfig(n=grid.n, alpha_prime=alpha_prime, M=M, dealias=dealias_fields)
    p = FlowProblem(cfg)
    if dealias_fields:
        rho = np.stack([np.stack([dealias(rho[i, j], grid) for j in range(2)]) for i in range(2)])
        mu = dealias(mu, grid)
    p.rho = rho
    p.mu_tilde = normalize_mu(mu).mu_tilde
    p.rho_decomposition = decompose_rho(rho, grid)
    p.__dict__.pop("has_rho", None)
    return p


@dataclass
class OracleResult:
    name: str
    error: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28s} error={self.error:.3e}  tol={self.tolerance:.0e}  ({self.seconds:.1f}s)"


def heat_limit_error(t_end: float = 1.0, dt: float = 0.01, n: int = 16) -> float:
    """alpha' = 0, rho = mu = 0: e^u solves the heat equation exactly."""
    eps, M = 0.1, 100.0
    cfg = FlowConfig(n=n, alpha_prime=0.0, M=M, dt=dt, t_max=t_end, initial_modes=[MuMode((1, 0, 0, 0), eps)])
    problem = FlowProblem(cfg)
    st = FlowState(problem.initial_u(), 0.0, 0, dt)
    steps = int(round(t_end / dt))
    for _ in range(steps):
        st = step(st, problem, dt)
    x1 = problem.grid.coords[0]
    # g^{j kbar} d_j d_kbar cos x1 = -cos x1 / 4, and the flow carries a factor 1/2.
    exact = M + eps * np.exp(-st.t / 8.0) * np.cos(x1)
    return float(np.max(np.abs(np.exp(st.u) - exact)))


def rhs_equivalence_error(draws: int = 20, n: int = 16, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    grid = build_grid(n)
    worst = 0.0
    for _ in range(draws):
        a = rng.uniform(-1.0, 1.0)
        p = problem_with_fields(grid, a, random_rho(grid, rng, 0.5), random_real_field(grid, rng), M=1.0)
        u = np.log(rng.uniform(2.0, 20.0)) + random_real_field(grid, rng, 0.3, kmax=1)
        diff = rhs(u, p, dealias=True) - rhs_geometric(u, p, dealias=True)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def reconstruction_error(draws: int = 5, n: int = 16, seed: int = 1) -> float:
    """-i ddbar(e^{-w} rho) computed directly vs. through (psi, b, rho_tilde).

    The product e^{-w} rho is not band-limited, so the direct side is taken on
    a grid twice as fine and sampled back at the coarse nodes.
    """
    rng = np.random.default_rng(seed)
    grid = build_grid(n)
    fine = build_grid(2 * n)
    worst = 0.0
    for _ in range(draws):
        rho = random_rho(grid, rng)
        w = random_real_field(grid, rng, 0.5, kmax=1)
        dec = decompose_rho(rho, grid)
        rho_f = np.stack([np.stack([resample(rho[i, j], grid, fine.n) for j in range(2)]) for i in range(2)])
        w_f = resample(w, grid, fine.n)
        direct = -i_ddbar_form(np.exp(-w_f) * rho_f, fine)[::2, ::2, ::2, ::2]
        via = dec.reconstruct(w, grid)
        worst = max(worst, float(np.max(np.abs(direct - via))))
    return worst


def stokes_error(draws: int = 5, n: int = 16, seed: int = 2) -> float:
    """The mean of i ddbar of any smooth (1,1)-form vanishes."""
    rng = np.random.default_rng(seed)
    grid = build_grid(n)
    worst = 0.0
    for _ in range(draws):
        s = np.exp(random_real_field(grid, rng)) * random_rho(grid, rng)
        worst = max(worst, abs(complex(np.mean(i_ddbar_form(s, grid)))))
    return worst


def roundtrip_error(n: int = 8, seed: int = 3) -> float:
    """Snapshot and config roundtrips; 0 on success, 1 on any mismatch."""
    from .io import parse_config_text, read_snapshot, write_snapshot

    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n,) * 4)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "s.snap"
        write_snapshot(FlowState(u, 1.25, 5, 0.25), path, M=10.0, alpha_prime=-1.0)
        back, meta = read_snapshot(path)
    same = np.array_equal(back.u.view(np.uint64), u.view(np.uint64))
    same = same and back.t == 1.25 and back.step_count == 5 and meta["alpha_prime"] == -1.0
    cfg = parse_config_text(f"[grid]\nn = {n}\n[flow]\nalpha_prime = 1.0\nM = 1000.0\n")
    same = same and cfg == FlowConfig(n=n, alpha_prime=1.0, M=1000.0)
    return 0.0 if same else 1.0


ORACLES: list[tuple[str, Callable[[], float], float]] = [
    ("heat limit (t=1)", heat_limit_error, 1e-10),
    ("rhs dual assembly", rhs_equivalence_error, 1e-10),
    ("rho reconstruction", reconstruction_error, 1e-10),
    ("Stokes exactness", stokes_error, 1e-12),
    ("snapshot/config roundtrip", roundtrip_error, 0.0),
]


def run_selftest(report: Callable[[str], None] | None = print) -> list[OracleResult]:
    results = []
    for name, fn, tol in ORACLES:
        t0 = time.perf_counter()
        try:
            err = float(fn())
        except Exception as exc:  # an oracle that crashes is a failed oracle
            err = float("nan")
            name = f"{name} [{type(exc).__name__}: {exc}]"
        res = OracleResult(name, err, tol, time.perf_counter() - t0)
        results.append(res)
        if report is not None:
            report(res.line())
    return results
