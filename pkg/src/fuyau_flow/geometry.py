"""Geometry of the conformal metric g = e^u g_hat on the flat torus.

Everything here is a pointwise formula in u and its spectral derivatives:
torsion T_j = -d_j u, Chern-Ricci R_{kbar j} = -2 u_{kbar j}, the Chern
connection Gamma^l_{ik} = u_i delta^l_k, and the two ellipticity tensors that
decide whether the flow is still parabolic.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .forms import adjugate, eigenvalues, identity_form, scalar_times
from .grid import (
    GridSpec,
    complex_hessian,
    deriv_zbar,
    from_spectral,
    gradient_z,
    to_spectral,
)


class EllipticityLoss(ArithmeticError):
    """The linearized operator stopped being positive definite."""


def torsion_one_form(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return -gradient_z(u, grid)


def torsion_norm_sq(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    t = torsion_one_form(u, grid)
    return np.exp(-u) * (np.abs(t[0]) ** 2 + np.abs(t[1]) ** 2)


def torsion_tensor(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """T_{kbar m j} = d_m g_{kbar j} - d_j g_{kbar m}, indexed [k, m, j]."""
    du = gradient_z(u, grid)
    eu = np.exp(u)
    t = np.zeros((2, 2, 2) + grid.shape, dtype=complex)
    for k in range(2):
        for m in range(2):
            for j in range(2):
                val = 0.0
                if k == j:
                    val = val + du[m]
                if k == m:
                    val = val - du[j]
                t[k, m, j] = eu * val
    return t


def torsion_form_norm_sq(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """|i d omega|^2 with every index raised by g; equals 2 |T|^2."""
    t = torsion_tensor(u, grid)
    return np.exp(-3.0 * u) * np.sum(np.abs(t) ** 2, axis=(0, 1, 2))


def ricci_form(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return -2.0 * complex_hessian(u, grid)


def scalar_curvature(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    h = complex_hessian(u, grid)
    return -2.0 * np.exp(-u) * (h[0, 0].real + h[1, 1].real)


def frobenius(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(0, 1)))


def alpha_ric_norm(u: np.ndarray, alpha_prime: float, grid: GridSpec) -> np.ndarray:
    """|alpha' Ric| in the evolving metric: |alpha'| e^{-u} |2 u_{kbar j}|."""
    h = complex_hessian(u, grid)
    return abs(alpha_prime) * np.exp(-u) * frobenius(2.0 * h)


def torsion_identity_residual(u: np.ndarray, grid: GridSpec) -> float:
    """sup |T_q - d_q log ||Omega|| | with ||Omega|| = e^{-u}."""
    log_norm_omega = np.log(np.exp(-u))
    return float(np.max(np.abs(torsion_one_form(u, grid) - gradient_z(log_norm_omega, grid))))


def curvature_torsion_residual(u: np.ndarray, grid: GridSpec) -> float:
    """sup |R_{kbar j} - 2 d_kbar T_j|; the connection is flat in the kbar slot."""
    r = ricci_form(u, grid)
    t = torsion_one_form(u, grid)
    worst = 0.0
    for k in range(2):
        for j in range(2):
            rhs = 2.0 * deriv_zbar(t[j], k + 1, grid)
            worst = max(worst, float(np.max(np.abs(r[k, j] - rhs))))
    return worst


def F_hat(
    u: np.ndarray,
    rho_tilde: np.ndarray,
    alpha_prime: float,
    grid: GridSpec,
    hessian: np.ndarray | None = None,
) -> np.ndarray:
    """g_hat + alpha' e^{-2u} rho_tilde + alpha' e^{-u} adj(u_{kbar j})."""
    h = complex_hessian(u, grid) if hessian is None else hessian
    em = np.exp(-u)
    f = alpha_prime * (em * em) * rho_tilde + alpha_prime * em * adjugate(h)
    f[0, 0] += 1.0
    f[1, 1] += 1.0
    return f


def F_evolving(u: np.ndarray, rho_tilde: np.ndarray, alpha_prime: float, grid: GridSpec) -> np.ndarray:
    """g^{p qbar} + alpha' ||Omega||^3 rho_tilde - (alpha'/2)(R g^{p qbar} - R^{p qbar}).

    Assembled from evolving-metric contractions; equals e^{-u} F_hat.
    """
    ginv = np.exp(-u)
    ric = ricci_form(u, grid)
    r_scalar = ginv * (ric[0, 0] + ric[1, 1]).real
    r_up = scalar_times(ginv * ginv, ric)
    eye = identity_form(grid)
    return (
        scalar_times(ginv, eye)
        + alpha_prime * scalar_times(np.exp(-3.0 * u), rho_tilde)
        - 0.5 * alpha_prime * (scalar_times(r_scalar * ginv, eye) - r_up)
    )


def ellipticity_bounds(f_hat: np.ndarray, strict: bool = True) -> tuple[float, float]:
    lo, hi = eigenvalues(f_hat)
    lam_min, lam_max = float(np.min(lo)), float(np.max(hi))
    if strict and not lam_min > 0.0:
        raise EllipticityLoss(f"lambda_min(F_hat) = {lam_min:.3e}")
    return lam_min, lam_max


def omega_prime(
    u: np.ndarray,
    rho: np.ndarray,
    alpha_prime: float,
    grid: GridSpec,
    hessian: np.ndarray | None = None,
) -> np.ndarray:
    h = complex_hessian(u, grid) if hessian is None else hessian
    w = alpha_prime * np.exp(-u) * rho + alpha_prime * h
    eu = np.exp(u)
    w[0, 0] += eu
    w[1, 1] += eu
    return w


def _holomorphic_hessian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """u_{ij} = d_i d_j u, indexed [i, j]."""
    c = to_spectral(u - u.mean())
    d = grid.dz_multipliers
    return np.stack([np.stack([from_spectral(c * d[i] * d[j]) for j in range(2)]) for i in range(2)])


def higher_norms(u: np.ndarray, grid: GridSpec) -> tuple[float, float]:
    """(sup |nabla T|_g, sup |nabla Ric|_g) with the Chern connection of g."""
    du = gradient_z(u, grid)
    h = complex_hessian(u, grid)
    t = -du

    # nabla_i T_j = d_i T_j - u_i T_j ; nabla_ibar T_j = d_ibar T_j = -u_{j ibar}
    nabla_t = -_holomorphic_hessian(u, grid) - du[:, None] * t[None, :]
    nabla_bar_t = -h
    grad_t_sq = np.exp(-2.0 * u) * (
        np.sum(np.abs(nabla_t) ** 2, axis=(0, 1)) + np.sum(np.abs(nabla_bar_t) ** 2, axis=(0, 1))
    )

    ric = -2.0 * h
    d, db = grid.dz_multipliers, grid.dzbar_multipliers
    spec = [[to_spectral(ric[k, j]) for j in range(2)] for k in range(2)]
    total = np.zeros(grid.shape)
    for i in range(2):
        for k in range(2):
            for j in range(2):
                # nabla_i R_{kbar j} = d_i R - u_i R ; nabla_ibar R_{kbar j} = d_ibar R - u_ibar R
                hol = from_spectral(spec[k][j] * d[i]) - du[i] * ric[k, j]
                ahol = from_spectral(spec[k][j] * db[i]) - np.conj(du[i]) * ric[k, j]
                total += np.abs(hol) ** 2 + np.abs(ahol) ** 2
    grad_ric_sq = np.exp(-3.0 * u) * total
    return float(np.sqrt(np.max(grad_t_sq))), float(np.sqrt(np.max(grad_ric_sq)))


@dataclass(frozen=True)
class GeometryReport:
    sup_e_u: float
    inf_e_u: float
    sup_T2: float
    sup_alpha_ric: float
    lambda_min_F: float
    lambda_max_F: float
    omega_prime_min_eig: float
    sup_grad_T: float
    sup_grad_ric: float

    def as_dict(self) -> dict:
        return asdict(self)


def geometry_report(
    u: np.ndarray,
    rho: np.ndarray,
    rho_tilde: np.ndarray,
    alpha_prime: float,
    grid: GridSpec,
    with_higher: bool = True,
) -> GeometryReport:
    eu = np.exp(u)
    lo, hi = ellipticity_bounds(F_hat(u, rho_tilde, alpha_prime, grid), strict=False)
    op_min = float(np.min(eigenvalues(omega_prime(u, rho, alpha_prime, grid))[0]))
    gt, gr = higher_norms(u, grid) if with_higher else (float("nan"), float("nan"))
    return GeometryReport(
        sup_e_u=float(eu.max()),
        inf_e_u=float(eu.min()),
        sup_T2=float(torsion_norm_sq(u, grid).max()),
        sup_alpha_ric=float(alpha_ric_norm(u, alpha_prime, grid).max()),
        lambda_min_F=lo,
        lambda_max_F=hi,
        omega_prime_min_eig=op_min,
        sup_grad_T=gt,
        sup_grad_ric=gr,
    )
