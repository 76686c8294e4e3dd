"""Real (1,1)- and (2,2)-forms on the flat torus.

A real (1,1)-form ``i A_{kbar j} dz^j ^ dzbar^k`` is stored as a Hermitian
array ``A[k, j]`` of shape ``(2, 2, n, n, n, n)`` (row = barred index).  A
(2,2)-form is stored as its density against the normalized volume form
``omega_hat^2 / 2``, so it is just a real field.

With this convention

    A ^ B / (omega_hat^2 / 2) = A11 B22 + A22 B11 - A12 B21 - A21 B12

and the density of ``i d dbar S`` is

    d1 d1bar S22 + d2 d2bar S11 - d1 d2bar S12 - d2 d1bar S21.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    complex_hessian,
    from_spectral,
    gradient_z,
    to_spectral,
)

log = logging.getLogger(__name__)


def identity_form(grid: GridSpec) -> np.ndarray:
    """The background Kahler form omega_hat as a Hermitian field."""
    g = np.zeros((2, 2) + grid.shape, dtype=complex)
    g[0, 0] = 1.0
    g[1, 1] = 1.0
    return g


def scalar_times(f: np.ndarray, a: np.ndarray) -> np.ndarray:
    return f[None, None] * a


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, 0, 1)))


def is_hermitian(a: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.allclose(a, np.conj(np.swapaxes(a, 0, 1)), rtol=0, atol=atol))


def wedge_quotient(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    w = a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]
    return w.real


def sigma2_hat(a: np.ndarray) -> np.ndarray:
    """Pointwise determinant of the coefficient matrix."""
    return (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]).real


def adjugate(a: np.ndarray) -> np.ndarray:
    """2x2 adjugate, the first-derivative cofactor of the determinant."""
    out = np.empty_like(a)
    out[0, 0] = a[1, 1]
    out[1, 1] = a[0, 0]
    out[0, 1] = -a[0, 1]
    out[1, 0] = -a[1, 0]
    return out


def pair(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Contraction a^{j kbar} h_{kbar j} = tr(a h), real for Hermitian inputs."""
    return np.einsum("jk...,kj...->...", a, h).real


def quadratic(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """a^{p qbar} v_p conj(v_q) for a (2, ...) stack v of (1,0) components."""
    return np.einsum("pq...,p...,q...->...", a, v, np.conj(v)).real


def i_ddbar_scalar(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return complex_hessian(u, grid)


def i_ddbar_form(s: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Density of i d dbar S against omega_hat^2 / 2 for a real (1,1)-form S."""
    d, db = grid.dz_multipliers, grid.dzbar_multipliers
    total = (
        to_spectral(s[1, 1]) * (d[0] * db[0])
        + to_spectral(s[0, 0]) * (d[1] * db[1])
        - to_spectral(s[0, 1]) * (d[0] * db[1])
        - to_spectral(s[1, 0]) * (d[1] * db[0])
    )
    total.flat[0] = 0.0
    return from_spectral(total).real


def eigenvalues(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (lambda_min, lambda_max) of a Hermitian 2x2 field."""
    p = 0.5 * (a[0, 0].real + a[1, 1].real)
    q = 0.5 * (a[0, 0].real - a[1, 1].real)
    r = np.sqrt(q * q + np.abs(a[0, 1]) ** 2)
    return p - r, p + r


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.min(eigenvalues(a)[0]))


@dataclass(frozen=True)
class RhoDecomposition:
    """Pieces of -i d dbar(e^{-w} rho) expanded by the product rule.

    For any smooth real w,

        -i ddbar(e^{-w} rho) / (omega_hat^2/2)
            = e^{-w} (-psi + Re(b^i w_i) + rt^{j kbar} w_{kbar j}
                      - rt^{p qbar} w_p conj(w_q)).

    ``rho_tilde[j, k]`` holds rt^{j kbar}; on the flat background upper and
    lower indices coincide numerically.
    """

    psi: np.ndarray
    b: np.ndarray
    rho_tilde: np.ndarray

    def reconstruct(self, w: np.ndarray, grid: GridSpec) -> np.ndarray:
        dw = gradient_z(w, grid)
        hw = complex_hessian(w, grid)
        inner = (
            -self.psi
            + np.einsum("i...,i...->...", self.b, dw).real
            + pair(self.rho_tilde, hw)
            - quadratic(self.rho_tilde, dw)
        )
        return np.exp(-w) * inner


def decompose_rho(rho: np.ndarray, grid: GridSpec) -> RhoDecomposition:
    psi = i_ddbar_form(rho, grid)
    db = grid.dzbar_multipliers

    def dbar(f, i):
        return from_spectral(to_spectral(f) * db[i])

    b = np.stack(
        [
            2.0 * (dbar(rho[1, 1], 0) - dbar(rho[0, 1], 1)),
            2.0 * (dbar(rho[0, 0], 1) - dbar(rho[1, 0], 0)),
        ]
    )
    return RhoDecomposition(psi=psi, b=b, rho_tilde=adjugate(rho))


@dataclass(frozen=True)
class MuData:
    """The scalar 2 mu / omega_hat^2, normalized to mean zero."""

    mu_tilde: np.ndarray


def normalize_mu(raw: np.ndarray) -> MuData:
    m = float(np.mean(raw))
    if m != 0.0:
        log.debug("removing mean %.3e from mu", m)
    mt = raw - m
    # A second pass removes the residual roundoff of the first subtraction.
    mt = mt - np.mean(mt)
    return MuData(mu_tilde=mt)
