"""Flat complex 2-torus X = C^2 / (2 pi Z)^4 and exact spectral calculus on it.

Fields are plain numpy arrays of shape ``(n, n, n, n)`` with axes ordered
``(x1, y1, x2, y2)`` where ``z^j = x^j + i y^j``.  The background metric is
the identity, and the measure is the grid average, so ``mean`` plays the role
of integration against the normalized volume form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

PERIOD = 2.0 * np.pi


class GridError(ValueError):
    pass


class BlowUpError(FloatingPointError):
    """A field stopped being finite."""


@dataclass(frozen=True)
class GridSpec:
    n_per_dim: int
    period: float = PERIOD

    def __post_init__(self):
        n = self.n_per_dim
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise GridError(f"n_per_dim must be an integer, got {n!r}")
        if n % 2 != 0:
            raise GridError(f"n_per_dim must be even, got {n}")
        if n < 8:
            raise GridError(f"n_per_dim must be >= 8, got {n}")

    @property
    def n(self) -> int:
        return self.n_per_dim

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n,) * 4

    @property
    def size(self) -> int:
        return self.n**4

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return self.spacing * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays ``(x1, y1, x2, y2)``."""
        a = self.axis
        return (
            a[:, None, None, None],
            a[None, :, None, None],
            a[None, None, :, None],
            a[None, None, None, :],
        )

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer frequencies per axis, broadcastable, in FFT order."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return (
            k[:, None, None, None],
            k[None, :, None, None],
            k[None, None, :, None],
            k[None, None, None, :],
        )

    @cached_property
    def _deriv_wavenumbers(self) -> tuple[np.ndarray, ...]:
        # Nyquist (k = -n/2) is zeroed so first derivatives keep real fields real.
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        k[self.n // 2] = 0.0
        return (
            k[:, None, None, None],
            k[None, :, None, None],
            k[None, None, :, None],
            k[None, None, None, :],
        )

    @cached_property
    def half_deriv_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Nyquist-zeroed wavenumbers laid out for the real half-spectrum."""
        return tuple(_half(k, self) for k in self._deriv_wavenumbers)

    @cached_property
    def half_laplacian_multiplier(self) -> np.ndarray:
        return np.ascontiguousarray(_half(self.laplacian_multiplier, self))

    @cached_property
    def dz_multipliers(self) -> tuple[np.ndarray, np.ndarray]:
        """Fourier multipliers of d/dz^1 and d/dz^2: (i k_x + k_y) / 2."""
        kx1, ky1, kx2, ky2 = self._deriv_wavenumbers
        return (0.5 * (1j * kx1 + ky1), 0.5 * (1j * kx2 + ky2))

    @cached_property
    def dzbar_multipliers(self) -> tuple[np.ndarray, np.ndarray]:
        """Fourier multipliers of d/dzbar^1 and d/dzbar^2: (i k_x - k_y) / 2."""
        kx1, ky1, kx2, ky2 = self._deriv_wavenumbers
        return (0.5 * (1j * kx1 - ky1), 0.5 * (1j * kx2 - ky2))

    @cached_property
    def laplacian_multiplier(self) -> np.ndarray:
        """Multiplier of g^{j kbar} d_j d_kbar, i.e. a quarter of the real Laplacian.

        Built from the first-derivative multipliers so it matches
        ``complex_hessian`` exactly (Nyquist included).
        """
        d, db = self.dz_multipliers, self.dzbar_multipliers
        return (d[0] * db[0] + d[1] * db[1]).real

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |k_i| <= n/3."""
        cut = self.n / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for k in self.wavenumbers:
            mask = mask & (np.abs(k) <= cut)
        return mask


def build_grid(n_per_dim: int) -> GridSpec:
    return GridSpec(n_per_dim)


def check_finite(f: np.ndarray, what: str = "field") -> np.ndarray:
    if not np.all(np.isfinite(f)):
        raise BlowUpError(f"non-finite values in {what}")
    return f


def to_spectral(f: np.ndarray) -> np.ndarray:
    """Coefficients c(k) with f(x) = sum_k c(k) exp(i k.x)."""
    return sfft.fftn(f, norm="forward")


def from_spectral(c: np.ndarray) -> np.ndarray:
    return sfft.ifftn(c, norm="forward")


def real_if_real(f: np.ndarray, like: np.ndarray) -> np.ndarray:
    return f.real if np.isrealobj(like) else f


def _apply(f: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    # Subtracting the mean first keeps the roundoff proportional to the
    # oscillating part, not to a large constant like log M.
    c = to_spectral(f - f.mean())
    return from_spectral(c * multiplier)


def deriv_z(f: np.ndarray, j: int, grid: GridSpec) -> np.ndarray:
    """d f / d z^j for j in {1, 2}."""
    return _apply(f, grid.dz_multipliers[_index(j)])


def deriv_zbar(f: np.ndarray, j: int, grid: GridSpec) -> np.ndarray:
    """d f / d zbar^j for j in {1, 2}."""
    return _apply(f, grid.dzbar_multipliers[_index(j)])


def rfft(f: np.ndarray) -> np.ndarray:
    """Half-spectrum of a real field (last axis truncated to n/2 + 1)."""
    return sfft.rfftn(f, norm="forward")


def irfft(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.irfftn(c, s=grid.shape, norm="forward")


def _half(m: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.broadcast_to(m, grid.shape)[..., : grid.n // 2 + 1]


def gradient_z(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stacked (d_1 f, d_2 f), shape (2, n, n, n, n)."""
    if np.iscomplexobj(f):
        c = to_spectral(f - f.mean())
        return np.stack([from_spectral(c * m) for m in grid.dz_multipliers])
    c = rfft(f - f.mean())
    k = grid.half_deriv_wavenumbers
    out = np.empty((2,) + grid.shape, dtype=complex)
    for j in range(2):
        # d_j = (d_x - i d_y) / 2 with both partials real
        fx = irfft(c * (1j * k[2 * j]), grid)
        fy = irfft(c * (1j * k[2 * j + 1]), grid)
        out[j] = 0.5 * (fx - 1j * fy)
    return out


def complex_hessian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """H[k, j] = d_j d_kbar u as a (2, 2, n, n, n, n) Hermitian array.

    Row index is the barred one.  For real u the diagonal is real and the
    off-diagonal pair is stored as exact conjugates.
    """
    h = np.empty((2, 2) + grid.shape, dtype=complex)
    if np.iscomplexobj(u):
        c = to_spectral(u - u.mean())
        d, db = grid.dz_multipliers, grid.dzbar_multipliers
        for k in range(2):
            for j in range(2):
                h[k, j] = from_spectral(c * (d[j] * db[k]))
        return h
    c = rfft(u - u.mean())
    kx1, ky1, kx2, ky2 = grid.half_deriv_wavenumbers
    h[0, 0] = irfft(c * (-0.25 * (kx1 * kx1 + ky1 * ky1)), grid)
    h[1, 1] = irfft(c * (-0.25 * (kx2 * kx2 + ky2 * ky2)), grid)
    # d_2 d_1bar = (d_x2 - i d_y2)(d_x1 + i d_y1) / 4
    re = irfft(c * (-0.25 * (kx1 * kx2 + ky1 * ky2)), grid)
    im = irfft(c * (-0.25 * (kx2 * ky1 - kx1 * ky2)), grid)
    h[0, 1] = re + 1j * im
    h[1, 0] = re - 1j * im
    return h


def laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """g^{j kbar} d_j d_kbar f."""
    return real_if_real(_apply(f, grid.laplacian_multiplier), f)


def dealias(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Drop every mode outside the 2/3-rule band."""
    f = np.broadcast_to(f, grid.shape)
    out = from_spectral(to_spectral(f) * grid.dealias_mask)
    return real_if_real(out, f)


def mean(f: np.ndarray) -> float:
    return float(np.mean(f))


def sup(f: np.ndarray) -> float:
    return float(np.max(f))


def inf(f: np.ndarray) -> float:
    return float(np.min(f))


def fourier_mode(grid: GridSpec, k, amplitude: complex = 1.0) -> np.ndarray:
    """amplitude * exp(i k.x) on the grid."""
    phase = sum(ki * xi for ki, xi in zip(k, grid.coords))
    return amplitude * np.exp(1j * phase) * np.ones(grid.shape)


def _index(j: int) -> int:
    if j not in (1, 2):
        raise ValueError(f"complex coordinate index must be 1 or 2, got {j}")
    return j - 1


def resample(f: np.ndarray, grid: GridSpec, n_new: int) -> np.ndarray:
    """Trigonometric interpolation of ``f`` onto an ``n_new`` grid.

    Exact for fields with no energy at the Nyquist frequency; the Nyquist
    plane is dropped.
    """
    target = GridSpec(n_new)
    f = np.broadcast_to(f, grid.shape)
    keep = min(grid.n, n_new) // 2 - 1
    ks = np.arange(-keep, keep + 1)
    c = to_spectral(f)
    out = np.zeros(target.shape, dtype=c.dtype)
    out[np.ix_(ks % n_new, ks % n_new, ks % n_new, ks % n_new)] = c[np.ix_(ks % grid.n, ks % grid.n, ks % grid.n, ks % grid.n)]
    return real_if_real(from_spectral(out), f)
