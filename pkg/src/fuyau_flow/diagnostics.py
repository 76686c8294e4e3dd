"""Convergence monitors: the J functional, decay-rate fits, the elliptic certificate."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .flow import FlowProblem, elliptic_density
from .geometry import GeometryReport


class ConservationFault(RuntimeError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    step: int
    conservation_error: float
    geometry: GeometryReport
    J: float
    sup_rhs: float
    elliptic_residual: float | None = None
    torsion_identity: float = 0.0
    curvature_identity: float = 0.0
    stokes_exactness: float = 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsRecord":
        d = dict(d)
        d["geometry"] = GeometryReport(**d["geometry"])
        return cls(**d)


def j_functional(u: np.ndarray, rhs_value: np.ndarray, M: float, tol: float = 1e-9) -> float:
    """J = mean(v^2) with v = d_t e^u = e^u * rhs.  v must be mean-free."""
    v = np.exp(u) * rhs_value
    drift = abs(float(np.mean(v)))
    if drift > tol * M:
        raise ConservationFault(f"mean(d_t e^u) = {drift:.3e} exceeds {tol:g} * M")
    return float(np.mean(v * v))


@dataclass(frozen=True)
class DecayFit:
    eta: float
    r_squared: float
    intercept: float
    samples: int


def fit_decay_rate(t, J, transient: float = 0.2, min_samples: int = 10) -> DecayFit:
    """Least-squares slope of log J against t after dropping the transient."""
    t = np.asarray(t, dtype=float)
    J = np.asarray(J, dtype=float)
    if np.all(J == 0):
        return DecayFit(eta=float("inf"), r_squared=1.0, intercept=float("-inf"), samples=len(J))
    start = int(np.floor(transient * len(t)))
    t, J = t[start:], J[start:]
    keep = J > 0
    t, J = t[keep], J[keep]
    if len(t) < min_samples:
        raise ValueError(f"need at least {min_samples} samples past the transient, got {len(t)}")
    fit = stats.linregress(t, np.log(J))
    return DecayFit(eta=-fit.slope, r_squared=fit.rvalue**2, intercept=fit.intercept, samples=len(t))


@dataclass(frozen=True)
class Certificate:
    residual: float
    normalization_error: float

    def passes(self, eps_residual: float, conservation_tol: float) -> bool:
        return self.residual <= eps_residual and self.normalization_error <= conservation_tol


def elliptic_residual(u: np.ndarray, problem: FlowProblem) -> Certificate:
    """sup of the Fu-Yau equation density, plus |mean(e^u) - M| / M."""
    res = float(np.max(np.abs(elliptic_density(u, problem))))
    norm = abs(float(np.mean(np.exp(u))) - problem.M) / problem.M
    return Certificate(residual=res, normalization_error=norm)


def j_is_monotone(J, transient: float = 0.2, rel_tol: float = 1e-12) -> bool:
    """Discrete dJ/dt <= 0 after the transient, up to a relative slack."""
    J = np.asarray(J, dtype=float)
    J = J[int(np.floor(transient * len(J))):]
    return bool(np.all(np.diff(J) <= rel_tol * J[:-1]))
