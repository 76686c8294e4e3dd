"""Cross-M sweeps: do the a priori bounds scale the way the estimates say?

Every check is a one-sided bound confirmation.  For a monitored quantity q(M)
with predicted rate M^p the scaled value q(M) / M^p must stay below a single
constant, and that constant may not grow by more than ``band`` along the sweep.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .diagnostics import DecayFit, DiagnosticsRecord, fit_decay_rate
from .flow import FlowConfig
from .runner import CONVERGED, run

log = logging.getLogger(__name__)

BAND = 4.0
MIN_R_SQUARED = 0.9


@dataclass
class ExponentFit:
    slope: float
    r_squared: float
    predicted: float
    tolerance: float = 0.3

    @property
    def inconclusive(self) -> bool:
        return not (self.r_squared >= MIN_R_SQUARED) or math.isnan(self.slope)

    @property
    def confirms_bound(self) -> bool:
        """Measured decay at least as fast as predicted, within the tolerance band."""
        if self.slope == -math.inf:
            return True
        return not self.inconclusive and self.slope <= self.predicted + self.tolerance


@dataclass
class RunSummary:
    M: float
    reason: str
    final: DiagnosticsRecord | None
    sup_T2: float
    sup_alpha_ric: float
    sup_e_u: float
    inf_e_u: float
    decay: DecayFit | None
    max_lambda_dev: float

    @property
    def converged(self) -> bool:
        return self.reason == CONVERGED


@dataclass
class SweepResult:
    M_values: list[float]
    runs: list[RunSummary]
    torsion_exponent: ExponentFit | None = None
    ricci_exponent: ExponentFit | None = None
    empirical_M0: float | None = None
    scaled: dict[str, list[float]] = field(default_factory=dict)
    growth: dict[str, float] = field(default_factory=dict)
    c0_constant: float = math.nan
    inconclusive: bool = False

    @property
    def converged_runs(self) -> list[RunSummary]:
        return [r for r in self.runs if r.converged]

    def bounds_confirmed(self, band: float = BAND) -> bool:
        if self.inconclusive:
            return False
        return all(g <= band for g in self.growth.values()) and self.c0_constant <= band

    def as_dict(self) -> dict:
        return {
            "M_values": self.M_values,
            "runs": [
                {
                    "M": r.M,
                    "reason": r.reason,
                    "sup_T2": r.sup_T2,
                    "sup_alpha_ric": r.sup_alpha_ric,
                    "sup_e_u": r.sup_e_u,
                    "inf_e_u": r.inf_e_u,
                    "eta": None if r.decay is None else r.decay.eta,
                    "eta_r_squared": None if r.decay is None else r.decay.r_squared,
                }
                for r in self.runs
            ],
            "torsion_exponent": None if self.torsion_exponent is None else vars(self.torsion_exponent),
            "ricci_exponent": None if self.ricci_exponent is None else vars(self.ricci_exponent),
            "empirical_M0": self.empirical_M0,
            "scaled": self.scaled,
            "growth": self.growth,
            "c0_constant": self.c0_constant,
            "inconclusive": self.inconclusive,
        }


def _summarize(M: float, config: FlowConfig) -> RunSummary:
    res = run(config)
    recs = res.records
    decay = None
    if res.reason == CONVERGED and len(recs) >= 13:
        try:
            decay = fit_decay_rate([r.t for r in recs], [r.J for r in recs])
        except ValueError:
            decay = None
    dev = max(
        (max(1.0 - r.geometry.lambda_min_F, r.geometry.lambda_max_F - 1.0) for r in recs),
        default=math.nan,
    )
    final = recs[-1] if recs else None
    g = final.geometry if final is not None else None
    return RunSummary(
        M=M,
        reason=res.reason,
        final=final,
        sup_T2=g.sup_T2 if g else math.nan,
        sup_alpha_ric=g.sup_alpha_ric if g else math.nan,
        sup_e_u=g.sup_e_u if g else math.nan,
        inf_e_u=g.inf_e_u if g else math.nan,
        decay=decay,
        max_lambda_dev=dev,
    )


def fit_exponent(M, values, predicted: float) -> ExponentFit:
    M = np.asarray(M, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return ExponentFit(slope=-math.inf, r_squared=1.0, predicted=predicted)
    if np.any(v <= 0) or len(v) < 2:
        return ExponentFit(slope=math.nan, r_squared=0.0, predicted=predicted)
    fit = stats.linregress(np.log(M), np.log(v))
    return ExponentFit(slope=float(fit.slope), r_squared=float(fit.rvalue**2), predicted=predicted)


def _growth(values: list[float]) -> float:
    """max over the sweep of q / q(M_min); 1 when q never exceeds its first value."""
    first = values[0]
    if all(v == 0 for v in values):
        return 1.0
    if first == 0:
        return math.inf
    return max(values) / first


def m_sweep(base: FlowConfig, M_values, max_workers: int = 1) -> SweepResult:
    M_values = sorted(float(m) for m in M_values)
    if len(M_values) < 3:
        raise ValueError("a sweep needs at least 3 values of M")
    configs = [base.with_(M=m) for m in M_values]
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(_summarize, M_values, configs))
    else:
        runs = [_summarize(m, c) for m, c in zip(M_values, configs)]

    result = SweepResult(M_values=M_values, runs=runs)
    ok = result.converged_runs
    # Threshold: smallest M from which every larger M converged too.
    m0 = None
    for r in reversed(runs):
        if not r.converged:
            break
        m0 = r.M
    result.empirical_M0 = m0

    if len(ok) < 2:
        result.inconclusive = True
        log.warning("sweep inconclusive: %d converged runs", len(ok))
        return result

    Ms = [r.M for r in ok]
    result.torsion_exponent = fit_exponent(Ms, [r.sup_T2 for r in ok], predicted=-1.0)
    result.ricci_exponent = fit_exponent(Ms, [r.sup_alpha_ric for r in ok], predicted=-0.5)
    result.scaled = {
        "T2_times_M": [r.sup_T2 * r.M for r in ok],
        "alpha_ric_times_sqrt_M": [r.sup_alpha_ric * math.sqrt(r.M) for r in ok],
        "sup_e_u_over_M": [r.sup_e_u / r.M for r in ok],
        "M_times_sup_e_minus_u": [r.M / r.inf_e_u for r in ok],
    }
    result.growth = {
        "T2_times_M": _growth(result.scaled["T2_times_M"]),
        "alpha_ric_times_sqrt_M": _growth(result.scaled["alpha_ric_times_sqrt_M"]),
    }
    ratio = result.scaled["sup_e_u_over_M"]
    result.c0_constant = max(max(ratio), 1.0 / min(ratio), max(result.scaled["M_times_sup_e_minus_u"]))
    result.inconclusive = any(
        f.inconclusive and f.slope != -math.inf for f in (result.torsion_exponent, result.ricci_exponent)
    )
    return result
