"""Time loop: step, monitor, record, decide when to stop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import (
    Certificate,
    ConservationFault,
    DiagnosticsRecord,
    elliptic_residual,
    j_functional,
)
from .flow import (
    FlowConfig,
    FlowProblem,
    FlowState,
    conservation_error,
    initial_state,
    rhs,
    step,
    suggest_dt,
)
from .forms import eigenvalues, i_ddbar_form, identity_form, scalar_times
from .geometry import (
    F_hat,
    curvature_torsion_residual,
    geometry_report,
    omega_prime,
    torsion_identity_residual,
)
from .grid import BlowUpError, complex_hessian

log = logging.getLogger(__name__)

CONVERGED = "converged"
T_MAX = "t_max"
BLOW_UP = "blow-up"
ELLIPTICITY_LOSS = "ellipticity-loss"

EXIT_CODES = {CONVERGED: 0, T_MAX: 0, BLOW_UP: 3, ELLIPTICITY_LOSS: 4}

DRIFT_PER_STEP = 1e-11
MAX_HALVINGS = 30


@dataclass
class RunResult:
    state: FlowState
    records: list[DiagnosticsRecord]
    reason: str
    certificate: Certificate | None = None
    outside_hypotheses: bool = False
    message: str = ""
    last_valid: FlowState | None = field(default=None, repr=False)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.reason]


def stokes_exactness(u: np.ndarray, problem: FlowProblem) -> float:
    g = problem.grid
    s = scalar_times(np.exp(u), identity_form(g)) - problem.alpha_prime * scalar_times(np.exp(-u), problem.rho)
    return abs(float(np.mean(i_ddbar_form(s, g))))


def make_record(
    state: FlowState,
    problem: FlowProblem,
    rhs_value: np.ndarray,
    certificate: Certificate | None = None,
) -> DiagnosticsRecord:
    cfg = problem.config
    u = state.u
    try:
        J = j_functional(u, rhs_value, problem.M, tol=cfg.conservation_tol)
    except ConservationFault as exc:
        log.warning("t=%.4g: %s", state.t, exc)
        J = j_functional(u, rhs_value, problem.M, tol=np.inf)
    report = geometry_report(
        u, problem.rho, problem.rho_decomposition.rho_tilde, problem.alpha_prime, problem.grid
    )
    return DiagnosticsRecord(
        t=state.t,
        dt=state.dt_current,
        step=state.step_count,
        conservation_error=conservation_error(state, problem.M),
        geometry=report,
        J=J,
        sup_rhs=float(np.max(np.abs(rhs_value))),
        elliptic_residual=None if certificate is None else certificate.residual,
        torsion_identity=torsion_identity_residual(u, problem.grid),
        curvature_identity=curvature_torsion_residual(u, problem.grid),
        stokes_exactness=stokes_exactness(u, problem),
    )


def in_preserved_region(u: np.ndarray, problem: FlowProblem, hessian=None) -> tuple[bool, str]:
    cfg = problem.config
    g = problem.grid
    h = complex_hessian(u, g) if hessian is None else hessian
    lo, hi = eigenvalues(F_hat(u, problem.rho_decomposition.rho_tilde, problem.alpha_prime, g, hessian=h))
    lam_min, lam_max = float(lo.min()), float(hi.max())
    op_min = float(eigenvalues(omega_prime(u, problem.rho, problem.alpha_prime, g, hessian=h))[0].min())
    if not op_min > 0:
        return False, f"omega' lost positivity (min eigenvalue {op_min:.3e})"
    if lam_min < cfg.f_hat_min or lam_max > cfg.f_hat_max:
        return False, f"F_hat eigenvalues [{lam_min:.4f}, {lam_max:.4f}] left [{cfg.f_hat_min}, {cfg.f_hat_max}]"
    return True, ""


def _advance(state: FlowState, problem: FlowProblem, r: np.ndarray | None) -> FlowState:
    cfg = problem.config
    remaining = cfg.t_max - state.t
    if cfg.dt_policy == "fixed":
        return step(state, problem, min(cfg.dt, remaining))
    dt = min(suggest_dt(state, problem, rhs_value=r), remaining)
    mass = float(np.mean(np.exp(state.u)))
    for _ in range(MAX_HALVINGS):
        new = step(state, problem, dt)
        drift = abs(float(np.mean(np.exp(new.u))) - mass)
        if drift <= DRIFT_PER_STEP * problem.M:
            return new
        dt = suggest_dt(FlowState(state.u, state.t, state.step_count, dt), problem, drift_violation=True)
        log.debug("drift %.3e per step, retrying with dt=%.3e", drift, dt)
    raise BlowUpError("conservation drift persists after repeated dt halving")


def run(
    config: FlowConfig,
    state: FlowState | None = None,
    on_record: Callable[[DiagnosticsRecord, FlowState], None] | None = None,
) -> RunResult:
    problem = FlowProblem(config)
    st = state if state is not None else initial_state(problem)
    if config.outside_hypotheses:
        log.warning("non-constant initial data: the convergence theory assumes u_0 = log M")
    records: list[DiagnosticsRecord] = []
    t_end = config.t_max - 1e-12 * max(1.0, abs(config.t_max))

    def emit(rec):
        records.append(rec)
        if on_record is not None:
            on_record(rec, st)

    def finish(reason, certificate=None, message=""):
        return RunResult(
            state=st,
            records=records,
            reason=reason,
            certificate=certificate,
            outside_hypotheses=config.outside_hypotheses,
            message=message,
            last_valid=st,
        )

    # Monitors, convergence and records are evaluated every ``record_every``
    # steps; between checks the loop only steps.
    while True:
        check = st.step_count % config.record_every == 0 or st.t >= t_end
        if check:
            h = complex_hessian(st.u, problem.grid)
            try:
                r = rhs(st.u, problem, hessian=h)
            except BlowUpError as exc:
                return finish(BLOW_UP, message=str(exc))
            ok, why = in_preserved_region(st.u, problem, hessian=h)
            certificate = None
            converged = False
            if float(np.max(np.abs(r))) <= config.eps_rhs:
                certificate = elliptic_residual(st.u, problem)
                converged = certificate.passes(config.eps_residual, config.conservation_tol)
            emit(make_record(st, problem, r, certificate))

            if not ok:
                return finish(ELLIPTICITY_LOSS, message=why)
            if converged:
                return finish(CONVERGED, certificate)
            if st.t >= t_end:
                return finish(T_MAX, elliptic_residual(st.u, problem))
        else:
            r = None

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                st = _advance(st, problem, r)
        except (BlowUpError, FloatingPointError) as exc:
            return finish(BLOW_UP, message=str(exc))
