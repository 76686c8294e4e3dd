"""Pseudo-spectral lab for the anomaly (Fu-Yau) flow on the flat complex 2-torus."""

from .diagnostics import Certificate, DiagnosticsRecord, elliptic_residual, fit_decay_rate, j_functional
from .flow import FlowConfig, FlowProblem, FlowState, MuMode, RhoMode, rhs, rhs_geometric, step
from .geometry import GeometryReport, geometry_report
from .grid import GridSpec, build_grid
from .io import emit_records, parse_config, read_snapshot, write_snapshot
from .runner import RunResult, run
from .sweep import SweepResult, m_sweep

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "DiagnosticsRecord",
    "FlowConfig",
    "FlowProblem",
    "FlowState",
    "GeometryReport",
    "GridSpec",
    "MuMode",
    "RhoMode",
    "RunResult",
    "SweepResult",
    "build_grid",
    "elliptic_residual",
    "emit_records",
    "fit_decay_rate",
    "geometry_report",
    "j_functional",
    "m_sweep",
    "parse_config",
    "read_snapshot",
    "rhs",
    "rhs_geometric",
    "run",
    "step",
    "write_snapshot",
]
