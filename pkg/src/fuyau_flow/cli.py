"""Command-line entry point: ``fuyau-flow run | verify | sweep | selftest``.

Exit codes: 0 success, 1 selftest failure, 2 bad config or snapshot,
3 blow-up, 4 ellipticity loss, 5 verification (or sweep bound) failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .diagnostics import elliptic_residual
from .flow import FlowProblem, conservation_error
from .geometry import geometry_report
from .io import ConfigError, SnapshotError, emit_records, parse_config, read_snapshot, write_snapshot
from .runner import run
from .selftest import run_selftest
from .sweep import m_sweep

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 5

THREADS_ENV = "FUYAU_THREADS"

log = logging.getLogger("fuyau_flow")


def _check_compatible(meta: dict, cfg, path) -> None:
    if meta["n"] != cfg.n:
        raise SnapshotError(f"{path}: snapshot has n={meta['n']}, config has n={cfg.n}")
    for key in ("M", "alpha_prime"):
        if meta[key] != float(getattr(cfg, key)):
            raise SnapshotError(f"{path}: snapshot has {key}={meta[key]}, config has {getattr(cfg, key)}")


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.output or cfg.output_dir or "run_output")
    cfg = cfg.with_(output_dir=str(out))
    state = None
    if args.resume:
        state, meta = read_snapshot(args.resume)
        _check_compatible(meta, cfg, args.resume)
        log.info("resuming from t=%g (step %d)", state.t, state.step_count)
    out.mkdir(parents=True, exist_ok=True)

    result = run(cfg, state=state)
    emit_records(result.records, out)
    name = "final.snap" if result.exit_code == 0 else "last_valid.snap"
    write_snapshot(result.last_valid or result.state, out / name, cfg.M, cfg.alpha_prime)

    last = result.records[-1] if result.records else None
    summary = {
        "reason": result.reason,
        "t": result.state.t,
        "steps": result.state.step_count,
        "sup_rhs": None if last is None else last.sup_rhs,
        "elliptic_residual": None if result.certificate is None else result.certificate.residual,
        "outside_hypotheses": result.outside_hypotheses,
        "message": result.message,
        "snapshot": str(out / name),
    }
    print(json.dumps(summary, indent=2))
    return result.exit_code


def cmd_verify(args) -> int:
    cfg = parse_config(args.config)
    state, meta = read_snapshot(args.snapshot)
    _check_compatible(meta, cfg, args.snapshot)
    problem = FlowProblem(cfg)
    cert = elliptic_residual(state.u, problem)
    rep = geometry_report(state.u, problem.rho, problem.rho_decomposition.rho_tilde, problem.alpha_prime, problem.grid)
    ok = cert.passes(cfg.eps_residual, cfg.conservation_tol)
    print(f"elliptic residual   {cert.residual:.6e}  (tol {cfg.eps_residual:g})")
    print(f"conservation error  {conservation_error(state, cfg.M):.6e}  (tol {cfg.conservation_tol:g})")
    for key, value in rep.as_dict().items():
        print(f"{key:<20s}{value:.6e}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_M_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--M: {exc}") from exc
    if len(values) < 3 or any(not v > 0 for v in values):
        raise ConfigError("--M needs at least 3 positive values")
    return values


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    result = m_sweep(cfg, _parse_M_list(args.M), max_workers=args.workers)
    report = result.as_dict()
    report["bounds_confirmed"] = result.bounds_confirmed()
    text = json.dumps(report, indent=2, default=float)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n")
    return EXIT_OK if report["bounds_confirmed"] else EXIT_VERIFY


def cmd_selftest(args) -> int:
    results = run_selftest()
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} oracles passed")
    return EXIT_OK if not failed else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fuyau-flow", description="Anomaly flow on the flat complex 2-torus")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate the flow from a config")
    r.add_argument("config")
    r.add_argument("--resume", metavar="SNAPSHOT")
    r.add_argument("--output", metavar="DIR", help="overrides [output] directory")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="certify a snapshot as an elliptic solution")
    v.add_argument("snapshot")
    v.add_argument("config")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run a config at several M and check the scaling bounds")
    s.add_argument("config")
    s.add_argument("--M", required=True, help="comma-separated list, e.g. 1e2,1e3,1e4")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--output", metavar="FILE", help="also write the JSON report here")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("selftest", help="run the built-in oracle suite")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    workers = int(os.environ.get(THREADS_ENV, "1"))
    try:
        with sfft.set_workers(workers), np.errstate(over="ignore"):
            return args.func(args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
