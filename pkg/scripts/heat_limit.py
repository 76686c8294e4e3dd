"""Heat-limit check: alpha' = 0 and no data, so e^u solves the heat equation.

    python scripts/heat_limit.py [--dt 0.01] [--t-max 8]
"""

import argparse
import time

import numpy as np

from fuyau_flow import FlowConfig, MuMode, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--t-max", type=float, default=8.0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--integrator", choices=["imex", "rk4"], default="imex")
    args = ap.parse_args()

    M = 100.0
    cfg = FlowConfig(
        n=16, alpha_prime=0.0, M=M, dt=args.dt, t_max=args.t_max, integrator=args.integrator,
        record_every=max(1, int(round(1.0 / args.dt))), initial_modes=[MuMode((1, 0, 0, 0), args.eps)],
    )
    t0 = time.perf_counter()
    res = run(cfg)
    elapsed = time.perf_counter() - t0
    x1 = np.arange(cfg.n) * (2 * np.pi / cfg.n)
    print(f"{'t':>6} {'J':>12} {'J exact':>12}")
    for r in res.records:
        print(f"{r.t:6.2f} {r.J:12.5e} {args.eps**2 * np.exp(-r.t / 4) / 128:12.5e}")
    exact = M + args.eps * np.exp(-res.state.t / 8) * np.cos(x1)[:, None, None, None]
    err = np.max(np.abs(np.exp(res.state.u) - exact))
    print(f"sup|e^u - exact| at t={res.state.t:g}: {err:.3e}   ({elapsed:.1f}s)")


if __name__ == "__main__":
    main()
