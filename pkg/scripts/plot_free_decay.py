#!/usr/bin/env python3
"""Quick look at a free-decay run: prints the energy ledger as a table.

    python scripts/plot_free_decay.py [--nx 32] [--dt 2e-3] [--T 0.5]
"""

import argparse

import numpy as np

from mhd2d.dynamics import run
from mhd2d.scenarios import make_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=32)
    ap.add_argument("--dt", type=float, default=2e-3)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--every", type=int, default=25)
    args = ap.parse_args()

    scen = make_scenario("decay", nx=args.nx, dt=args.dt, t_final=args.T)
    traj, ledger = run(scen.cfg, scen.u0, scen.b0, scen.trace)
    t = ledger.times
    e = ledger.col("u_L2_sq") + ledger.col("b_L2_sq")
    d = ledger.col("grad_u_L2_sq") + ledger.col("grad_btilde_L2_sq")
    print(f"{'t':>8} {'E':>12} {'dissipation':>12} {'div_u':>10} {'div_b':>10}")
    for i in range(0, len(t), args.every):
        print(
            f"{t[i]:8.4f} {e[i]:12.6g} {d[i]:12.6g} "
            f"{ledger.col('div_u_Linf')[i]:10.2e} {ledger.col('div_b_Linf')[i]:10.2e}"
        )
    rate = -(np.log(e[-1]) - np.log(e[len(t) // 2])) / (t[-1] - t[len(t) // 2])
    print(f"\nlate-time decay rate of E: {rate:.3f}")


if __name__ == "__main__":
    main()
