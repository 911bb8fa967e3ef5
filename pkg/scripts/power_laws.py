"""R-scaling of the trial-profile integrals and the hylomorphy ratio.

    python3 scripts/power_laws.py --radii 10 20 40 80
"""

import argparse

from hylo.analysis import hylomorphy_certificate, power_law_exponents
from hylo.functionals import FunctionalContext
from hylo.grid import RadialGrid
from hylo.potential import builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radii", type=float, nargs="+", default=[10, 20, 40, 80])
    ap.add_argument("--potential", default="wref")
    ap.add_argument("--n-nodes", type=int, default=5000)
    args = ap.parse_args()

    r_max = 1.25 * max(args.radii) + 2.0
    ctx = FunctionalContext(RadialGrid(3, r_max, args.n_nodes), builtin(args.potential))
    exps = power_law_exponents(ctx, args.radii)
    print("log-log slopes (expected 2, 3, 3 in three dimensions)")
    for k, v in exps.items():
        print(f"  {k:10s} {v:.4f}")
    rep = hylomorphy_certificate(ctx, R_values=args.radii)
    print(f"\nJ/K along R (m2 = {rep.m2}, plateau limit {rep.limit:.4f}):")
    for R, ratio in zip(rep.R_values, rep.ratios):
        print(f"  R={R:6.1f}  J/K={ratio:.6f}")
    print(f"certificate: {'first R = %g' % rep.first_R if rep.passed else 'not reached'}")


if __name__ == "__main__":
    main()
