"""Follow the coupled ground state in q at fixed charge until hylomorphy is lost.

The existence result only promises some q* > 0; this script estimates where
the trial-profile certificate J/K_q < m2 stops holding and how omega and
max q Phi move on the way there.
"""

import argparse

import numpy as np

from hylo.acceptance import reference_sigma
from hylo.functionals import FunctionalContext
from hylo.grid import ConvergenceError, RadialGrid
from hylo.maxwell import CouplingTooLargeError, coupled_minimize
from hylo.minimizer import MinimizeConfig
from hylo.potential import builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=None, help="default: the reference charge")
    ap.add_argument("--q-max", type=float, default=0.2)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--n-nodes", type=int, default=2000)
    ap.add_argument("--max-iters", type=int, default=50000)
    args = ap.parse_args()

    sigma = args.sigma or reference_sigma()
    grid = RadialGrid(3, 40.0, args.n_nodes)
    pot = builtin("wref")
    u_prev = None
    print(f"sigma = {sigma:.4f}")
    print(f"{'q':>10} {'status':>12} {'omega':>10} {'Lambda':>10} {'max qPhi':>10} {'res_u':>9}")
    for q in np.geomspace(1e-3, args.q_max, args.count):
        ctx = FunctionalContext(grid, pot, float(q))
        try:
            # warm start from the previous q keeps the continuation cheap
            sol = coupled_minimize(ctx, MinimizeConfig(sigma=sigma, max_iters=args.max_iters), u0=u_prev)
        except CouplingTooLargeError:
            print(f"{q:10.4g} {'q_too_large':>12}")
            break
        except ConvergenceError as exc:
            print(f"{q:10.4g} {'failed':>12}  {exc}")
            break
        u_prev = sol.u.values
        print(
            f"{q:10.4g} {'converged':>12} {sol.omega:10.6f} {sol.lambda_ratio:10.6f} "
            f"{sol.gauge.max_q_phi:10.4g} {sol.residual_u:9.2e}"
        )


if __name__ == "__main__":
    main()
