"""Convergence order of the (NKG) residual of boosted standing waves.

Compares spline and piecewise-linear radial interpolation across velocities.
A second-order stencil applied to an exact solution gives ratios near 4.
"""

import argparse

from hylo.analysis import boost_residual, lorentz_boost
from hylo.potential import builtin
from hylo.shooting import shoot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omega", type=float, default=0.8)
    ap.add_argument("--velocities", type=float, nargs="+", default=[0.0, 0.3, 0.6, 0.9])
    ap.add_argument("--steps", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05])
    args = ap.parse_args()

    pot = builtin("wref")
    shot = shoot(pot, 3, 0, args.omega)
    print(f"omega={args.omega} u(0)={shot.shoot_param:.10f} residual={shot.residual:.2e}")
    for kind in ("cubic", "linear"):
        print(f"\n{kind} interpolation; ratios between consecutive steps {args.steps}")
        for v in args.velocities:
            res = boost_residual(lorentz_boost(shot, args.omega, v, kind=kind), pot, steps=tuple(args.steps))
            ratios = " ".join(f"{x:6.3f}" for x in res["ratios"])
            print(f"  v={v:4.2f}  residual(h_min)={res['residuals'][-1]:.2e}  ratios: {ratios}")


if __name__ == "__main__":
    main()
