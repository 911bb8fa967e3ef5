"""Shooting versus constrained minimization over a range of charges."""

import argparse

from hylo.acceptance import reference_context, reference_sigma
from hylo.minimizer import MinimizeConfig, minimize
from hylo.shooting import cross_validate, shoot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--factors", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0, 4.0])
    args = ap.parse_args()

    ctx = reference_context()
    s0 = reference_sigma()
    print(f"{'sigma':>10} {'omega':>9} {'u(0)':>9} {'L2 dist':>9} {'dE':>9} {'pass':>5}")
    for f in args.factors:
        rec = minimize(ctx, MinimizeConfig(sigma=f * s0), keep_history=False)
        shot = shoot(ctx.potential, 3, 0, rec.omega, ctx.grid)
        cv = cross_validate(shot, rec, ctx)
        print(
            f"{rec.sigma:10.2f} {rec.omega:9.6f} {shot.shoot_param:9.6f} "
            f"{cv.l2_distance:9.2e} {cv.energy_difference:9.2e} {str(cv.passed):>5}"
        )


if __name__ == "__main__":
    main()
