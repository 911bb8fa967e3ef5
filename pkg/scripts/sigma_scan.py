"""Scan the charge and locate where Lambda_min crosses c_hat.

    python3 scripts/sigma_scan.py --sigma-min 50 --sigma-max 20000 --count 12
"""

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hylo.functionals import FunctionalContext
from hylo.grid import RadialGrid
from hylo.minimizer import MinimizeConfig, estimate_c_hat, sigma_scan
from hylo.potential import load_potential


@dataclass
class ScanSetup:
    potential: str = "builtin:wref"
    r_max: float = 40.0
    n_nodes: int = 2000
    sigma_min: float = 50.0
    sigma_max: float = 20000.0
    count: int = 12
    max_iters: int = 20000
    out: str = "runs/sigma_scan.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in vars(ScanSetup()).items():
        ap.add_argument("--" + k.replace("_", "-"), type=type(v), default=v)
    setup = ScanSetup(**vars(ap.parse_args()))

    ctx = FunctionalContext(RadialGrid(3, setup.r_max, setup.n_nodes), load_potential(setup.potential))
    c_hat = estimate_c_hat(ctx)
    sigmas = np.geomspace(setup.sigma_min, setup.sigma_max, setup.count)
    rows = sigma_scan(ctx, sigmas, base=MinimizeConfig(sigma=1.0, max_iters=setup.max_iters), c_hat=c_hat)

    print(f"c_hat = {c_hat:.6f}")
    print(f"{'sigma':>12} {'status':>10} {'Lambda':>10} {'omega':>10} {'in set':>7}")
    for r in rows:
        lam = f"{r.lambda_min:10.6f}" if r.lambda_min is not None else " " * 10
        om = f"{r.omega:10.6f}" if r.omega is not None else " " * 10
        print(f"{r.sigma:12.2f} {r.status:>10} {lam} {om} {str(r.in_sigma_set):>7}")
    inside = [r.sigma for r in rows if r.in_sigma_set]
    if inside:
        print(f"smallest sampled charge in the set: {min(inside):.2f}")

    path = Path(setup.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "status", "lambda_min", "omega", "residual", "in_sigma_set"])
        for r in rows:
            w.writerow([repr(r.sigma), r.status, r.lambda_min, r.omega, r.residual, int(r.in_sigma_set)])
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
