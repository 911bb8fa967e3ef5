"""Command-line front end.

    hylo <subcommand> [--config FILE] [flags]

Every run writes summary.json (with a provenance block) plus profile CSVs to
the output directory: $HYLO_OUT if set, else --out, else runs/<subcommand>.
Config files are flat key=value text using the long flag names; flags given
on the command line win.  Exit codes: 0 success, 1 solver failure, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .functionals import DegenerateChargeError
from .grid import ConvergenceError, GridError, RadialGrid, rayleigh_min, write_field_csv
from .potential import PotentialError, check_assumptions, load_potential

log = logging.getLogger("hylo")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# parsing ----------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, dim: int = 3, ell: int = 0, grid: bool = True) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--out", help="output directory (HYLO_OUT overrides)")
    p.add_argument("--potential", default="builtin:wref", help="builtin:<wref|wbad|wfree> or a potential file")
    if grid:
        p.add_argument("--dim", type=int, default=dim)
        p.add_argument("--ell", type=int, default=ell)
        p.add_argument("--r-max", type=float, default=None)
        p.add_argument("--n-nodes", type=int, default=4000)
    p.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=200_000)
    p.add_argument("--init", choices=["test_function", "gaussian", "file"], default="test_function")
    p.add_argument("--init-r", type=float, default=None, help="radius of the trial profile")
    p.add_argument("--init-path", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hylo", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"hylo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-potential", help="check the standing assumptions on W")
    _common(p, grid=False)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--dim", type=int, default=3)

    p = sub.add_parser("solve", help="minimize E at fixed charge")
    _common(p)
    _solver_flags(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--c-hat", action="store_true", help="also estimate c_hat and classify sigma")

    p = sub.add_parser("vortex", help="planar vortex at fixed charge")
    _common(p, dim=2, ell=1)
    _solver_flags(p)
    p.add_argument("--sigma", type=float, required=True)

    p = sub.add_parser("maxwell", help="electrostatic KGM states over a (sigma, q) grid")
    _common(p)
    _solver_flags(p)
    p.add_argument("--sigma", type=_floats, required=True, help="one value or a comma list")
    p.add_argument("--q", type=_floats, required=True, help="one value or a comma list")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("scan-sigma", help="minimize over a list of charges")
    _common(p)
    _solver_flags(p)
    p.add_argument("--sigmas", type=_floats, default=None)
    p.add_argument("--sigma-min", type=float, default=None)
    p.add_argument("--sigma-max", type=float, default=None)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("shoot", help="shooting solution at fixed frequency")
    _common(p)
    p.add_argument("--omega", type=float, required=True)

    p = sub.add_parser("boost", help="boosted standing wave and its residual order")
    _common(p, grid=False)
    p.add_argument("--omega", type=float, default=0.8)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--steps", type=_floats, default=[0.2, 0.1])

    p = sub.add_parser("demo-nonexistence", help="energy along fixed-charge trial states for W < 0")
    _common(p, grid=False)
    p.set_defaults(potential="builtin:wbad")
    p.add_argument("--sigma", type=float, default=100.0)
    p.add_argument("--radii", type=_floats, default=[5, 10, 20, 40])

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("suite", nargs="?", choices=["fast", "all"], default="fast")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--out", help="output directory (HYLO_OUT overrides)")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def read_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _config_path(argv) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    path = _config_path(argv)
    if path is None or not argv or argv[0] not in COMMANDS:
        return parser.parse_args(argv)
    cfg = read_config(path)
    sub = parser._subparsers._group_actions[0].choices[argv[0]]
    known = {a.dest: a for a in sub._actions if a.option_strings}
    flags = []
    for k, v in cfg.items():
        if k not in known or k in ("config", "help"):
            raise ConfigError(f"unknown config key {k!r} for {argv[0]}")
        act = known[k]
        if isinstance(act, argparse._StoreTrueAction):
            if v.lower() in ("1", "true", "yes"):
                flags.append(act.option_strings[-1])
            continue
        flags += [act.option_strings[-1], v]
    # config values first, then the real command line, so that flags win
    return parser.parse_args([argv[0]] + flags + list(argv[1:]))


# helpers ----------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to status strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def out_dir(args) -> Path:
    env = os.environ.get("HYLO_OUT")
    path = Path(env or args.out or Path("runs") / args.command)
    path.mkdir(parents=True, exist_ok=True)
    return path


def provenance(args, grid: RadialGrid | None = None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    return {
        "config": cfg,
        "versions": {
            "hylo": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "grid_hash": grid.digest() if grid is not None else None,
    }


def write_summary(path: Path, args, status: str, result, grid=None) -> None:
    doc = {"command": args.command, "status": status, "result": result, "provenance": provenance(args, grid)}
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False)
    (path / "summary.json").write_text(text + "\n")


def _grid(args, default_r_max: float = 40.0) -> RadialGrid:
    return RadialGrid(args.dim, args.r_max if args.r_max is not None else default_r_max, args.n_nodes, args.ell)


def _min_config(args, sigma: float, c_hat=None):
    from .minimizer import MinimizeConfig

    return MinimizeConfig(
        sigma=sigma,
        tol_residual=args.tol,
        max_iters=args.max_iters,
        init=args.init,
        init_R=args.init_r,
        init_path=args.init_path,
        c_hat=c_hat,
    )


# subcommands ------------------------------------------------------------------


def cmd_check_potential(args) -> int:
    pot = load_potential(args.potential)
    rep = check_assumptions(pot, s_max=args.s_max, samples=args.samples, dim=args.dim)
    d = rep.to_dict()
    outp = out_dir(args)
    write_summary(outp, args, "ok", {"potential": pot.name, "report": d})
    fails = [k for k in ("w_positive", "nondegenerate", "hylomorphy", "growth_a", "growth_b") if not d[k]]
    print(f"{pot.name}: {'all assumptions pass' if rep.all_pass else 'FAIL ' + ', '.join(fails)}; omega0={rep.omega0:.6g}")
    return EXIT_OK


def cmd_solve(args) -> int:
    from .functionals import FunctionalContext
    from .minimizer import estimate_c_hat, minimize

    pot = load_potential(args.potential)
    grid = _grid(args)
    q = getattr(args, "q", 0.0) or 0.0
    ctx = FunctionalContext(grid, pot, q)
    c_hat = estimate_c_hat(ctx) if getattr(args, "c_hat", False) else None
    outp = out_dir(args)
    rec = minimize(ctx, _min_config(args, args.sigma, c_hat), raise_on_failure=False)
    result = rec.to_dict()
    if args.command == "vortex":
        from .analysis import angular_momentum, vortex_pointwise_bound

        lhs, rhs = vortex_pointwise_bound(rec.u)
        result["angular_momentum"] = angular_momentum(rec.u, rec.omega, grid.ell).tolist()
        result["pointwise_bound"] = {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs}
    status = "converged" if rec.converged else "not_converged"
    write_field_csv(outp / "profile.csv", grid.r, rec.u.values)
    write_summary(outp, args, status, result, grid)
    print(
        f"{args.command}: sigma={rec.sigma:.6g} omega={rec.omega:.6g} E={rec.energy:.6g} "
        f"Lambda={rec.lambda_ratio:.6g} residual={rec.residual:.2e} {status}"
    )
    return EXIT_OK if rec.converged else EXIT_SOLVER


def _maxwell_point(grid: RadialGrid, pot, sigma: float, q: float, config) -> dict:
    import dataclasses

    from .functionals import FunctionalContext
    from .maxwell import CouplingTooLargeError, coupled_minimize

    row = {"sigma": sigma, "q": q}
    try:
        sol = coupled_minimize(FunctionalContext(grid, pot, q), dataclasses.replace(config, sigma=sigma))
    except CouplingTooLargeError as exc:
        row.update(status="q_too_large", error=str(exc))
        return row
    except (ConvergenceError, ValueError) as exc:
        row.update(status="failed", error=str(exc))
        return row
    row.update(sol.to_dict())
    row["status"] = "converged"
    row["_u"] = sol.u.values
    row["_phi"] = sol.phi
    return row


def cmd_maxwell(args) -> int:
    pot = load_potential(args.potential)
    grid = _grid(args)
    if grid.dim != 3 or grid.ell != 0:
        raise ConfigError("maxwell runs need dim=3, ell=0")
    if any(q <= 0 for q in args.q) or any(s <= 0 for s in args.sigma):
        raise ConfigError("sigma and q must be positive")
    config = _min_config(args, args.sigma[0])
    tasks = [(s, q) for s in sorted(args.sigma) for q in sorted(args.q)]
    outp = out_dir(args)
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            futs = [ex.submit(_maxwell_point, grid, pot, s, q, config) for s, q in tasks]
            rows = [f.result() for f in futs]
    else:
        rows = [_maxwell_point(grid, pot, s, q, config) for s, q in tasks]
    rows.sort(key=lambda r: (r["sigma"], r["q"]))
    for i, row in enumerate(rows):
        u = row.pop("_u", None)
        phi = row.pop("_phi", None)
        if u is None:
            continue
        tag = "" if len(rows) == 1 else f"_{i:03d}"
        write_field_csv(outp / f"profile{tag}.csv", grid.r, u)
        write_field_csv(outp / f"gauge{tag}.csv", grid.r, phi, header=("r", "phi"))
        row["files"] = [f"profile{tag}.csv", f"gauge{tag}.csv"]
    n_ok = sum(r["status"] == "converged" for r in rows)
    status = "ok" if n_ok == len(rows) else ("partial" if n_ok else "failed")
    write_summary(outp, args, status, {"points": rows}, grid)
    for r in rows:
        extra = f" omega={r['omega']:.6g} max_q_phi={r['max_q_phi']:.3g}" if r["status"] == "converged" else ""
        print(f"maxwell: sigma={r['sigma']:.6g} q={r['q']:.3g} {r['status']}{extra}")
    return EXIT_OK if n_ok else EXIT_SOLVER


def cmd_scan_sigma(args) -> int:
    from .functionals import FunctionalContext
    from .minimizer import estimate_c_hat, sigma_scan

    if args.sigmas is not None:
        sigmas = sorted(args.sigmas)
    elif args.sigma_min is not None and args.sigma_max is not None:
        if not 0 < args.sigma_min <= args.sigma_max or args.count < 1:
            raise ConfigError("need 0 < sigma-min <= sigma-max and count >= 1")
        sigmas = np.geomspace(args.sigma_min, args.sigma_max, args.count).tolist()
    else:
        raise ConfigError("give --sigmas or --sigma-min/--sigma-max")
    pot = load_potential(args.potential)
    grid = _grid(args)
    ctx = FunctionalContext(grid, pot)
    c_hat = estimate_c_hat(ctx)
    base = _min_config(args, sigmas[0], c_hat)
    outp = out_dir(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = sigma_scan(ctx, sigmas, base=base, c_hat=c_hat, executor=ex)
    else:
        rows = sigma_scan(ctx, sigmas, base=base, c_hat=c_hat)
    with (outp / "scan.csv").open("w") as fh:
        fh.write("sigma,status,lambda_min,omega,residual,in_sigma_set\n")
        for r in rows:
            fh.write(f"{r.sigma!r},{r.status},{r.lambda_min!r},{r.omega!r},{r.residual!r},{int(r.in_sigma_set)}\n")
    n_ok = sum(r.status == "converged" for r in rows)
    write_summary(outp, args, "ok" if n_ok == len(rows) else "partial", {"c_hat": c_hat, "rows": [r.to_dict() for r in rows]}, grid)
    for r in rows:
        lam = f" Lambda={r.lambda_min:.6g} in_sigma_set={r.in_sigma_set}" if r.status == "converged" else ""
        print(f"scan-sigma: sigma={r.sigma:.6g} {r.status}{lam}")
    return EXIT_OK if n_ok else EXIT_SOLVER


def cmd_shoot(args) -> int:
    from .shooting import shoot

    pot = load_potential(args.potential)
    kappa2 = pot.m2 - args.omega**2
    r_max = args.r_max if args.r_max is not None else (20.0 / math.sqrt(kappa2) if kappa2 > 0 else 40.0)
    grid = RadialGrid(args.dim, r_max, args.n_nodes, args.ell)
    res = shoot(pot, args.dim, args.ell, args.omega, grid)
    outp = out_dir(args)
    write_field_csv(outp / "profile.csv", grid.r, res.profile.values)
    result = {
        "omega": res.omega,
        "shoot_param": res.shoot_param,
        "decay_rate": res.decay_rate,
        "expected_decay_rate": math.sqrt(kappa2),
        "residual": res.residual,
        "bisection_steps": res.bisection_steps,
        "splice_radius": res.splice_radius,
    }
    write_summary(outp, args, "ok", result, grid)
    print(f"shoot: omega={res.omega:.6g} shoot_param={res.shoot_param:.12g} decay={res.decay_rate:.6g} residual={res.residual:.2e}")
    return EXIT_OK


def cmd_boost(args) -> int:
    from .analysis import BoostSpec, boost_residual, lorentz_boost
    from .shooting import shoot

    BoostSpec(v=args.v, omega=args.omega)  # validates |v| < 1 before any compute
    pot = load_potential(args.potential)
    shot = shoot(pot, 3, 0, args.omega)
    wave = lorentz_boost(shot, args.omega, args.v)
    res = boost_residual(wave, pot, steps=tuple(args.steps))
    outp = out_dir(args)
    result = {**wave.spec.to_dict(), "dispersion_gap": wave.spec.dispersion_gap(), "residuals": res["residuals"], "residual_orders": res["ratios"]}
    write_summary(outp, args, "ok", result)
    print(f"boost: v={args.v} gamma={wave.spec.gamma:.6g} omega_v={wave.spec.omega_v:.6g} residual ratios={res['ratios']}")
    return EXIT_OK


def cmd_demo_nonexistence(args) -> int:
    from .analysis import nonexistence_sequence
    from .functionals import FunctionalContext

    pot = load_potential(args.potential)
    r_need = max(args.radii) + 2.0
    grid = RadialGrid(3, max(r_need, 10.0), max(64, int(40 * r_need)))
    rows = nonexistence_sequence(FunctionalContext(grid, pot), args.sigma, args.radii)
    outp = out_dir(args)
    with (outp / "sequence.csv").open("w") as fh:
        fh.write("R,omega,energy,charge\n")
        for r in rows:
            fh.write(f"{r.R!r},{r.omega!r},{r.energy!r},{r.charge!r}\n")
    write_summary(outp, args, "ok", {"rows": [vars(r) for r in rows]}, grid)
    print("demo-nonexistence: " + ", ".join(f"E(R={r.R:g})={r.energy:.6g}" for r in rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_suite, tol_scale

    results = run_suite(args.suite, echo=print)
    passed = all(r.passed for r in results)
    outp = out_dir(args)
    doc = {
        "suite": args.suite,
        "tol_scale": tol_scale(),
        "passed": passed,
        "criteria": [r.to_dict() for r in results],
    }
    (outp / "verify.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")
    print(f"verify {args.suite}: {sum(r.passed for r in results)}/{len(results)} passed")
    return EXIT_OK if passed else EXIT_SOLVER


COMMANDS = {
    "check-potential": cmd_check_potential,
    "solve": cmd_solve,
    "vortex": cmd_solve,
    "maxwell": cmd_maxwell,
    "scan-sigma": cmd_scan_sigma,
    "shoot": cmd_shoot,
    "boost": cmd_boost,
    "demo-nonexistence": cmd_demo_nonexistence,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"hylo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GridError, PotentialError) as exc:
        print(f"hylo {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DegenerateChargeError, RuntimeError) as exc:
        print(f"hylo {args.command}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # precondition failures (|v| >= 1, omega outside the band, ...) are input errors
        print(f"hylo {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
