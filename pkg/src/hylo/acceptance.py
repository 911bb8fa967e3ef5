"""Acceptance criteria, shared by the test suite and ``hylo verify``.

Each criterion returns a CriterionResult.  Tolerances are multiplied by the
environment variable HYLO_TOL_SCALE (default 1), so a tampered scale makes the
suite fail instead of silently passing.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .analysis import (
    angular_momentum,
    angular_momentum_quadrature,
    boost_residual,
    lorentz_boost,
    nonexistence_sequence,
    vortex_pointwise_bound,
)
from .functionals import FunctionalContext, H, J, K, evaluate, grad_J, grad_K
from .grid import ConvergenceError, RadialGrid, rayleigh_min
from .maxwell import GaugeBoundError, coupled_minimize, q_scaling, solve_phi
from .minimizer import MinimizeConfig, estimate_c_hat, minimize, sigma_scan
from .potential import builtin, truncate
from .shooting import cross_validate, shoot
from .testfunctions import TestFunctionSpec, build_test_function

__all__ = ["CriterionResult", "CRITERIA", "FAST", "run_suite", "tol_scale", "ball_oracle"]


def tol_scale() -> float:
    return float(os.environ.get("HYLO_TOL_SCALE", "1"))


def _tol(x: float) -> float:
    return x * tol_scale()


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float = 0.0
    budget: float = math.inf
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name} ({self.seconds:.1f}s / {self.budget:.0f}s)"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": self.seconds,
            "budget": self.budget,
            "details": self.details,
        }


# shared fixtures --------------------------------------------------------------


def reference_grid() -> RadialGrid:
    return RadialGrid(3, 40.0, 4000)


@lru_cache(maxsize=None)
def reference_context() -> FunctionalContext:
    return FunctionalContext(reference_grid(), builtin("wref"))


@lru_cache(maxsize=None)
def reference_sigma() -> float:
    ctx = reference_context()
    u = build_test_function(ctx.grid, TestFunctionSpec("ball", 10.0, 1.0))
    return H(ctx, u, 0.5)


@lru_cache(maxsize=None)
def reference_solution():
    return minimize(reference_context(), MinimizeConfig(sigma=reference_sigma()))


@lru_cache(maxsize=None)
def reference_c_hat() -> float:
    return estimate_c_hat(reference_context())


def ball_oracle(R: float, s0: float, m2: float, n_coeffs: dict[int, float], dim: int = 3) -> tuple[float, float]:
    """Exact (J, K) of the ball trial profile for polynomial N, by polynomial integration."""
    from .grid import surface_measure

    S = surface_measure(dim)
    rpow = Polynomial([0] * (dim - 1) + [1])
    N = Polynomial([n_coeffs.get(k, 0.0) for k in range(max(n_coeffs) + 1)])

    def integral(p: Polynomial, a: float, b: float) -> float:
        P = p.integ()
        return float(P(b) - P(a))

    ramp = Polynomial([s0 * (1 + R), -s0])  # s0 (1 + R - r) on [R, R+1]
    grad2 = S * integral(Polynomial([s0 * s0]) * rpow, R, R + 1)
    mass_plateau = S * s0 * s0 * R**dim / dim
    mass_ramp = S * integral(ramp * ramp * rpow, R, R + 1)
    n_plateau = S * float(N(s0)) * R**dim / dim
    n_ramp = S * integral(N(ramp) * rpow, R, R + 1)
    mass = mass_plateau + mass_ramp
    j = 0.5 * grad2 + 0.5 * m2 * mass + n_plateau + n_ramp
    return j, 0.5 * mass


def _smooth_random(grid: RadialGrid, rng: np.random.Generator, positive: bool = True, scale: float = 1.0) -> np.ndarray:
    r = grid.r
    width = rng.uniform(2.0, 0.3 * grid.r_max)
    amp = scale * rng.uniform(0.2, 1.5)
    base = amp * np.exp(-((r / width) ** 2))
    wiggle = 1.0 + 0.3 * np.sin(rng.uniform(0.2, 2.0) * r + rng.uniform(0, 2 * np.pi))
    u = base * wiggle
    if grid.ell:
        u = u * (r / (1.0 + r)) ** abs(grid.ell)
    return u if positive else u * np.sign(np.sin(0.3 * r) + 0.1)


# criteria ---------------------------------------------------------------------


def c01_multiplier() -> dict:
    rec = reference_solution()
    err = abs(rec.multiplier - 2 * rec.omega) / rec.omega
    return {"passed": rec.converged and err < _tol(1e-6), "omega": rec.omega, "multiplier": rec.multiplier, "relative_error": err}


def c02_frequency_band() -> dict:
    ctx = reference_context()
    s = reference_sigma()
    sigmas = [s * f for f in (0.25, 0.5, 1.0, 2.0, 4.0)]
    rows = sigma_scan(ctx, sigmas, c_hat=reference_c_hat())
    band = math.sqrt(rayleigh_min(ctx.grid, ctx.m2))
    conv = [r for r in rows if r.status == "converged"]
    ok = bool(conv) and all(0 < r.omega < band for r in conv)
    return {
        "passed": ok,
        "band": band,
        "omega": [r.omega for r in rows],
        "status": [r.status for r in rows],
    }


def c03_hylomorphy() -> dict:
    ctx = reference_context()
    u = build_test_function(ctx.grid, TestFunctionSpec("ball", 10.0, 1.0))
    ratio = J(ctx, u) / K(ctx, u)
    j, k = ball_oracle(10.0, 1.0, 1.0, {3: -1.0, 4: 0.5})
    oracle = j / k
    ok = abs(ratio - 0.31) <= _tol(0.02) and abs(ratio - oracle) <= _tol(0.02) and ratio < 1.0
    return {"passed": ok, "ratio": ratio, "oracle": oracle}


def c04_oracle_equivalence() -> dict:
    ctx = reference_context()
    rec = reference_solution()
    shot = shoot(ctx.potential, 3, 0, rec.omega, ctx.grid)
    cv = cross_validate(shot, rec, ctx, tol=_tol(1e-2))
    return {"passed": cv.passed, **cv.to_dict()}


def _fd_check(fun: Callable, grad: Callable, u: np.ndarray, w: np.ndarray, rng, n_dir: int = 20) -> float:
    worst = 0.0
    g = grad(u)
    gnorm = math.sqrt(float(w @ (g * g)))
    for _ in range(n_dir):
        v = rng.standard_normal(u.size)
        # smooth the direction so that finite differences are meaningful on the mesh
        v = np.convolve(v, np.ones(25) / 25, mode="same")
        vnorm = math.sqrt(float(w @ (v * v)))
        eps = 1e-4 * math.sqrt(float(w @ (u * u))) / vnorm
        fd = (fun(u + eps * v) - fun(u - eps * v)) / (2 * eps)
        an = float(w @ (g * v))
        denom = max(abs(an), abs(fd), 1e-3 * gnorm * vnorm)
        worst = max(worst, abs(fd - an) / denom)
    return worst


def c05_gradients() -> dict:
    grid = RadialGrid(3, 20.0, 800)
    pot = builtin("wref")
    rng = np.random.default_rng(5)
    out = {}
    for q in (0.0, 0.05):
        ctx = FunctionalContext(grid, pot, q)
        u = _smooth_random(grid, rng, scale=1.0)
        out[f"J_q{q}"] = _fd_check(lambda x: J(ctx, x), lambda x: grad_J(ctx, x), u, grid.weights, rng)
        out[f"K_q{q}"] = _fd_check(lambda x: K(ctx, x), lambda x: grad_K(ctx, x), u, grid.weights, rng)
    return {"passed": all(v < _tol(1e-5) for v in out.values()), "worst_relative_error": out}


def c06_gauge_bound() -> dict:
    grid = RadialGrid(3, 40.0, 2000)
    rng = np.random.default_rng(6)
    violations = 0
    worst = 0.0
    count = 0
    for q in (1e-3, 1e-2, 1e-1):
        for _ in range(50):
            u = _smooth_random(grid, rng, positive=False, scale=rng.choice([0.1, 1.0, 10.0]))
            try:
                prof = solve_phi(grid, u, q)
                worst = max(worst, prof.max_q_phi)
                if not (prof.min_screen > 0 and prof.phi_cap.min() >= 0):
                    violations += 1
            except GaugeBoundError:
                violations += 1
            count += 1
    return {"passed": violations == 0, "violations": violations, "solves": count, "max_q_phi": worst}


def c07_q_scaling() -> dict:
    grid = reference_grid()
    u = build_test_function(grid, TestFunctionSpec("ball", 10.0, 1.0)).values
    qs = np.logspace(-3, -1, 5)
    slope, corr = q_scaling(grid, u, qs)
    return {"passed": abs(slope - 2.0) <= _tol(0.1), "slope": slope, "q": qs.tolist(), "correction": corr.tolist()}


def c08_nkgm_consistency() -> dict:
    ctx0 = reference_context()
    rec = reference_solution()
    ctx = FunctionalContext(ctx0.grid, ctx0.potential, 1e-6)
    sol = coupled_minimize(ctx, MinimizeConfig(sigma=reference_sigma()))
    w = ctx0.grid.weights
    dist = math.sqrt(float(w @ (sol.u.values - rec.u.values) ** 2) / float(w @ rec.u.values**2))
    ok = sol.converged and dist < _tol(1e-3) and sol.residual_u < _tol(1e-7) and sol.residual_phi < _tol(1e-7)
    return {
        "passed": ok,
        "distance": dist,
        "residual_u": sol.residual_u,
        "residual_phi": sol.residual_phi,
        "max_q_phi": sol.gauge.max_q_phi,
    }


def c09_nonexistence() -> dict:
    ctx = FunctionalContext(RadialGrid(3, 50.0, 2000), builtin("wbad"))
    rows = nonexistence_sequence(ctx, 100.0, [5, 10, 20, 40])
    e = [r.energy for r in rows]
    ok = e[-1] < 0 and all(e[i + 1] < e[i] for i in range(len(e) - 3, len(e) - 1))
    return {"passed": ok, "energies": e, "charges": [r.charge for r in rows]}


@lru_cache(maxsize=None)
def vortex_solution():
    grid = RadialGrid(2, 40.0, 4000, ell=1)
    ctx = FunctionalContext(grid, builtin("wref"))
    u = build_test_function(grid, TestFunctionSpec("annulus", 6.0, 1.0))
    return ctx, minimize(ctx, MinimizeConfig(sigma=H(ctx, u, 0.5)))


def c10_vortex() -> dict:
    ctx, rec = vortex_solution()
    u = rec.u.values
    mz = angular_momentum(rec.u, rec.omega, 1)[2]
    mz_quad = angular_momentum_quadrature(rec.u, rec.omega, 1)
    mz_err = abs(mz - mz_quad) / abs(mz)
    lhs, rhs = vortex_pointwise_bound(rec.u)
    origin = u[0] / u.max()
    ok = (
        rec.converged
        and rec.residual < _tol(1e-7)
        and origin < _tol(1e-2)
        and mz_err < _tol(1e-10)
        and lhs <= rhs
    )
    return {
        "passed": ok,
        "residual": rec.residual,
        "u_first_node_over_max": origin,
        "M_z": mz,
        "M_z_quadrature": mz_quad,
        "M_z_relative_error": mz_err,
        "minus_ell_sigma": -rec.sigma,
        "bound_lhs": lhs,
        "bound_rhs": rhs,
    }


def c11_boost() -> dict:
    pot = builtin("wref")
    shot = shoot(pot, 3, 0, 0.8)
    wave = lorentz_boost(shot, 0.8, 0.6)
    res = boost_residual(wave, pot, steps=(0.2, 0.1))
    ratio = res["ratios"][0]
    gap = abs(wave.spec.dispersion_gap())
    ok = abs(ratio - 4.0) <= _tol(0.5) and gap < _tol(1e-12)
    return {"passed": ok, "ratio": ratio, "residuals": res["residuals"], "dispersion_gap": gap, **wave.spec.to_dict()}


def c12_truncation() -> dict:
    ctx = reference_context()
    rec = reference_solution()
    tpot = truncate(ctx.potential, 1.5)
    tctx = ctx.with_potential(tpot)
    trec = minimize(tctx, MinimizeConfig(sigma=reference_sigma()))
    w = ctx.grid.weights
    umax = float(trec.u.values.max())
    dist = math.sqrt(float(w @ (trec.u.values - rec.u.values) ** 2) / float(w @ rec.u.values**2))
    ok = trec.omega < 1 and umax <= 1.5 + _tol(1e-6) and (umax >= 1.5 or dist <= _tol(1e-8))
    return {"passed": ok, "max_u": umax, "distance": dist, "omega": trec.omega}


def c13_openness() -> dict:
    ctx = reference_context()
    c_hat = reference_c_hat()
    s = reference_sigma()
    rows = sigma_scan(ctx, [s * 0.99, s, s * 1.01], c_hat=c_hat)
    centre = rows[1]
    margin_ok = centre.status == "converged" and centre.lambda_min < (1 - 0.01) * c_hat
    neighbours = [rows[0], rows[2]]
    ok = margin_ok and all(r.status == "converged" and r.lambda_min < c_hat for r in neighbours)
    return {
        "passed": ok,
        "c_hat": c_hat,
        "sigma": [r.sigma for r in rows],
        "lambda": [r.lambda_min for r in rows],
        "status": [r.status for r in rows],
    }


CRITERIA: dict[int, tuple[str, Callable[[], dict], float]] = {
    1: ("multiplier identity", c01_multiplier, 30),
    2: ("frequency band", c02_frequency_band, 180),
    3: ("hylomorphy certificate", c03_hylomorphy, 1),
    4: ("shooting vs minimizer", c04_oracle_equivalence, 120),
    5: ("gradient consistency", c05_gradients, 60),
    6: ("gauge bound", c06_gauge_bound, 60),
    7: ("q^2 scaling", c07_q_scaling, 30),
    8: ("coupled limit q -> 0", c08_nkgm_consistency, 180),
    9: ("non-existence trend", c09_nonexistence, 5),
    10: ("planar vortex", c10_vortex, 120),
    11: ("boost residual order", c11_boost, 60),
    12: ("truncation safety", c12_truncation, 60),
    13: ("openness of the charge set", c13_openness, 120),
}

FAST = (1, 3, 5, 6, 7, 8, 9, 10, 12, 13)


def run_criterion(number: int) -> CriterionResult:
    name, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        details = fn()
        passed = bool(details.pop("passed"))
    except (ConvergenceError, GaugeBoundError, ValueError, RuntimeError) as exc:
        details = {"error": f"{type(exc).__name__}: {exc}"}
        passed = False
    return CriterionResult(number, name, passed, time.perf_counter() - t0, budget, details)


def run_suite(suite: str = "all", echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if suite == "all" else list(FAST)
    results = []
    for n in numbers:
        res = run_criterion(n)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
