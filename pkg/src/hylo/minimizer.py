"""Minimization of E on the charge manifold {H(u, w) = sigma}.

The frequency is eliminated through the constraint, w = sigma / (2 K(u)),
leaving the reduced energy

    F(u) = J(u) + sigma^2 / (4 K(u)),

whose gradient J'(u) - w^2 K'(u) is the residual of J'(u) = w^2 K'(u).
F is decreased by projected gradient descent with Armijo backtracking.  The
gradient is taken in the inner product <(L1 - s) u, v> (a Sobolev gradient;
s < m2 is a fixed spectral shift), which makes the step count independent
of the mesh width.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy import linalg, optimize

from .functionals import (
    DegenerateChargeError,
    FunctionalContext,
    Lambda,
    dual_norm,
    evaluate,
    x_norm,
)
from .grid import ConvergenceError, Field, RadialGrid, rayleigh_min, read_field_csv, stiffness_bands
from .testfunctions import annulus_profile, ball_profile

__all__ = [
    "MinimizeConfig",
    "SolutionRecord",
    "VanishingChargeError",
    "reduced_energy",
    "reduced_gradient",
    "initial_guess",
    "minimize",
    "estimate_c_hat",
    "sigma_scan",
    "SigmaScanRow",
]

log = logging.getLogger(__name__)

SIGMA_SET_MARGIN = 0.01
ARMIJO_C = 1e-4
# relative size (in ulps) of the evaluation noise in F; the gauge solve puts it near 1e-13
F_NOISE = 2048


class VanishingChargeError(DegenerateChargeError):
    pass


@dataclass(frozen=True)
class MinimizeConfig:
    sigma: float
    tol_residual: float = 1e-8
    max_iters: int = 200_000
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    init: Literal["test_function", "gaussian", "file"] = "test_function"
    init_R: float | None = None
    init_width: float = 2.0
    init_path: str | None = None
    shift_fraction: float = 0.5
    c_hat: float | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not (self.tol_residual > 0 and self.step_init > 0 and 0 < self.backtrack_factor < 1):
            raise ValueError("tolerances and step parameters must be positive, backtrack factor in (0,1)")


@dataclass
class SolutionRecord:
    u: Field = field(repr=False)
    omega: float
    sigma: float
    energy: float
    charge: float
    lambda_ratio: float
    multiplier: float
    residual: float
    iterations: int
    c_hat_estimate: float | None
    in_sigma_set: bool
    converged: bool
    band_limit: float
    flags: list[str] = field(default_factory=list)
    energy_history: np.ndarray | None = field(default=None, repr=False)
    charge_history: np.ndarray | None = field(default=None, repr=False)
    gauge: object | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "omega": self.omega,
            "energy": self.energy,
            "charge": self.charge,
            "lambda_ratio": self.lambda_ratio,
            "multiplier": self.multiplier,
            "residual": self.residual,
            "iterations": self.iterations,
            "c_hat_estimate": self.c_hat_estimate,
            "in_sigma_set": self.in_sigma_set,
            "converged": self.converged,
            "band_limit": self.band_limit,
            "flags": list(self.flags),
        }


def reduced_energy(ctx: FunctionalContext, u, sigma: float) -> tuple[float, float]:
    """(J(u) + sigma^2 / 4K(u), sigma / 2K(u))."""
    ev = evaluate(ctx, u, gradients=False)
    if not ev.k > 0:
        raise DegenerateChargeError(f"K(u) = {ev.k:.3g}; the constraint cannot be met")
    omega = sigma / (2.0 * ev.k)
    return ev.j + omega * omega * ev.k, omega


def reduced_gradient(ctx: FunctionalContext, u, sigma: float) -> np.ndarray:
    ev = evaluate(ctx, u)
    if not ev.k > 0:
        raise DegenerateChargeError(f"K(u) = {ev.k:.3g}; the constraint cannot be met")
    omega = sigma / (2.0 * ev.k)
    return ev.grad_j - omega * omega * ev.grad_k


def _profile(grid: RadialGrid, R: float, s0: float) -> np.ndarray:
    if grid.ell == 0:
        return ball_profile(grid.r, R, s0)
    return annulus_profile(grid.r, max(R, 1.0 + grid.h), s0)


def initial_guess(ctx: FunctionalContext, config: MinimizeConfig) -> np.ndarray:
    """Starting profile.

    ``test_function``: the trial profile with plateau s0, radius R chosen so
    that its charge at w = m/2 is closest to sigma (unless ``init_R`` is set).
    """
    g = ctx.grid
    s0 = ctx.potential.s0
    if config.init == "gaussian":
        return s0 * np.exp(-0.5 * (g.r / config.init_width) ** 2) * (g.r if g.ell else 1.0) ** abs(g.ell)
    if config.init == "file":
        if config.init_path is None:
            raise ValueError("init=file needs init_path")
        r, vals = read_field_csv(config.init_path)
        return np.interp(g.r, r, vals, right=0.0)
    if config.init_R is not None:
        return _profile(g, config.init_R, s0)
    half_m = 0.5 * ctx.potential.m
    r_hi = (g.r_max - 1.0) / (1.0 if g.ell == 0 else 2.0) - 4.0 * g.h

    def charge_gap(R):
        u = _profile(g, R, s0)
        return half_m * float(g.weights @ (u * u)) - config.sigma

    r_lo = 0.0 if g.ell == 0 else 1.0 + g.h
    if charge_gap(r_hi) <= 0:
        R = r_hi
    elif charge_gap(r_lo) >= 0:
        R = r_lo
    else:
        R = optimize.brentq(charge_gap, r_lo, r_hi, xtol=1e-6)
    return _profile(g, R, s0)


class _Preconditioner:
    def __init__(self, ctx: FunctionalContext, shift: float):
        g = ctx.grid
        self.shift = shift
        self.grid = g
        self.chol = linalg.cholesky_banded(stiffness_bands(g, ctx.m2 + g.centrifugal - shift))

    def __call__(self, gvec: np.ndarray) -> np.ndarray:
        return linalg.cho_solve_banded((self.chol, False), self.grid.weights * gvec)


def _multiplier(ev, omega: float, w: np.ndarray) -> float:
    # multiplier of the half-charge constraint w K(u) = sigma/2, so that
    # dE/du = lam d(wK)/du and dE/dw = lam d(wK)/dw with lam = 2w at a solution
    de = ev.grad_j + omega * omega * ev.grad_k
    dh = omega * ev.grad_k
    return float(w @ (de * dh)) / float(w @ (dh * dh))


def minimize(
    ctx: FunctionalContext,
    config: MinimizeConfig,
    u0=None,
    raise_on_failure: bool = True,
    keep_history: bool = True,
) -> SolutionRecord:
    """Projected Sobolev-gradient descent on the reduced energy.

    Returns a SolutionRecord; raises ConvergenceError (with the last state
    attached) when ``max_iters`` is hit and ``raise_on_failure`` is set.
    """
    g = ctx.grid
    w = g.weights
    m2 = ctx.m2
    sigma = config.sigma
    u = np.maximum(np.asarray(u0 if u0 is not None else initial_guess(ctx, config), dtype=float), 0.0)

    ev = evaluate(ctx, u)
    if ev.k < 1e-14:
        raise VanishingChargeError("initial profile carries no charge")
    omega = sigma / (2.0 * ev.k)
    F = ev.j + omega * omega * ev.k
    grad = ev.grad_j - omega * omega * ev.grad_k

    shift = min(omega * omega, config.shift_fraction * m2)
    prec = _Preconditioner(ctx, shift)
    u_scale = x_norm(ctx, u)
    alpha = config.step_init
    energies = [F]
    charges = [2.0 * omega * ev.k]
    residual = dual_norm(ctx, grad) / max(u_scale, 1e-300)
    it = 0
    stalls = 0
    converged = residual < config.tol_residual
    trace = []
    fp_floor = F_NOISE * np.finfo(float).eps

    while not converged and it < config.max_iters:
        it += 1
        p = prec(grad)
        slope = float(w @ (grad * p))
        if slope <= 0:
            break
        accepted = False
        collapsed = False
        a = min(alpha * 2.0, 1e3)
        for _ in range(60):
            u_new = np.maximum(u - a * p, 0.0)
            ev_new = evaluate(ctx, u_new)
            if ev_new.k < 1e-14:
                collapsed = True
                a *= config.backtrack_factor
                continue
            om_new = sigma / (2.0 * ev_new.k)
            F_new = ev_new.j + om_new * om_new * ev_new.k
            decrease = float(w @ (grad * (u - u_new)))
            if F_new <= F - ARMIJO_C * decrease:
                accepted = True
            elif abs(F_new - F) <= fp_floor * abs(F) and decrease <= 10 * fp_floor * abs(F):
                # below the resolution of F: accept only if the residual drops
                g_new = ev_new.grad_j - om_new * om_new * ev_new.grad_k
                if dual_norm(ctx, g_new) < dual_norm(ctx, grad):
                    accepted = True
            if accepted:
                break
            a *= config.backtrack_factor
        if not accepted:
            if collapsed:
                raise VanishingChargeError(f"charge collapsed at iteration {it}")
            stalls += 1
            if stalls > 3:
                break
            continue
        stalls = 0
        alpha = a
        u, ev, omega, F = u_new, ev_new, om_new, F_new
        grad = ev.grad_j - omega * omega * ev.grad_k
        if keep_history:
            energies.append(F)
            charges.append(2.0 * omega * ev.k)
        if it % 10 == 0 or it < 10:
            u_scale = x_norm(ctx, u)
            residual = dual_norm(ctx, grad) / u_scale
            converged = residual < config.tol_residual
            if len(trace) > 50:
                trace.pop(0)
            trace.append((it, F, omega, residual))
        new_shift = min(omega * omega, config.shift_fraction * m2)
        if abs(new_shift - prec.shift) > 0.05 * m2:
            prec = _Preconditioner(ctx, new_shift)

    u_scale = x_norm(ctx, u)
    residual = dual_norm(ctx, grad) / u_scale
    converged = residual < config.tol_residual

    band = math.sqrt(rayleigh_min(g, m2))
    lam_ratio = 0.5 * (ev.j / (ev.k * omega) + omega)
    flags = []
    if omega > 1.01 * ctx.potential.m:
        flags.append("omega_above_mass")
    if not omega < band:
        flags.append("omega_outside_band")
    c_hat = config.c_hat
    in_set = bool(
        converged
        and 0 < omega < band
        and lam_ratio < ctx.potential.m
        and (c_hat is None or lam_ratio < (1 - SIGMA_SET_MARGIN) * c_hat)
    )
    rec = SolutionRecord(
        u=Field(g, u),
        omega=omega,
        sigma=sigma,
        energy=F,
        charge=2.0 * omega * ev.k,
        lambda_ratio=lam_ratio,
        multiplier=_multiplier(ev, omega, w),
        residual=residual,
        iterations=it,
        c_hat_estimate=c_hat,
        in_sigma_set=in_set,
        converged=converged,
        band_limit=band,
        flags=flags,
        energy_history=np.array(energies) if keep_history else None,
        charge_history=np.array(charges) if keep_history else None,
        gauge=ev.gauge,
    )
    if not converged and raise_on_failure:
        raise ConvergenceError(
            f"no convergence after {it} iterations (residual {residual:.3e})", trace=trace, state=rec
        )
    return rec


def _ratio_descent(ctx: FunctionalContext, u: np.ndarray, tol: float, max_iters: int) -> tuple[float, np.ndarray, float]:
    """Preconditioned descent on J/K; returns (ratio, u, relative residual)."""
    w = ctx.grid.weights
    prec = _Preconditioner(ctx, 0.5 * ctx.m2)
    u = np.maximum(u, 0.0)
    ev = evaluate(ctx, u)
    a = ev.j / ev.k
    alpha = 1.0
    res = np.inf
    for it in range(max_iters):
        # K times the gradient of J/K; the 1/K factor is folded into the Armijo test
        grad = ev.grad_j - a * ev.grad_k
        if it % 10 == 0:
            res = dual_norm(ctx, grad) / max(x_norm(ctx, u) * max(abs(a), ctx.m2), 1e-300)
            if res < tol:
                break
        p = prec(grad)
        slope = float(w @ (grad * p))
        step = min(2.0 * alpha, 1e3)
        for _ in range(60):
            u_new = np.maximum(u - step * p, 0.0)
            ev_new = evaluate(ctx, u_new)
            if ev_new.k > 1e-14:
                a_new = ev_new.j / ev_new.k
                if a_new <= a - ARMIJO_C * float(w @ (grad * (u - u_new))) / ev.k:
                    break
            step *= 0.5
        else:
            break
        if not a_new < a or step * slope < 1e-300:
            break
        alpha = step
        u, ev, a = u_new, ev_new, a_new
    if not res < tol:
        res = dual_norm(ctx, ev.grad_j - a * ev.grad_k) / max(x_norm(ctx, u) * max(abs(a), ctx.m2), 1e-300)
    return a, u, res


def _ratio_initializers(ctx: FunctionalContext) -> list[np.ndarray]:
    g = ctx.grid
    s0 = ctx.potential.s0
    span = (g.r_max - 1.0) if g.ell == 0 else 0.5 * (g.r_max - 1.0)
    fracs = (0.25, 0.5, 0.9)
    inits = [_profile(g, max(f * span, 2.0), s0) for f in fracs]
    inits.append(s0 * np.exp(-0.5 * (g.r / (0.25 * g.r_max)) ** 2) * (g.r if g.ell else 1.0) ** abs(g.ell))
    return inits


def estimate_c_hat(ctx: FunctionalContext, tol: float = 1e-6, max_iters: int = 20_000, details: bool = False):
    """Estimate c_hat = (a_inf / m + m) / 2 with a_inf = inf J/K.

    a_inf is the smallest ratio reached by descent from a fixed list of
    initializers (three trial profiles and a Gaussian), so it bounds the true
    infimum from above and the estimate is an upper bound up to the descent
    tolerance.  If a_inf > m2 the infimum over w >= m sits at the larger
    stationary point and the estimate is sqrt(a_inf) instead.
    """
    best = np.inf
    best_res = np.inf
    for u0 in _ratio_initializers(ctx):
        a, _, res = _ratio_descent(ctx, u0, tol, max_iters)
        if a < best:
            best, best_res = a, res
    if not best_res < tol:
        raise ConvergenceError(f"ratio descent did not converge (residual {best_res:.3e})", trace=[], state=best)
    m = ctx.potential.m
    # Lambda(u, w) = (a/w + w)/2 is increasing on w >= m when a <= m2; otherwise its minimum is at w = sqrt(a)
    c_hat = 0.5 * (best / m + m) if best <= ctx.m2 else math.sqrt(best)
    if details:
        return c_hat, best
    return c_hat


@dataclass
class SigmaScanRow:
    sigma: float
    status: str
    lambda_min: float | None = None
    omega: float | None = None
    residual: float | None = None
    in_sigma_set: bool = False
    error: str | None = None
    record: SolutionRecord | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in dataclasses.asdict(self).items() if k != "record"}
        return d


def _scan_one(ctx: FunctionalContext, config: MinimizeConfig) -> SigmaScanRow:
    try:
        rec = minimize(ctx, config, keep_history=False)
    except (ConvergenceError, DegenerateChargeError) as exc:
        return SigmaScanRow(sigma=config.sigma, status="failed", error=str(exc))
    return SigmaScanRow(
        sigma=config.sigma,
        status="converged",
        lambda_min=rec.lambda_ratio,
        omega=rec.omega,
        residual=rec.residual,
        in_sigma_set=rec.in_sigma_set,
        record=rec,
    )


def sigma_scan(
    ctx: FunctionalContext,
    sigma_list: Sequence[float],
    base: MinimizeConfig | None = None,
    c_hat: float | None = None,
    executor=None,
) -> list[SigmaScanRow]:
    """Run ``minimize`` at each sigma; failures are recorded per row, never raised.

    ``executor`` (e.g. a ProcessPoolExecutor) fans the points out; rows come
    back sorted by sigma either way.
    """
    sigmas = [float(s) for s in sigma_list]
    if not sigmas:
        return []
    if any(not s > 0 for s in sigmas):
        raise ValueError("sigma values must be positive")
    if c_hat is None:
        c_hat = estimate_c_hat(ctx)
    base = base or MinimizeConfig(sigma=sigmas[0])
    configs = [dataclasses.replace(base, sigma=s, c_hat=c_hat) for s in sigmas]
    if executor is None:
        rows = [_scan_one(ctx, c) for c in configs]
    else:
        rows = list(executor.map(_scan_one, [ctx] * len(configs), configs))
    return sorted(rows, key=lambda r: r.sigma)
