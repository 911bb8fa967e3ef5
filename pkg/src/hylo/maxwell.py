"""Electrostatic Klein-Gordon-Maxwell states.

With the ansatz A = 0, phi = w Phi_u, the coupled system reduces to the same
constrained problem as the uncoupled one with K replaced by the screened
charge functional

    K_q(u) = 1/2 int (1 - q Phi_u) u^2,     -Lap Phi_u + q^2 u^2 Phi_u = q u^2.

Phi_u is re-solved exactly at every evaluation (one tridiagonal solve), so the
gradient (1 - q Phi_u)^2 u stays exact.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .functionals import FunctionalContext, dual_norm, evaluate, x_norm
from .grid import Field, RadialGrid, apply_L1, gradient_energy, write_field_csv
from .maxwell_core import GaugeBoundError, GaugeProfile, gauge_residual, solve_phi
from .minimizer import MinimizeConfig, SolutionRecord, initial_guess, minimize

__all__ = [
    "GaugeProfile",
    "GaugeBoundError",
    "CoupledSolution",
    "CouplingTooLargeError",
    "solve_phi",
    "gauge_residual",
    "K_q",
    "grad_K_q",
    "screening_correction",
    "q_scaling",
    "gauge_energy_identity",
    "coupled_minimize",
    "write_gauge_csv",
]


class CouplingTooLargeError(ValueError):
    """J/K_q >= m2 at the initial profile: no hylomorphy certificate at this (sigma, q)."""


def _require_q(ctx: FunctionalContext) -> float:
    if not ctx.coupling_q > 0:
        raise ValueError("context has no coupling (coupling_q = 0)")
    return ctx.coupling_q


def K_q(ctx: FunctionalContext, u) -> float:
    q = _require_q(ctx)
    v = np.asarray(getattr(u, "values", u), dtype=float)
    gauge = solve_phi(ctx.grid, v, q)
    return 0.5 * float(ctx.grid.weights @ (gauge.screen * v * v))


def grad_K_q(ctx: FunctionalContext, u) -> np.ndarray:
    # envelope property: Phi_u is stationary for the gauge energy, so no d(Phi)/du term
    q = _require_q(ctx)
    v = np.asarray(getattr(u, "values", u), dtype=float)
    gauge = solve_phi(ctx.grid, v, q)
    return gauge.screen**2 * v


def screening_correction(grid: RadialGrid, u, q: float) -> float:
    """q int Phi_u u^2, i.e. twice the gap K_0(u) - K_q(u)."""
    v = np.asarray(getattr(u, "values", u), dtype=float)
    gauge = solve_phi(grid, v, q)
    return q * float(grid.weights @ (gauge.phi_cap * v * v))


def q_scaling(grid: RadialGrid, u, q_values) -> tuple[float, np.ndarray]:
    """Log-log slope of the screening correction against q, plus the corrections."""
    qs = np.asarray(q_values, dtype=float)
    corr = np.array([screening_correction(grid, u, q) for q in qs])
    slope = np.polyfit(np.log(qs), np.log(corr), 1)[0]
    return float(slope), corr


def gauge_energy_identity(grid: RadialGrid, u, gauge: GaugeProfile, omega: float) -> tuple[float, float]:
    """(int |grad phi|^2, int q phi (w - q phi) u^2) for phi = w Phi_u."""
    v = np.asarray(getattr(u, "values", u), dtype=float)
    q = gauge.q
    phi = omega * gauge.phi_cap
    lhs = 2.0 * gradient_energy(grid, phi)
    rhs = float(grid.weights @ (q * phi * omega * gauge.screen * v * v))
    return lhs, rhs


@dataclass
class CoupledSolution:
    u: Field = dataclasses.field(repr=False)
    omega: float
    gauge: GaugeProfile = dataclasses.field(repr=False)
    energy: float
    charge: float
    lambda_ratio: float
    multiplier: float
    residual_u: float
    residual_phi: float
    iterations: int
    converged: bool
    record: SolutionRecord = dataclasses.field(repr=False)

    @property
    def q(self) -> float:
        return self.gauge.q

    @property
    def phi(self) -> np.ndarray:
        return self.omega * self.gauge.phi_cap

    def to_dict(self) -> dict:
        d = self.record.to_dict()
        d.update(
            q=self.q,
            max_q_phi=self.gauge.max_q_phi,
            residual_u=self.residual_u,
            residual_phi=self.residual_phi,
        )
        return d


def _residual_u(ctx: FunctionalContext, u: np.ndarray, gauge: GaugeProfile, omega: float) -> float:
    """Relative dual-norm residual of -Lap u + W'(u) = (w - q phi)^2 u."""
    big_omega = omega * gauge.screen
    r = apply_L1(ctx.grid, ctx.m2, u) + np.sign(u) * ctx.potential.n_prime(np.abs(u)) - big_omega**2 * u
    return dual_norm(ctx, r) / max(x_norm(ctx, u), 1e-300)


def coupled_minimize(ctx: FunctionalContext, config: MinimizeConfig, u0=None, raise_on_failure: bool = True) -> CoupledSolution:
    """Minimize E = J + w^2 K_q on {2 w K_q(u) = sigma}."""
    _require_q(ctx)
    start = np.asarray(u0 if u0 is not None else initial_guess(ctx, config), dtype=float)
    ev = evaluate(ctx, start, gradients=False)
    if not (ev.k > 0 and ev.j / ev.k < ctx.m2):
        raise CouplingTooLargeError(
            f"J/K_q = {ev.j / ev.k if ev.k > 0 else math.inf:.4g} >= m2 at the initial profile; "
            f"q = {ctx.coupling_q} is too large for sigma = {config.sigma}"
        )
    rec = minimize(ctx, config, u0=start, raise_on_failure=raise_on_failure)
    u = rec.u.values
    gauge = solve_phi(ctx.grid, u, ctx.coupling_q)
    res_phi = gauge_residual(ctx.grid, u, gauge.phi_cap, gauge.q, rec.omega)
    res_u = _residual_u(ctx, u, gauge, rec.omega)
    return CoupledSolution(
        u=rec.u,
        omega=rec.omega,
        gauge=gauge,
        energy=rec.energy,
        charge=rec.charge,
        lambda_ratio=rec.lambda_ratio,
        multiplier=rec.multiplier,
        residual_u=res_u,
        residual_phi=res_phi,
        iterations=rec.iterations,
        converged=rec.converged,
        record=rec,
    )


def write_gauge_csv(path, grid: RadialGrid, phi: np.ndarray) -> None:
    write_field_csv(path, grid.r, phi, header=("r", "phi"))
