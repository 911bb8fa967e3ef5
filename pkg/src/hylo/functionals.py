"""Energy and charge in split form: E(u, w) = J(u) + w^2 K(u), H(u, w) = 2 w K(u).

J(u) = 1/2 int(|u'|^2 + (ell^2/r^2 + m2) u^2) + int N(u)
K(u) = 1/2 int u^2                      (q = 0)
K(u) = 1/2 int (1 - q Phi_u) u^2        (q > 0, Phi_u from the gauge solve)

Gradients are returned in the weighted-L2 sense, i.e. as fields g with
dJ(u)[v] = <g, v>.  They are exact for the discrete functionals.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid, apply_L1, gradient_energy
from .maxwell_core import GaugeProfile, solve_phi
from .potential import PotentialSpec

__all__ = [
    "FunctionalContext",
    "EnergyBreakdown",
    "Evaluation",
    "DegenerateChargeError",
    "J",
    "K",
    "E",
    "H",
    "Lambda",
    "grad_J",
    "grad_K",
    "evaluate",
    "energy_breakdown",
]


class DegenerateChargeError(ValueError):
    """K(u) <= 0: charge and hylomorphy ratio are undefined."""


@dataclass(frozen=True)
class FunctionalContext:
    grid: RadialGrid
    potential: PotentialSpec
    coupling_q: float = 0.0

    def __post_init__(self):
        if self.coupling_q < 0:
            raise ValueError("coupling_q must be nonnegative")
        if self.coupling_q > 0 and (self.grid.dim != 3 or self.grid.ell != 0):
            raise ValueError("coupling_q > 0 requires dim=3 and ell=0")

    @property
    def m2(self) -> float:
        return self.potential.m2

    def with_potential(self, potential: PotentialSpec) -> "FunctionalContext":
        return dataclasses.replace(self, potential=potential)


def _u(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


def J(ctx: FunctionalContext, u) -> float:
    v = _u(u)
    g = ctx.grid
    quad = gradient_energy(g, v) + 0.5 * float(g.weights @ ((ctx.m2 + g.centrifugal) * v * v))
    return quad + float(g.weights @ ctx.potential.n_eval(np.abs(v)))


def _gauge(ctx, v) -> GaugeProfile | None:
    return solve_phi(ctx.grid, v, ctx.coupling_q) if ctx.coupling_q > 0 else None


def K(ctx: FunctionalContext, u) -> float:
    v = _u(u)
    gauge = _gauge(ctx, v)
    if gauge is None:
        return 0.5 * float(ctx.grid.weights @ (v * v))
    return 0.5 * float(ctx.grid.weights @ (gauge.screen * v * v))


def E(ctx, u, omega: float) -> float:
    return J(ctx, u) + omega**2 * K(ctx, u)


def H(ctx, u, omega: float) -> float:
    return 2.0 * omega * K(ctx, u)


def Lambda(ctx, u, omega: float) -> float:
    """Hylomorphy ratio E/H = (J/(K w) + w) / 2, defined for w > 0, K > 0."""
    if not omega > 0:
        raise ValueError("Lambda needs omega > 0")
    k = K(ctx, u)
    if not k > 0:
        raise DegenerateChargeError(f"K(u) = {k:.3g}; hylomorphy ratio undefined")
    return 0.5 * (J(ctx, u) / (k * omega) + omega)


def grad_J(ctx: FunctionalContext, u) -> np.ndarray:
    v = _u(u)
    return apply_L1(ctx.grid, ctx.m2, v) + np.sign(v) * ctx.potential.n_prime(np.abs(v))


def grad_K(ctx: FunctionalContext, u) -> np.ndarray:
    v = _u(u)
    gauge = _gauge(ctx, v)
    if gauge is None:
        return v.copy()
    return gauge.screen**2 * v


@dataclass
class Evaluation:
    """J, K and their gradients at one point, sharing a single gauge solve."""

    j: float
    k: float
    grad_j: np.ndarray
    grad_k: np.ndarray
    gauge: GaugeProfile | None


def evaluate(ctx: FunctionalContext, u, gradients: bool = True) -> Evaluation:
    v = _u(u)
    g = ctx.grid
    gauge = _gauge(ctx, v)
    a = np.abs(v)
    j = gradient_energy(g, v) + 0.5 * float(g.weights @ ((ctx.m2 + g.centrifugal) * v * v)) + float(
        g.weights @ ctx.potential.n_eval(a)
    )
    screen = 1.0 if gauge is None else gauge.screen
    k = 0.5 * float(g.weights @ (screen * v * v))
    if not gradients:
        return Evaluation(j, k, None, None, gauge)
    gj = apply_L1(g, ctx.m2, v) + np.sign(v) * ctx.potential.n_prime(a)
    gk = screen**2 * v if gauge is not None else v.copy()
    return Evaluation(j, k, gj, gk, gauge)


@dataclass
class EnergyBreakdown:
    gradient_term: float
    mass_term: float
    centrifugal_term: float
    nonlinear_term: float
    omega_term: float

    @property
    def total(self) -> float:
        return self.gradient_term + self.mass_term + self.centrifugal_term + self.nonlinear_term + self.omega_term

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def energy_breakdown(ctx: FunctionalContext, u, omega: float) -> EnergyBreakdown:
    v = _u(u)
    g = ctx.grid
    return EnergyBreakdown(
        gradient_term=gradient_energy(g, v),
        mass_term=0.5 * ctx.m2 * float(g.weights @ (v * v)),
        centrifugal_term=0.5 * float(g.weights @ (g.centrifugal * v * v)),
        nonlinear_term=float(g.weights @ ctx.potential.n_eval(np.abs(v))),
        omega_term=omega**2 * K(ctx, v),
    )


def dual_norm(ctx: FunctionalContext, g: np.ndarray) -> float:
    """Norm of the functional v -> <g, v> in the dual of (X, <L1 ., .>)."""
    from .grid import solve_shifted

    p = solve_shifted(ctx.grid, ctx.m2 + ctx.grid.centrifugal, g)
    return math.sqrt(max(float(ctx.grid.weights @ (g * p)), 0.0))


def x_norm(ctx: FunctionalContext, u) -> float:
    v = _u(u)
    return math.sqrt(max(float(ctx.grid.weights @ (apply_L1(ctx.grid, ctx.m2, v) * v)), 0.0))
