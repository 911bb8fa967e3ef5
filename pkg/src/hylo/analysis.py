"""Certificates and constructions around the variational solutions.

Hylomorphy of the trial profiles, the unbounded-below sequence for potentials
that go negative, Lorentz boosts of standing waves, and angular momentum of
planar vortices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .functionals import FunctionalContext, J
from .grid import Field, GridError, RadialGrid, gradient_energy
from .potential import PotentialSpec, check_assumptions, eval_dw, eval_w
from .testfunctions import TestFunctionSpec, build_test_function

__all__ = [
    "HylomorphyReport",
    "hylomorphy_certificate",
    "gradient_scaling",
    "power_law_exponents",
    "NonexistenceRow",
    "PreconditionError",
    "nonexistence_sequence",
    "BoostSpec",
    "BoostedWave",
    "lorentz_boost",
    "boost_residual",
    "angular_momentum",
    "angular_momentum_quadrature",
    "vortex_pointwise_bound",
    "radial_tail_constant",
]


class PreconditionError(ValueError):
    pass


def _shape(grid: RadialGrid) -> str:
    return "annulus" if grid.ell != 0 else "ball"


def _support(shape: str, R: float) -> float:
    return R + 1.0 if shape == "ball" else 2.0 * R + 1.0


@dataclass
class HylomorphyReport:
    R_values: list[float]
    ratios: list[float]
    m2: float
    first_R: float | None
    limit: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(vars(self))


def hylomorphy_certificate(ctx: FunctionalContext, s0: float | None = None, R_values=None) -> HylomorphyReport:
    """J(u_R)/K(u_R) along increasing R; passes once the ratio drops below m2.

    For large R the plateau dominates and the ratio tends to
    m2 + 2 N(s0)/s0^2 (ball) since the ramp contributes only O(R^(d-1)).
    """
    g = ctx.grid
    s0 = ctx.potential.s0 if s0 is None else s0
    shape = _shape(g)
    if R_values is None:
        R_values = []
        R = 2.0
        while _support(shape, R) < g.r_max:
            R_values.append(R)
            R *= 2.0
    ratios = []
    first = None
    for R in R_values:
        u = build_test_function(g, TestFunctionSpec(shape, float(R), s0)).values
        k = 0.5 * float(g.weights @ (u * u))
        ratio = J(ctx, u) / k
        ratios.append(ratio)
        if first is None and ratio < ctx.m2:
            first = float(R)
    limit = ctx.m2 + 2.0 * float(ctx.potential.n_eval(s0)) / s0**2
    return HylomorphyReport(
        R_values=[float(R) for R in R_values],
        ratios=ratios,
        m2=ctx.m2,
        first_R=first,
        limit=limit,
        passed=first is not None,
    )


def gradient_scaling(ctx: FunctionalContext, R: float, s0: float | None = None) -> float:
    """Ratio of (int |grad u|^2 / K) at 2R to its value at R; about 1/2 for the ball."""
    g = ctx.grid
    s0 = ctx.potential.s0 if s0 is None else s0
    vals = []
    for RR in (R, 2.0 * R):
        u = build_test_function(g, TestFunctionSpec(_shape(g), RR, s0)).values
        vals.append(2.0 * gradient_energy(g, u) / (0.5 * float(g.weights @ (u * u))))
    return vals[1] / vals[0]


def power_law_exponents(ctx: FunctionalContext, R_values, s0: float | None = None) -> dict[str, float]:
    """Log-log slopes in R of int |grad u_R|^2, int u_R^2 and int N(u_R)."""
    g = ctx.grid
    s0 = ctx.potential.s0 if s0 is None else s0
    grad, mass, nonlin = [], [], []
    for R in R_values:
        u = build_test_function(g, TestFunctionSpec(_shape(g), float(R), s0)).values
        grad.append(2.0 * gradient_energy(g, u))
        mass.append(float(g.weights @ (u * u)))
        nonlin.append(abs(float(g.weights @ ctx.potential.n_eval(u))))
    logR = np.log(np.asarray(R_values, dtype=float))

    def slope(y):
        return float(np.polyfit(logR, np.log(y), 1)[0])

    return {"gradient": slope(grad), "mass": slope(mass), "nonlinear": slope(nonlin)}


@dataclass
class NonexistenceRow:
    R: float
    omega: float
    energy: float
    charge: float


def nonexistence_sequence(ctx: FunctionalContext, sigma: float, R_values, s0: float | None = None) -> list[NonexistenceRow]:
    """E along trial states of fixed charge sigma with plateau where W < 0.

    w_R = sigma / int u_R^2 enforces H = sigma; E = J(u_R) + w_R sigma / 2.
    """
    pot = ctx.potential
    report = check_assumptions(pot, s_max=max(10.0 * pot.s0, 2.0 * (s0 or pot.s0)))
    if report.w_positive:
        raise PreconditionError("potential satisfies W >= 0 on the sampled range; nothing to demonstrate")
    if s0 is None:
        s0 = pot.s0 if eval_w(pot, pot.s0) < 0 else report.w_positive_witness
    if not eval_w(pot, s0) < 0:
        raise PreconditionError(f"W({s0}) >= 0; not a witness of negativity")
    g = ctx.grid
    rows = []
    for R in R_values:
        u = build_test_function(g, TestFunctionSpec(_shape(g), float(R), s0)).values
        mass = float(g.weights @ (u * u))
        omega = sigma / mass
        energy = J(ctx, u) + 0.5 * omega * sigma
        rows.append(NonexistenceRow(R=float(R), omega=omega, energy=energy, charge=omega * mass))
    return rows


@dataclass(frozen=True)
class BoostSpec:
    v: float
    omega: float

    def __post_init__(self):
        if not abs(self.v) < 1:
            raise ValueError(f"|v| must be below 1, got {self.v}")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.v * self.v)

    @property
    def omega_v(self) -> float:
        return self.gamma * self.omega

    @property
    def k_v(self) -> np.ndarray:
        return np.array([self.gamma * self.omega * self.v, 0.0, 0.0])

    def dispersion_gap(self) -> float:
        """omega_v^2 - |k_v|^2 - omega^2 (zero in exact arithmetic)."""
        return self.omega_v**2 - float(self.k_v @ self.k_v) - self.omega**2

    def to_dict(self) -> dict:
        return {"v": self.v, "gamma": self.gamma, "omega_v": self.omega_v, "k_v": self.k_v.tolist()}


def _radial_samples(profile) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(profile, "r_dense"):
        return np.asarray(profile.r_dense), np.asarray(profile.u_dense)
    if isinstance(profile, Field):
        r, u = profile.grid.r, profile.values
    else:
        r, u = (np.asarray(a, dtype=float) for a in profile)
    # even extension to r = 0 from the first two nodes (u'(0) = 0)
    r1, r2 = r[0], r[1]
    u0 = (u[0] * r2 * r2 - u[1] * r1 * r1) / (r2 * r2 - r1 * r1)
    return np.concatenate(([0.0], r)), np.concatenate(([u0], u))


@dataclass
class BoostedWave:
    """psi_v(t, x) = u(|(gamma (x1 - v t), x2, x3)|) exp(i (k_v . x - omega_v t))."""

    spec: BoostSpec
    radial: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, t, x1, x2, x3) -> np.ndarray:
        s = self.spec
        rho = np.sqrt((s.gamma * (x1 - s.v * t)) ** 2 + x2 * x2 + x3 * x3)
        phase = s.k_v[0] * x1 - s.omega_v * t
        return self.radial(rho) * np.exp(1j * phase)


def lorentz_boost(profile, omega: float, v: float, kind: str = "cubic") -> BoostedWave:
    """Boosted standing wave built from a radial profile.

    ``profile`` is a Field, an (r, u) pair, or a shooting result (whose dense
    trajectory is used).  ``kind`` selects linear or cubic-spline interpolation
    in the radius; beyond the last sample the profile is zero.
    """
    spec = BoostSpec(v=float(v), omega=float(omega))
    r, u = _radial_samples(profile)
    r_end = r[-1]
    if kind == "linear":
        def radial(rho):
            return np.interp(rho, r, u, right=0.0)
    elif kind == "cubic":
        spline = CubicSpline(r, u, bc_type=((1, 0.0), "not-a-knot"))

        def radial(rho):
            rho = np.asarray(rho, dtype=float)
            return np.where(rho <= r_end, spline(np.minimum(rho, r_end)), 0.0)
    else:
        raise ValueError(f"unknown interpolation {kind!r}")
    return BoostedWave(spec=spec, radial=radial)


def _sample_points(L: float, T: float, n: int, rho_min: float, spec: BoostSpec) -> np.ndarray:
    """Deterministic spacetime points in [0, T] x [-L, L]^3 away from the boosted centre."""
    ax = np.linspace(-L, L, n)
    ts = np.linspace(0.0, T, 3)
    t, x1, x2, x3 = np.meshgrid(ts, ax, ax, ax, indexing="ij")
    pts = np.stack([t.ravel(), x1.ravel(), x2.ravel(), x3.ravel()], axis=1)
    rho = np.sqrt((spec.gamma * (pts[:, 1] - spec.v * pts[:, 0])) ** 2 + pts[:, 2] ** 2 + pts[:, 3] ** 2)
    return pts[rho >= rho_min]


def boost_residual(
    wave: BoostedWave,
    potential: PotentialSpec,
    steps=(0.2, 0.1),
    L: float = 4.0,
    T: float = 2.0,
    n: int = 7,
    rho_min: float = 0.5,
) -> dict:
    """Max |psi_tt - Lap psi + W'(|psi|) psi/|psi|| with centred differences of step h.

    Returns the residual per step and the ratios between consecutive steps
    (about 4 for a second-order stencil applied to an exact solution).
    """
    pts = _sample_points(L, T, n, rho_min, wave.spec)
    t, x1, x2, x3 = pts.T
    out = []
    for h in steps:
        psi = wave(t, x1, x2, x3)
        d2t = (wave(t + h, x1, x2, x3) - 2 * psi + wave(t - h, x1, x2, x3)) / h**2
        lap = (
            wave(t, x1 + h, x2, x3) + wave(t, x1 - h, x2, x3)
            + wave(t, x1, x2 + h, x3) + wave(t, x1, x2 - h, x3)
            + wave(t, x1, x2, x3 + h) + wave(t, x1, x2, x3 - h)
            - 6 * psi
        ) / h**2
        a = np.abs(psi)
        with np.errstate(invalid="ignore", divide="ignore"):
            nl = np.where(a > 0, eval_dw(potential, a) / np.where(a > 0, a, 1.0), potential.m2) * psi
        out.append(float(np.max(np.abs(d2t - lap + nl))))
    ratios = [out[i] / out[i + 1] for i in range(len(out) - 1)]
    return {"steps": list(steps), "residuals": out, "ratios": ratios, "points": int(len(pts))}


def _mass2d(field_: Field) -> float:
    g = field_.grid
    if g.dim != 2:
        raise GridError("vortex quantities are defined for dim=2")
    return float(g.weights @ (field_.values**2))


def angular_momentum(profile: Field, omega: float, ell: int) -> np.ndarray:
    """(0, 0, -omega ell int u^2)."""
    if ell == 0:
        return np.zeros(3)
    return np.array([0.0, 0.0, -omega * ell * _mass2d(profile)])


def angular_momentum_quadrature(profile: Field, omega: float, ell: int, n_theta: int = 64) -> float:
    """M_z from the density Re(d_t psi * conj(d_theta psi)) sampled on a polar grid.

    The field psi = u(r) exp(i(ell theta - omega t)) is sampled at n_theta
    angles, d_theta is taken spectrally from the samples, and the angular
    integral uses the periodic trapezoid rule.
    """
    g = profile.grid
    if g.dim != 2:
        raise GridError("vortex quantities are defined for dim=2")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    psi = profile.values[:, None] * np.exp(1j * ell * theta)[None, :]
    dt_psi = -1j * omega * psi
    k = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
    dth_psi = np.fft.ifft(1j * k[None, :] * np.fft.fft(psi, axis=1), axis=1)
    density = np.real(dt_psi * np.conj(dth_psi))
    # angular mean times 2 pi r dr: the radial weights already carry 2 pi r h
    ang = density.mean(axis=1)
    return float(g.weights @ ang)


def vortex_pointwise_bound(profile: Field) -> tuple[float, float]:
    """(max u^2 / 2, sqrt(int u^2/r^2 * int |grad u|^2) / (2 pi)) for a planar profile."""
    g = profile.grid
    if g.dim != 2:
        raise GridError("the pointwise bound is two-dimensional")
    u = profile.values
    lhs = 0.5 * float(np.max(u * u))
    inv_r2 = float(g.weights @ (u * u / g.r**2))
    grad = 2.0 * gradient_energy(g, u)
    return lhs, math.sqrt(inv_r2 * grad) / (2.0 * math.pi)


def radial_tail_constant(profile: Field) -> float:
    """sup of u(r) r^((d-1)/2) beyond the peak; finite for decaying profiles."""
    g = profile.grid
    u = profile.values
    i = int(np.argmax(u))
    return float(np.max(u[i:] * g.r[i:] ** ((g.dim - 1) / 2)))
