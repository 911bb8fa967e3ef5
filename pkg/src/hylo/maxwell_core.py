"""Gauge solve for the electrostatic reduction: -Lap Phi + q^2 u^2 Phi = q u^2."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .grid import GridError, RadialGrid, stiffness_bands

__all__ = ["GaugeProfile", "GaugeBoundError", "solve_phi", "gauge_residual"]


class GaugeBoundError(AssertionError):
    """q Phi_u reached 1; the maximum principle says this cannot happen."""


@dataclass
class GaugeProfile:
    """Phi_u together with the screening factor 1 - q Phi_u.

    ``screen`` is computed from its own equation where q Phi_u is close to 1,
    so it stays positive (and accurate) even when q Phi_u rounds to 1.
    """

    phi_cap: np.ndarray
    q: float
    source_norm: float
    screen: np.ndarray

    @property
    def max_q_phi(self) -> float:
        return float(self.q * np.max(self.phi_cap, initial=0.0))

    @property
    def min_screen(self) -> float:
        return float(np.min(self.screen, initial=1.0))


def solve_phi(grid: RadialGrid, u, q: float) -> GaugeProfile:
    """Solve (A + W q^2 u^2) Phi = W q u^2, plus chi = 1 - q Phi from (A + W q^2 u^2) chi = A 1.

    The matrix is a Stieltjes matrix, so banded Cholesky substitution on the
    nonnegative right-hand side A 1 (nonzero only next to r_max) never
    cancels: chi > 0 holds in floating point, which is the bound q Phi < 1.
    """
    if not q > 0:
        raise ValueError("coupling q must be positive")
    if grid.dim != 3 or grid.ell != 0:
        raise GridError("the electrostatic reduction is three-dimensional with ell=0")
    u = np.asarray(getattr(u, "values", u), dtype=float)
    u2 = u * u
    chol = linalg.cholesky_banded(stiffness_bands(grid, q * q * u2))
    phi = linalg.cho_solve_banded((chol, False), grid.weights * (q * u2))
    edge = np.zeros(grid.size)
    edge[-1] = grid.edge_weights[-1]
    chi = linalg.cho_solve_banded((chol, False), edge)
    qphi = q * phi
    screen = np.where(qphi < 0.5, 1.0 - qphi, chi)
    if not np.min(screen, initial=1.0) > 0 or np.min(phi, initial=0.0) < -1e-14 * max(1.0, float(np.max(qphi, initial=0.0))):
        raise GaugeBoundError(f"gauge bound violated: min(1 - q Phi) = {np.min(screen)!r}, min Phi = {np.min(phi)!r}")
    return GaugeProfile(phi_cap=phi, q=float(q), source_norm=float(grid.weights @ u2), screen=screen)


def gauge_residual(grid: RadialGrid, u, phi: np.ndarray, q: float, omega: float = 1.0) -> float:
    """Relative energy-norm residual of -Lap phi = q (omega - q phi) u^2 for phi = omega Phi.

    With M = A + W q^2 u^2 the discrete system is M phi = W q omega u^2; the
    figure is |M phi - b|_{M^-1} / |phi|_M, so a relative error e in phi gives
    about e, while stencil cancellation only contributes roundoff.
    """
    u = np.asarray(getattr(u, "values", u), dtype=float)
    p = omega * np.asarray(phi, dtype=float)
    w = grid.weights
    c = grid.edge_weights
    pp = np.concatenate(([0.0], p, [0.0]))
    flux = c * (pp[1:] - pp[:-1])
    mp = (flux[:-1] - flux[1:]) + w * q * q * u * u * p
    res = mp - w * q * omega * u * u
    den = float(p @ mp)
    if not den > 0:
        return 0.0 if not np.any(res) else float("inf")
    z = linalg.solveh_banded(stiffness_bands(grid, q * q * u * u), res)
    return math.sqrt(max(float(res @ z), 0.0) / den)
