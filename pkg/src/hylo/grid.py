"""Uniform radial meshes, quadrature and the discrete operators L1, L0.

Nodes sit at r_i = i h, i = 1..n-1, with u(r_max) = 0.  The discrete energy
is built from edge differences so that every operator here is the exact
gradient of a quadratic form, which keeps ``<L1 u, v> = <L1 v, u>`` to
rounding and makes the functional gradients exact.

Regularity at r = 0: for ell = 0 the ghost value u_0 equals u_1 (the edge to
the origin carries no energy); for ell != 0, u_0 = 0.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import linalg

__all__ = [
    "GridError",
    "ConvergenceError",
    "RadialGrid",
    "Field",
    "integrate",
    "inner",
    "apply_L1",
    "stiffness_bands",
    "solve_shifted",
    "rayleigh_min",
    "write_field_csv",
    "read_field_csv",
]


class GridError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Iteration did not converge; ``trace`` holds the last iterates' diagnostics."""

    def __init__(self, msg, trace=None, state=None):
        super().__init__(msg)
        self.trace = trace or []
        self.state = state


def surface_measure(dim: int) -> float:
    return 2.0 * math.pi if dim == 2 else 4.0 * math.pi


@dataclass(frozen=True)
class RadialGrid:
    dim: int
    r_max: float
    n_nodes: int
    ell: int = 0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError("dim must be 2 or 3")
        if self.ell != 0 and self.dim != 2:
            raise GridError("nonzero vorticity requires dim=2")
        if self.n_nodes < 64:
            raise GridError("n_nodes must be at least 64")
        if not self.r_max > 0:
            raise GridError("r_max must be positive")

    @property
    def h(self) -> float:
        return self.r_max / self.n_nodes

    @property
    def size(self) -> int:
        return self.n_nodes - 1

    @cached_property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_nodes)

    @cached_property
    def weights(self) -> np.ndarray:
        """Mass weights of the interior nodes, S_d r^(d-1) h."""
        return surface_measure(self.dim) * self.r ** (self.dim - 1) * self.h

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights on r_1..r_n; the node at r_max carries half a cell."""
        wb = 0.5 * surface_measure(self.dim) * self.r_max ** (self.dim - 1) * self.h
        return np.append(self.weights, wb)

    @cached_property
    def edge_weights(self) -> np.ndarray:
        """c_j = S_d r_{j+1/2}^(d-1) / h for the edge (j, j+1), j = 0..n-1."""
        rh = (np.arange(self.n_nodes) + 0.5) * self.h
        c = surface_measure(self.dim) * rh ** (self.dim - 1) / self.h
        if self.ell == 0:
            c = c.copy()
            c[0] = 0.0
        return c

    @cached_property
    def centrifugal(self) -> np.ndarray:
        return self.ell**2 / self.r**2

    def digest(self) -> str:
        key = f"{self.dim}:{self.ell}:{self.r_max!r}:{self.n_nodes}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.size))

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))


@dataclass
class Field:
    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise GridError(f"field has {self.values.shape} values, grid expects {self.grid.size}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("field has non-finite entries")

    @property
    def r(self):
        return self.grid.r


def _values(grid: RadialGrid, f) -> np.ndarray:
    if isinstance(f, Field):
        if f.grid != grid:
            raise GridError("field lives on a different grid")
        return f.values
    return np.asarray(f, dtype=float)


def integrate(grid: RadialGrid, f) -> float:
    """Trapezoid approximation of the integral over R^dim of a radial function.

    ``f`` holds samples on the interior nodes (the boundary value is then 0)
    or on r_1..r_max.
    """
    v = _values(grid, f)
    if v.shape == (grid.size,):
        return float(grid.weights @ v)
    if v.shape == (grid.n_nodes,):
        return float(grid.quad_weights @ v)
    raise GridError(f"samples of shape {v.shape} do not match the grid")


def inner(grid: RadialGrid, f, g) -> float:
    return float(grid.weights @ (_values(grid, f) * _values(grid, g)))


def _stiffness_apply(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    c = grid.edge_weights
    up = np.concatenate(([0.0], u, [0.0]))
    # flux on edge j between nodes j, j+1; node 0 only matters for ell != 0 where u_0 = 0
    flux = c * (up[1:] - up[:-1])
    return flux[:-1] - flux[1:]


def gradient_energy(grid: RadialGrid, u: np.ndarray) -> float:
    """1/2 integral |u'|^2 in the edge discretization."""
    up = np.concatenate(([0.0], u, [0.0]))
    d = up[1:] - up[:-1]
    return 0.5 * float(grid.edge_weights @ (d * d))


def apply_L1(grid: RadialGrid, m2: float, u) -> np.ndarray:
    """Pointwise values of (-Laplacian + ell^2/r^2 + m2) u."""
    v = _values(grid, u)
    return _stiffness_apply(grid, v) / grid.weights + (m2 + grid.centrifugal) * v


def stiffness_bands(grid: RadialGrid, diag_extra=None) -> np.ndarray:
    """Banded (upper form, 2 rows) matrix of A + W diag(diag_extra)."""
    c = grid.edge_weights
    n = grid.size
    diag = c[:-1] + c[1:]
    if diag_extra is not None:
        diag = diag + grid.weights * np.broadcast_to(diag_extra, (n,))
    ab = np.zeros((2, n))
    ab[1] = diag
    ab[0, 1:] = -c[1:-1]
    return ab


def solve_shifted(grid: RadialGrid, diag_extra, rhs: np.ndarray) -> np.ndarray:
    """Solve (A + W diag(diag_extra)) x = W rhs, i.e. the pointwise operator equation."""
    ab = stiffness_bands(grid, diag_extra)
    return linalg.solveh_banded(ab, grid.weights * rhs)


def rayleigh_min(grid: RadialGrid, m2: float, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Smallest eigenvalue of the pencil (L1, L0) by shifted inverse iteration.

    The shift sits at m2, below the whole spectrum, so each step is one SPD
    banded solve.  On a bounded domain this overestimates m2 by the Dirichlet
    gap, roughly (j pi / r_max)^2.
    """
    shift = m2
    ab = stiffness_bands(grid, grid.centrifugal + (m2 - shift))
    chol = linalg.cholesky_banded(ab)
    x = np.exp(-grid.r / grid.r_max)
    lam_prev = np.inf
    trace = []
    for it in range(max_iter):
        y = linalg.cho_solve_banded((chol, False), grid.weights * x)
        y /= math.sqrt(grid.weights @ (y * y))
        ly = apply_L1(grid, m2, y)
        lam = float(grid.weights @ (ly * y))
        trace.append(lam)
        if abs(lam - lam_prev) <= tol * abs(lam):
            return lam
        lam_prev, x = lam, y
    raise ConvergenceError(f"inverse iteration stalled after {max_iter} steps", trace=trace[-20:])


def write_field_csv(path, r, values, header=("r", "u")) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for a, b in zip(np.asarray(r), np.asarray(values)):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
