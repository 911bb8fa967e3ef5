"""Piecewise-linear trial profiles: the ball u_R (dim 3) and the annulus (dim 2)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .grid import Field, GridError, RadialGrid

__all__ = ["TestFunctionSpec", "ball_profile", "annulus_profile", "build_test_function"]


@dataclass(frozen=True)
class TestFunctionSpec:
    __test__ = False  # keep pytest from collecting this

    shape: Literal["ball", "annulus"]
    R: float
    s0: float

    @property
    def support(self) -> float:
        return self.R + 1.0 if self.shape == "ball" else 2.0 * self.R + 1.0


def ball_profile(r, R: float, s0: float) -> np.ndarray:
    """s0 on |x| < R, linear ramp to 0 on [R, R+1], 0 beyond."""
    r = np.asarray(r, dtype=float)
    return s0 * np.clip(1.0 + R - r, 0.0, 1.0)


def annulus_profile(r, R: float, s0: float) -> np.ndarray:
    """0 inside R-1, ramp up on (R-1, R], plateau s0 on (R, 2R], ramp down on (2R, 2R+1]."""
    r = np.asarray(r, dtype=float)
    up = np.clip(r - R + 1.0, 0.0, 1.0)
    down = np.clip(1.0 + 2.0 * R - r, 0.0, 1.0)
    return s0 * np.minimum(up, down)


def build_test_function(grid: RadialGrid, spec: TestFunctionSpec) -> Field:
    if spec.support >= grid.r_max:
        raise GridError(f"test function support {spec.support} exceeds r_max={grid.r_max}")
    if spec.shape == "ball":
        vals = ball_profile(grid.r, spec.R, spec.s0)
    elif spec.shape == "annulus":
        if spec.R <= 1:
            raise GridError("annulus needs R > 1")
        vals = annulus_profile(grid.r, spec.R, spec.s0)
    else:
        raise GridError(f"unknown test function shape {spec.shape!r}")
    return Field(grid, vals)
