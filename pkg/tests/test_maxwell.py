import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hylo.functionals import FunctionalContext, H, K
from hylo.grid import GridError, RadialGrid, read_field_csv
from hylo.maxwell import (
    CouplingTooLargeError,
    K_q,
    coupled_minimize,
    gauge_energy_identity,
    gauge_residual,
    grad_K_q,
    q_scaling,
    screening_correction,
    solve_phi,
    write_gauge_csv,
)
from hylo.minimizer import MinimizeConfig
from hylo.potential import builtin
from hylo.testfunctions import TestFunctionSpec, build_test_function

from conftest import smooth_field

GRID = RadialGrid(3, 20.0, 400)


@pytest.fixture(scope="module")
def u_R(ref_ctx):
    return build_test_function(ref_ctx.grid, TestFunctionSpec("ball", 10.0, 1.0)).values


@pytest.fixture(scope="module")
def coupled(ref_ctx, ref_sigma):
    ctx = FunctionalContext(ref_ctx.grid, ref_ctx.potential, 0.01)
    return ctx, coupled_minimize(ctx, MinimizeConfig(sigma=ref_sigma))


def test_screen_survives_saturation():
    # q Phi is within rounding of 1 here; the screening factor must stay positive
    u = np.full(GRID.size, 30.0) * (GRID.r < 15)
    prof = solve_phi(GRID, u, 1.0)
    assert prof.min_screen > 0
    assert prof.max_q_phi == pytest.approx(1.0)


def test_zero_source():
    prof = solve_phi(GRID, np.zeros(GRID.size), 0.1)
    assert np.all(prof.phi_cap == 0.0)
    assert prof.max_q_phi == 0.0


def test_linear_response(u_R, ref_ctx):
    a = solve_phi(ref_ctx.grid, u_R, 1e-3).phi_cap.max()
    b = solve_phi(ref_ctx.grid, u_R, 5e-4).phi_cap.max()
    assert b / a == pytest.approx(0.5, rel=5e-2)


def test_gauge_requires_3d_and_positive_q():
    with pytest.raises(GridError):
        solve_phi(RadialGrid(2, 10.0, 100), np.ones(99), 0.1)
    with pytest.raises(ValueError):
        solve_phi(GRID, np.ones(GRID.size), 0.0)


def test_K_q_needs_coupling(small_ctx):
    with pytest.raises(ValueError):
        K_q(small_ctx, np.ones(small_ctx.grid.size))


def test_correction_ratio_q_and_half_q(u_R, ref_ctx):
    c1 = screening_correction(ref_ctx.grid, u_R, 0.01)
    c2 = screening_correction(ref_ctx.grid, u_R, 0.005)
    assert 3.5 <= c1 / c2 <= 4.5


def test_q_squared_slope(u_R, ref_ctx):
    slope, corr = q_scaling(ref_ctx.grid, u_R, np.logspace(-3, -1, 5))
    assert slope == pytest.approx(2.0, abs=0.1)
    assert np.all(np.diff(corr) > 0)


def test_gap_is_half_correction(u_R, ref_ctx):
    ctx = FunctionalContext(ref_ctx.grid, ref_ctx.potential, 0.02)
    gap = K(ref_ctx, u_R) - K_q(ctx, u_R)
    assert gap == pytest.approx(0.5 * screening_correction(ref_ctx.grid, u_R, 0.02), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), q=st.sampled_from([1e-3, 1e-2, 1e-1, 1.0]), scale=st.sampled_from([0.1, 1.0, 10.0]))
def test_gauge_bound_and_K_q_range(seed, q, scale):
    rng = np.random.default_rng(seed)
    u = scale * smooth_field(GRID, rng, positive=False)
    prof = solve_phi(GRID, u, q)
    assert prof.phi_cap.min() >= 0
    assert prof.min_screen > 0
    assert np.allclose(prof.screen, 1 - q * prof.phi_cap, rtol=0, atol=1e-12)
    ctx0 = FunctionalContext(GRID, builtin("wref"))
    ctx = FunctionalContext(GRID, ctx0.potential, q)
    kq = K_q(ctx, u)
    assert 0 <= kq <= K(ctx0, u) * (1 + 1e-14)
    assert kq == pytest.approx(K(ctx, u), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_envelope_gradient(seed):
    rng = np.random.default_rng(seed)
    ctx = FunctionalContext(GRID, builtin("wref"), 0.05)
    u = smooth_field(GRID, rng)
    v = np.convolve(rng.standard_normal(GRID.size), np.ones(15) / 15, mode="same")
    w = GRID.weights
    eps = 1e-4 * math.sqrt(w @ (u * u) / (w @ (v * v)))
    fd = (K_q(ctx, u + eps * v) - K_q(ctx, u - eps * v)) / (2 * eps)
    an = float(w @ (grad_K_q(ctx, u) * v))
    assert abs(fd - an) <= 1e-5 * max(abs(an), 1e-3 * math.sqrt((w @ u**2) * (w @ v**2)))


def test_gauge_residual_detects_wrong_phi(u_R, ref_ctx):
    prof = solve_phi(ref_ctx.grid, u_R, 0.05)
    assert gauge_residual(ref_ctx.grid, u_R, prof.phi_cap, 0.05, 0.4) < 1e-10
    # a 1% error in phi reads as about 1%
    assert gauge_residual(ref_ctx.grid, u_R, 1.01 * prof.phi_cap, 0.05, 0.4) == pytest.approx(0.01, rel=0.05)


def test_coupled_solution(coupled, ref_sigma):
    ctx, sol = coupled
    assert sol.converged
    assert sol.residual_u < 1e-7 and sol.residual_phi < 1e-7
    assert 0 < sol.gauge.max_q_phi < 1
    # Omega = omega - q phi stays positive
    assert np.all(sol.omega - sol.q * sol.phi > 0)
    assert 2 * sol.omega * K_q(ctx, sol.u) == pytest.approx(ref_sigma, rel=1e-10)
    assert abs(sol.multiplier - 2 * sol.omega) <= 1e-6 * sol.omega
    d = sol.to_dict()
    assert d["q"] == 0.01 and d["residual_phi"] == sol.residual_phi


def test_gauge_energy_identity(coupled):
    ctx, sol = coupled
    lhs, rhs = gauge_energy_identity(ctx.grid, sol.u, sol.gauge, sol.omega)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_coupling_raises_frequency(coupled, ref_solution):
    _, sol = coupled
    # screening reduces the effective charge, so more frequency is needed for the same sigma
    assert sol.omega > ref_solution.omega


def test_weak_coupling_limit(ref_ctx, ref_sigma, ref_solution):
    ctx = FunctionalContext(ref_ctx.grid, ref_ctx.potential, 1e-6)
    sol = coupled_minimize(ctx, MinimizeConfig(sigma=ref_sigma))
    w = ref_ctx.grid.weights
    a, b = sol.u.values, ref_solution.u.values
    assert math.sqrt(w @ (a - b) ** 2 / (w @ b**2)) < 1e-3
    assert sol.residual_u < 1e-7 and sol.residual_phi < 1e-7


def test_coupling_too_large(ref_ctx, ref_sigma):
    ctx = FunctionalContext(ref_ctx.grid, ref_ctx.potential, 0.5)
    with pytest.raises(CouplingTooLargeError):
        coupled_minimize(ctx, MinimizeConfig(sigma=ref_sigma))


def test_gauge_csv(tmp_path, coupled):
    ctx, sol = coupled
    write_gauge_csv(tmp_path / "g.csv", ctx.grid, sol.phi)
    assert (tmp_path / "g.csv").read_text().startswith("r,phi\n")
    r, phi = read_field_csv(tmp_path / "g.csv")
    assert np.array_equal(phi, sol.phi)
