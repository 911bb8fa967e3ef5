import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from hylo.functionals import FunctionalContext, H, J, K, Lambda
from hylo.grid import ConvergenceError, RadialGrid, rayleigh_min, write_field_csv
from hylo.minimizer import (
    MinimizeConfig,
    VanishingChargeError,
    estimate_c_hat,
    initial_guess,
    minimize,
    reduced_energy,
    reduced_gradient,
    sigma_scan,
)
from hylo.potential import builtin
from hylo.testfunctions import TestFunctionSpec, build_test_function


@pytest.fixture(scope="module")
def u_R(ref_ctx):
    return build_test_function(ref_ctx.grid, TestFunctionSpec("ball", 10.0, 1.0)).values


@pytest.fixture(scope="module")
def free_ctx():
    return FunctionalContext(RadialGrid(3, 20.0, 400), builtin("wfree"))


def test_reduced_energy_at_trial_profile(ref_ctx, u_R):
    sigma = 2 * 0.5 * K(ref_ctx, u_R)
    F, omega = reduced_energy(ref_ctx, u_R, sigma)
    assert omega == 0.5
    assert F == pytest.approx(J(ref_ctx, u_R) + 0.25 * K(ref_ctx, u_R), rel=1e-14)
    assert F == pytest.approx(1295.0, rel=2e-2)


def test_reduced_gradient_fd(small_ctx):
    g = small_ctx.grid
    rng = np.random.default_rng(11)
    u = np.exp(-((g.r / 4) ** 2)) * 1.1
    sigma = 50.0
    gr = reduced_gradient(small_ctx, u, sigma)
    for _ in range(5):
        v = np.convolve(rng.standard_normal(g.size), np.ones(15) / 15, mode="same")
        eps = 1e-5
        fd = (reduced_energy(small_ctx, u + eps * v, sigma)[0] - reduced_energy(small_ctx, u - eps * v, sigma)[0]) / (2 * eps)
        an = float(g.weights @ (gr * v))
        assert fd == pytest.approx(an, rel=1e-5, abs=1e-7 * abs(an) + 1e-9)


def test_reduced_energy_rejects_zero(small_ctx):
    from hylo.functionals import DegenerateChargeError

    with pytest.raises(DegenerateChargeError):
        reduced_energy(small_ctx, np.zeros(small_ctx.grid.size), 1.0)


def test_reference_solution(ref_ctx, ref_solution, ref_sigma):
    rec = ref_solution
    assert rec.converged and rec.residual < 1e-8
    assert 0 < rec.omega < 1
    assert rec.lambda_ratio < 1
    assert abs(rec.multiplier - 2 * rec.omega) <= 1e-6 * rec.omega
    assert rec.omega < math.sqrt(rayleigh_min(ref_ctx.grid, ref_ctx.m2))
    assert H(ref_ctx, rec.u, rec.omega) == pytest.approx(ref_sigma, rel=1e-10)
    assert rec.flags == []
    # the ratio is E/H, which for a minimizer is also Lambda(u, omega)
    assert rec.lambda_ratio == pytest.approx(Lambda(ref_ctx, rec.u, rec.omega), rel=1e-12)


def test_history_invariants(ref_solution, ref_sigma):
    rec = ref_solution
    F = rec.energy_history
    assert 2 <= len(F) <= rec.iterations + 1
    # non-increasing up to the resolution of F
    noise = 2048 * np.finfo(float).eps * np.abs(F[:-1])
    assert np.all(np.diff(F) <= noise)
    assert np.max(np.abs(rec.charge_history - ref_sigma)) <= 1e-10 * ref_sigma


def test_profile_is_nonnegative_and_decays(ref_solution):
    u = ref_solution.u.values
    assert u.min() >= 0
    assert u[-1] < 1e-8 * u.max()


def test_small_charge_approaches_mass(ref_ctx):
    rec = minimize(ref_ctx, MinimizeConfig(sigma=1.0, max_iters=2000), raise_on_failure=False, keep_history=False)
    assert (not rec.converged) or rec.omega > 0.99 * ref_ctx.potential.m
    assert not rec.in_sigma_set


def test_nonconvergence_carries_state(ref_ctx):
    with pytest.raises(ConvergenceError) as info:
        minimize(ref_ctx, MinimizeConfig(sigma=1.0, max_iters=5))
    state = info.value.state
    assert state.iterations == 5 and not state.converged
    assert state.charge == pytest.approx(1.0, rel=1e-10)


def test_free_field_never_in_set(free_ctx):
    rec = minimize(free_ctx, MinimizeConfig(sigma=100.0, max_iters=200), raise_on_failure=False, keep_history=False)
    assert not rec.in_sigma_set
    assert rec.lambda_ratio >= free_ctx.potential.m


def test_vanishing_initial_charge(small_ctx):
    with pytest.raises(VanishingChargeError):
        minimize(small_ctx, MinimizeConfig(sigma=1.0), u0=np.zeros(small_ctx.grid.size))


def test_initial_guess_charge_match(ref_ctx, ref_sigma):
    u = initial_guess(ref_ctx, MinimizeConfig(sigma=ref_sigma))
    assert H(ref_ctx, u, 0.5) == pytest.approx(ref_sigma, rel=1e-4)


def test_initial_guess_variants(ref_ctx, tmp_path):
    g = ref_ctx.grid
    gauss = initial_guess(ref_ctx, MinimizeConfig(sigma=1.0, init="gaussian", init_width=3.0))
    assert gauss[0] == pytest.approx(1.0, rel=1e-4)
    fixed = initial_guess(ref_ctx, MinimizeConfig(sigma=1.0, init_R=5.0))
    assert fixed[np.searchsorted(g.r, 3.0)] == 1.0 and fixed[np.searchsorted(g.r, 7.0)] == 0.0
    path = tmp_path / "u0.csv"
    write_field_csv(path, g.r, gauss)
    assert np.allclose(initial_guess(ref_ctx, MinimizeConfig(sigma=1.0, init="file", init_path=str(path))), gauss)
    with pytest.raises(ValueError):
        initial_guess(ref_ctx, MinimizeConfig(sigma=1.0, init="file"))


@pytest.mark.parametrize("kw", [{"sigma": 0.0}, {"sigma": 1.0, "tol_residual": 0.0}, {"sigma": 1.0, "backtrack_factor": 1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MinimizeConfig(**kw)


def test_warm_start_converges_immediately(ref_ctx, ref_solution, ref_sigma):
    rec = minimize(ref_ctx, MinimizeConfig(sigma=ref_sigma), u0=ref_solution.u.values)
    assert rec.iterations <= 1
    assert rec.energy == pytest.approx(ref_solution.energy, rel=1e-12)


def test_c_hat_reference(ref_ctx):
    c_hat, a = estimate_c_hat(ref_ctx, details=True)
    # bounded by Lambda(u_R, m) from the trial profile, and by AM-GM from below
    assert c_hat <= 0.5 * (0.3095 + 1.0) + 1e-3
    assert c_hat < 1.0
    assert c_hat >= math.sqrt(a) - 1e-12
    assert c_hat == pytest.approx(0.5 * (a + 1.0))


def test_c_hat_free_field(free_ctx):
    c_hat, a = estimate_c_hat(free_ctx, details=True)
    gap = rayleigh_min(free_ctx.grid, 1.0)
    assert a >= 1.0
    assert a == pytest.approx(gap, rel=1e-3)
    assert c_hat == pytest.approx(1.0, abs=0.02)


def test_scan_empty(ref_ctx):
    assert sigma_scan(ref_ctx, []) == []


def test_scan_rejects_nonpositive(ref_ctx):
    with pytest.raises(ValueError):
        sigma_scan(ref_ctx, [1.0, -2.0], c_hat=0.5)


def test_scan_records_failures(ref_ctx, ref_sigma):
    base = MinimizeConfig(sigma=1.0, max_iters=300)
    rows = sigma_scan(ref_ctx, [ref_sigma, 1.0], base=base, c_hat=0.5144)
    assert [r.sigma for r in rows] == [1.0, ref_sigma]
    assert rows[0].status == "failed" and "no convergence" in rows[0].error
    assert rows[1].status == "converged" and rows[1].in_sigma_set
    assert "record" not in rows[1].to_dict()


def test_scan_executor_matches_serial(ref_ctx, ref_sigma):
    sig = [ref_sigma * 0.9, ref_sigma * 1.1]
    serial = sigma_scan(ref_ctx, sig, c_hat=0.5144)
    with ThreadPoolExecutor(2) as ex:
        par = sigma_scan(ref_ctx, sig, c_hat=0.5144, executor=ex)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in par]


def test_scan_free_field_all_outside(free_ctx):
    base = MinimizeConfig(sigma=1.0, max_iters=100)
    rows = sigma_scan(free_ctx, [10.0, 100.0, 1000.0], base=base, c_hat=1.0)
    assert len(rows) == 3
    assert not any(r.in_sigma_set for r in rows)


def test_large_lambda_not_in_set(ref_ctx):
    # converged, below the mass, but above c_hat: no compactness certificate
    rec = minimize(ref_ctx, MinimizeConfig(sigma=20.0, c_hat=0.5144))
    assert rec.converged and rec.lambda_ratio < 1.0
    assert rec.lambda_ratio > 0.5144
    assert not rec.in_sigma_set


def test_openness_neighbours(ref_ctx, ref_sigma):
    rows = sigma_scan(ref_ctx, [ref_sigma * 0.99, ref_sigma * 1.01], c_hat=0.5144)
    assert all(r.status == "converged" and r.in_sigma_set for r in rows)


def test_vortex_solution(vortex):
    ctx, rec = vortex
    assert rec.converged and 0 < rec.omega < 1
    assert abs(rec.multiplier - 2 * rec.omega) <= 1e-6 * rec.omega
    assert rec.u.values[0] < 1e-2 * rec.u.values.max()
