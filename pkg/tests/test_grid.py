import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hylo.grid import (
    ConvergenceError,
    Field,
    GridError,
    RadialGrid,
    apply_L1,
    gradient_energy,
    inner,
    integrate,
    rayleigh_min,
    read_field_csv,
    solve_shifted,
    write_field_csv,
)
from hylo.testfunctions import TestFunctionSpec, build_test_function

from conftest import smooth_field


def test_volume_of_ball():
    g = RadialGrid(3, 10.0, 2000)
    assert integrate(g, np.ones(g.n_nodes)) == pytest.approx(4 * math.pi * 1000 / 3, rel=5e-3)


def test_area_of_disk():
    g = RadialGrid(2, 10.0, 2000)
    assert integrate(g, np.ones(g.n_nodes)) == pytest.approx(math.pi * 100, rel=5e-3)


def test_ball_test_function_mass():
    g = RadialGrid(3, 40.0, 4000)
    u = build_test_function(g, TestFunctionSpec("ball", 10.0, 1.0))
    assert integrate(g, u.values**2) == pytest.approx(4629.1, rel=1e-2)


def test_integrate_shape_mismatch():
    g = RadialGrid(3, 10.0, 100)
    with pytest.raises(GridError):
        integrate(g, np.ones(7))


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("dim", [2, 3])
def test_quadrature_order(k, dim):
    R = 5.0
    exact = (2 * math.pi if dim == 2 else 4 * math.pi) * R ** (dim + k) / (dim + k)
    errs = []
    for n in (100, 200, 400):
        g = RadialGrid(dim, R, n)
        r = np.append(g.r, R)
        errs.append(abs(integrate(g, r**k) - exact))
    if max(errs) < 1e-12 * exact:
        return  # linear integrand: the trapezoid rule is exact
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_L1_of_constant():
    g = RadialGrid(3, 40.0, 4000)
    lu = apply_L1(g, 1.0, np.full(g.size, 2.0))
    assert np.max(np.abs(lu[:-1] - 2.0)) < 1e-10


def test_vortex_quadratic_form_closed_form():
    # u = r e^{-r} in the plane, ell = 1, m = 1:
    # int (u'^2 + u^2/r^2 + u^2) 2 pi r dr = 2 pi (1/8 + 1/4 + 3/8)
    g = RadialGrid(2, 40.0, 4000, ell=1)
    u = g.r * np.exp(-g.r)
    val = inner(g, apply_L1(g, 1.0, u), u)
    assert val == pytest.approx(2 * math.pi * 0.75, rel=1e-3)


def test_rayleigh_min_dirichlet_gap():
    g = RadialGrid(3, 40.0, 4000)
    est = rayleigh_min(g, 1.0)
    assert est == pytest.approx(1 + (math.pi / 40) ** 2, abs=1e-3)
    assert est > 1.0
    assert rayleigh_min(RadialGrid(3, 80.0, 4000), 1.0) < est
    assert rayleigh_min(g, 4.0) == pytest.approx(4 + (math.pi / 40) ** 2, abs=1e-3)


def test_rayleigh_min_reports_trace():
    with pytest.raises(ConvergenceError) as info:
        rayleigh_min(RadialGrid(3, 40.0, 400), 1.0, tol=1e-300, max_iter=5)
    assert len(info.value.trace) == 5


def test_solve_shifted_inverts_operator():
    g = RadialGrid(3, 20.0, 500)
    rng = np.random.default_rng(3)
    x = smooth_field(g, rng)
    rhs = apply_L1(g, 2.0, x)
    assert np.allclose(solve_shifted(g, 2.0, rhs), x, atol=1e-10)


def test_field_validation():
    g = RadialGrid(3, 10.0, 100)
    with pytest.raises(GridError):
        Field(g, np.zeros(3))
    with pytest.raises(GridError):
        Field(g, np.full(g.size, np.nan))
    other = RadialGrid(3, 11.0, 100)
    with pytest.raises(GridError):
        integrate(g, Field(other, np.zeros(other.size)))


@pytest.mark.parametrize(
    "args", [(4, 10.0, 100, 0), (3, 10.0, 100, 1), (3, 10.0, 10, 0), (3, -1.0, 100, 0)]
)
def test_grid_validation(args):
    with pytest.raises(GridError):
        RadialGrid(*args)


def test_digest_identifies_grid():
    assert RadialGrid(3, 40.0, 4000).digest() == RadialGrid(3, 40.0, 4000).digest()
    assert RadialGrid(3, 40.0, 4000).digest() != RadialGrid(3, 40.0, 4001).digest()


def test_csv_roundtrip(tmp_path):
    g = RadialGrid(3, 10.0, 100)
    u = np.sin(g.r) / 3.0
    path = tmp_path / "sub" / "u.csv"
    write_field_csv(path, g.r, u)
    assert path.read_text().splitlines()[0] == "r,u"
    r, v = read_field_csv(path)
    assert np.array_equal(r, g.r) and np.array_equal(v, u)


grids = st.sampled_from(
    [RadialGrid(3, 20.0, 200), RadialGrid(2, 20.0, 200), RadialGrid(2, 20.0, 200, ell=1), RadialGrid(2, 20.0, 200, ell=3)]
)


@settings(max_examples=50, deadline=None)
@given(g=grids, seed=st.integers(0, 2**32 - 1), m2=st.floats(0.1, 4.0))
def test_operator_symmetry(g, seed, m2):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, g.size))
    a = inner(g, apply_L1(g, m2, u), v)
    b = inner(g, apply_L1(g, m2, v), u)
    scale = math.sqrt(inner(g, u, u) * inner(g, v, v)) * (m2 + 4 / g.h**2)
    assert abs(a - b) < 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(g=grids, seed=st.integers(0, 2**32 - 1), m2=st.floats(0.1, 4.0))
def test_operator_positivity(g, seed, m2):
    u = np.random.default_rng(seed).standard_normal(g.size)
    gap = inner(g, apply_L1(g, m2, u), u) - m2 * inner(g, u, u)
    assert gap >= -1e-12 * inner(g, u, u)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_energy_is_half_stiffness_form(seed):
    g = RadialGrid(3, 20.0, 200)
    u = np.random.default_rng(seed).standard_normal(g.size)
    assert 2 * gradient_energy(g, u) == pytest.approx(inner(g, apply_L1(g, 0.0, u), u), rel=1e-10)
