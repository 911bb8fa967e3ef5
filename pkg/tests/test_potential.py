import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hylo.potential import (
    PotentialError,
    PotentialSpec,
    builtin,
    check_assumptions,
    eval_dw,
    eval_w,
    load_potential,
    parse_potential_text,
    polynomial_potential,
    truncate,
)


def test_wref_values():
    p = builtin("wref")
    assert eval_w(p, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert eval_w(p, 0.0) == 0.0
    assert eval_w(p, 2.0) == pytest.approx(2.0)


def test_dw_matches_closed_form():
    p = builtin("wref")
    s = np.linspace(0.0, 3.0, 31)
    # W = s^2 (1-s)^2 / 2
    assert np.allclose(eval_dw(p, s), s * (1 - s) ** 2 - s * s * (1 - s))


def test_report_wref():
    rep = check_assumptions(builtin("wref"))
    assert rep.w_positive and rep.nondegenerate and rep.hylomorphy and rep.growth_a
    assert rep.n_at_s0 == pytest.approx(-0.5)
    assert rep.omega0 == pytest.approx(0.0, abs=1e-6)


def test_report_wbad_witness():
    rep = check_assumptions(builtin("wbad"))
    assert not rep.w_positive
    assert rep.w_positive_min < 0
    # W_bad = s^2/2 - s^4/4 is negative past sqrt(2)
    assert rep.w_positive_witness > math.sqrt(2)
    assert eval_w(builtin("wbad"), 2.0) == pytest.approx(-2.0)


def test_report_wfree():
    rep = check_assumptions(builtin("wfree"))
    assert not rep.hylomorphy
    assert rep.omega0 == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("name", ["wref", "wbad", "wfree"])
def test_omega0_below_mass_iff_hylomorphy(name):
    p = builtin(name)
    rep = check_assumptions(p)
    assert rep.omega0 <= p.m + 1e-12
    assert (rep.omega0 < p.m - 1e-9) == rep.hylomorphy


def test_report_rejects_bad_range():
    with pytest.raises(PotentialError):
        check_assumptions(builtin("wref"), s_max=0.5)
    with pytest.raises(PotentialError):
        check_assumptions(builtin("wref"), samples=10)


def test_truncation_example():
    p = builtin("wref")
    t = truncate(p, 1.5)
    assert t.n_eval(1.5) == p.n_eval(1.5)
    assert float(t.n_eval(1.5)) == pytest.approx(-0.84375)
    assert float(t.n_eval(4.0)) == pytest.approx(-0.84375)
    assert float(t.n_prime(2.0)) == pytest.approx(0.0, abs=1e-12)


def test_truncation_needs_increasing_N():
    with pytest.raises(PotentialError):
        truncate(builtin("wref"), 1.0)


def test_bad_derivative_rejected():
    with pytest.raises(PotentialError, match="inconsistent"):
        PotentialSpec(m2=1.0, n_eval=lambda s: -s**3, n_prime=lambda s: -2 * s**2, s0=1.0)


@pytest.mark.parametrize("kw", [{"m2": -1.0}, {"m2": float("nan")}, {"s0": 0.0}])
def test_invalid_specs(kw):
    args = dict(m2=1.0, n_eval=lambda s: -s**3, n_prime=lambda s: -3 * s**2, s0=1.0)
    args.update(kw)
    with pytest.raises(PotentialError):
        PotentialSpec(**args)


def test_N_must_vanish_at_zero():
    with pytest.raises(PotentialError):
        PotentialSpec(m2=1.0, n_eval=lambda s: 1.0 + 0 * s, n_prime=lambda s: 0 * s, s0=1.0)


def test_parse_and_load(tmp_path):
    text = "# quartic\nkind = polynomial\nm2 = 2\ns0 = 1\nn = 3:-1, 4:0.5\n"
    p = parse_potential_text(text)
    assert p.m2 == 2.0
    assert eval_w(p, 1.3) == pytest.approx(1.3**2 - 1.3**3 + 0.5 * 1.3**4)
    f = tmp_path / "pot.txt"
    f.write_text(text)
    assert eval_w(load_potential(str(f)), 1.3) == eval_w(p, 1.3)
    assert load_potential("builtin:wref").name == "wref"
    assert parse_potential_text("kind=builtin\nname=wbad").name == "wbad"


@pytest.mark.parametrize(
    "text",
    ["m2 1", "kind=spline\nm2=1", "kind=polynomial\ns0=1", "kind=polynomial\nm2=1\ns0=1\nn=3:x", "kind=builtin"],
)
def test_parse_errors(text):
    with pytest.raises(PotentialError):
        parse_potential_text(text)


def test_missing_file():
    with pytest.raises(PotentialError, match="not found"):
        load_potential("/nonexistent/pot.txt")


def test_unknown_builtin():
    with pytest.raises(PotentialError):
        builtin("nope")


@settings(max_examples=40, deadline=None)
@given(
    a3=st.floats(-2.0, 2.0),
    a4=st.floats(0.0, 2.0),
    m2=st.floats(0.25, 4.0),
)
def test_nondegeneracy_limit(a3, a4, m2):
    p = polynomial_potential({3: a3, 4: a4}, m2=m2, s0=1.0)
    for s in (1e-4, 1e-5):
        assert abs(eval_w(p, s) / s**2 - m2 / 2) < 1e-2 * m2 / 2


@settings(max_examples=40, deadline=None)
@given(s=st.lists(st.floats(0.0, 1.5), min_size=1, max_size=20))
def test_truncation_is_identity_below_s1(s):
    p = builtin("wref")
    t = truncate(p, 1.5)
    s = np.asarray(s)
    assert np.array_equal(t.n_eval(s), p.n_eval(s))


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(1.5, 4.0), s=st.floats(0.0, 10.0))
def test_truncation_is_C1(s1, s):
    t = truncate(builtin("wref"), s1)
    eps = 1e-6
    fd = (t.n_eval(s1 + eps) - t.n_eval(s1 - eps)) / (2 * eps)
    assert fd == pytest.approx(float(t.n_prime(s1)), rel=1e-4, abs=1e-4)
    assert float(t.n_prime(s)) >= -1e-12 or s < s1
