"""Nonlinear potentials W(s) = m2/2 s^2 + N(s) and checks of the standing assumptions.

A potential is described by its mass term ``m2`` and the nonlinear part ``N``
given as an evaluator pair ``(N, N')``.  Evaluators must be vectorised over
numpy arrays and picklable (scans fan out over processes), which is why the
built-in ones are small callable classes instead of lambdas.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

__all__ = [
    "PotentialError",
    "PotentialSpec",
    "AssumptionReport",
    "PolynomialN",
    "TruncatedN",
    "eval_w",
    "eval_dw",
    "check_assumptions",
    "truncate",
    "builtin",
    "polynomial_potential",
    "load_potential",
    "parse_potential_text",
]


class PotentialError(ValueError):
    """Raised for malformed potentials or violated preconditions."""


class PolynomialN:
    """N(s) as a polynomial in s, with its derivative."""

    def __init__(self, coeffs: dict[int, float]):
        if any(d < 0 for d in coeffs):
            raise PotentialError("negative degree in polynomial N")
        deg = max(coeffs, default=0)
        c = np.zeros(deg + 1)
        for d, v in coeffs.items():
            c[d] = float(v)
        self.coeffs = {int(d): float(v) for d, v in coeffs.items()}
        self.poly = Polynomial(c)
        self.dpoly = self.poly.deriv()

    def __call__(self, s):
        return self.poly(s)

    def deriv(self, s):
        return self.dpoly(s)

    def __repr__(self):
        terms = ", ".join(f"{d}:{v:g}" for d, v in sorted(self.coeffs.items()))
        return f"PolynomialN({terms})"


class _Derivative:
    # picklable bound-method stand-in
    def __init__(self, owner):
        self.owner = owner

    def __call__(self, s):
        return self.owner.deriv(s)


class TruncatedN:
    """Linear continuation of N beyond s1: N(s1) + N'(s1)(s - s1) for s >= s1."""

    def __init__(self, n_eval: Callable, n_prime: Callable, s1: float):
        self.n_eval = n_eval
        self.n_prime = n_prime
        self.s1 = float(s1)
        self.slope = float(n_prime(self.s1))
        self.c1 = float(n_eval(self.s1)) - self.slope * self.s1

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s <= self.s1, self.n_eval(np.minimum(s, self.s1)), self.slope * s + self.c1)
        return out if out.ndim else float(out)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s <= self.s1, self.n_prime(np.minimum(s, self.s1)), self.slope)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialSpec:
    """W(s) = m2/2 s^2 + N(s) for s >= 0.

    ``s0`` is a point with N(s0) < 0 (when one exists), ``s1`` a point beyond
    which N may be linearly continued, ``p`` the growth exponent.
    """

    m2: float
    n_eval: Callable
    n_prime: Callable
    s0: float
    s1: float | None = None
    p: float | None = None
    name: str = "custom"
    check_derivative: bool = dataclasses.field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not (self.m2 > 0 and math.isfinite(self.m2)):
            raise PotentialError(f"m2 must be positive, got {self.m2}")
        if not self.s0 > 0:
            raise PotentialError(f"s0 must be positive, got {self.s0}")
        if abs(float(self.n_eval(0.0))) > 1e-12 or abs(float(self.n_prime(0.0))) > 1e-12:
            raise PotentialError("N(0) and N'(0) must vanish")
        if self.s1 is not None and float(self.n_prime(self.s1)) < 0:
            raise PotentialError(f"N'(s1) < 0 at s1={self.s1}")
        if self.check_derivative:
            _check_derivative(self.n_eval, self.n_prime, self.s1 or 2.0 * self.s0)

    @property
    def m(self) -> float:
        return math.sqrt(self.m2)

    def w(self, s):
        return eval_w(self, s)

    def dw(self, s):
        return eval_dw(self, s)


def _check_derivative(n_eval, n_prime, scale: float, npts: int = 32, rtol: float = 1e-6):
    s = np.linspace(0.05, 1.5, npts) * scale
    eps = 1e-5 * scale
    fd = (n_eval(s + eps) - n_eval(s - eps)) / (2 * eps)
    an = n_prime(s)
    err = np.abs(fd - an)
    bound = rtol * np.maximum(np.abs(an), np.max(np.abs(an)) + 1e-300) + 1e-9
    if np.any(err > bound):
        k = int(np.argmax(err - bound))
        raise PotentialError(
            f"N' inconsistent with N at s={s[k]:.4g}: finite difference {fd[k]:.6g} vs {an[k]:.6g}"
        )


def eval_w(spec: PotentialSpec, s):
    """W(s) = m2 s^2 / 2 + N(s); s must be nonnegative."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise PotentialError("W is defined on the modulus |psi| >= 0")
    out = 0.5 * spec.m2 * arr**2 + spec.n_eval(arr)
    return float(out) if np.ndim(out) == 0 else out


def eval_dw(spec: PotentialSpec, s):
    arr = np.asarray(s, dtype=float)
    out = spec.m2 * arr + spec.n_prime(arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class AssumptionReport:
    w_positive: bool
    w_positive_witness: float
    w_positive_min: float
    nondegenerate: bool
    hylomorphy: bool
    n_at_s0: float
    growth_a: bool
    growth_a_constants: tuple[float, float] | None
    growth_b: bool
    omega0: float

    @property
    def all_pass(self) -> bool:
        return self.w_positive and self.nondegenerate and self.hylomorphy and (self.growth_a or self.growth_b)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["growth_a_constants"] = list(self.growth_a_constants) if self.growth_a_constants else None
        d["all_pass"] = self.all_pass
        return d


def _omega0(spec: PotentialSpec, s_max: float, npts: int = 1024) -> float:
    """inf over u > 0 of sqrt(max(0, 2 W(u) / u^2)), by sampling plus bounded refinement."""
    s = np.logspace(math.log10(s_max) - 8, math.log10(s_max), npts)
    ratio = lambda x: 2.0 * eval_w(spec, x) / (x * x)  # noqa: E731
    vals = ratio(s)
    k = int(np.argmin(vals))
    best = vals[k]
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, npts - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(ratio, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
        best = min(best, float(res.fun))
    return math.sqrt(max(0.0, min(best, spec.m2)))


def _growth_a(spec: PotentialSpec, s_max: float, dim: int, npts: int):
    """Fit |N'(s)| <= a s^(p-1) + b s^(2-2/p) on the lower half of the samples, verify on all."""
    p = spec.p
    if p is None:
        return False, None
    if p <= 2 or (dim > 2 and p >= 2 * dim / (dim - 2)):
        return False, None
    s = np.logspace(math.log10(s_max) - 6, math.log10(s_max), npts)
    target = np.abs(spec.n_prime(s))
    basis = np.column_stack([s ** (p - 1), s ** (2 - 2 / p)])
    half = npts // 2
    # fit on the lower half in log-weighted form so both ends count
    scale = 1.0 / np.maximum(basis[:half].sum(axis=1), 1e-300)
    coef, _ = optimize.nnls(basis[:half] * scale[:, None], target[:half] * scale)
    if not np.all(np.isfinite(coef)) or np.all(coef == 0):
        if np.all(target == 0):
            return True, (0.0, 0.0)
        coef = np.array([1.0, 1.0])
    bound = basis @ coef
    factor = float(np.max(target[:half] / bound[:half]))
    coef = coef * max(factor, 1.0)
    bound = basis @ coef
    ok = bool(np.all(target <= 1.05 * bound))
    return ok, (float(coef[0]), float(coef[1]))


def check_assumptions(spec: PotentialSpec, s_max: float | None = None, samples: int = 4096, dim: int = 3) -> AssumptionReport:
    """Sample-based report on positivity, nondegeneracy, hylomorphy and growth.

    Failures are reported, never raised.  The checks only see ``[0, s_max]``.
    """
    if s_max is None:
        s_max = 10.0 * spec.s0
    if s_max <= spec.s0:
        raise PotentialError("s_max must exceed s0")
    if samples < 100:
        raise PotentialError("need at least 100 samples")

    s = np.linspace(0.0, s_max, samples)
    w = eval_w(spec, s)
    k = int(np.argmin(w))
    w_positive = bool(w[k] >= -1e-14)

    # W''(0) = m2 means N(s)/s^2 -> 0
    tiny = np.array([1e-4, 1e-5]) * max(spec.s0, 1.0)
    ratios = np.asarray(eval_w(spec, tiny)) / tiny**2
    nondegenerate = bool(np.all(np.abs(ratios - 0.5 * spec.m2) < 1e-2 * 0.5 * spec.m2))

    n0 = float(spec.n_eval(spec.s0))
    hylomorphy = n0 < 0

    growth_a, consts = _growth_a(spec, s_max, dim, samples)
    growth_b = bool(spec.s1 is not None and spec.s1 > spec.s0 and float(spec.n_prime(spec.s1)) >= 0)

    return AssumptionReport(
        w_positive=w_positive,
        w_positive_witness=float(s[k]),
        w_positive_min=float(w[k]),
        nondegenerate=nondegenerate,
        hylomorphy=hylomorphy,
        n_at_s0=n0,
        growth_a=growth_a,
        growth_a_constants=consts,
        growth_b=growth_b,
        omega0=_omega0(spec, s_max),
    )


def truncate(spec: PotentialSpec, s1: float) -> PotentialSpec:
    """Replace N by its C^1 linear continuation beyond ``s1``."""
    if float(spec.n_prime(s1)) < 0:
        raise PotentialError(f"truncation needs N'(s1) >= 0, got {float(spec.n_prime(s1)):.6g}")
    tn = TruncatedN(spec.n_eval, spec.n_prime, s1)
    return dataclasses.replace(
        spec, n_eval=tn, n_prime=_Derivative(tn), s1=float(s1), name=f"{spec.name}~trunc{s1:g}", check_derivative=False
    )


def polynomial_potential(coeffs: dict[int, float], m2: float, s0: float, s1=None, p=None, name="polynomial") -> PotentialSpec:
    pn = PolynomialN(coeffs)
    return PotentialSpec(m2=m2, n_eval=pn, n_prime=_Derivative(pn), s0=s0, s1=s1, p=p, name=name)


def builtin(name: str) -> PotentialSpec:
    """Reference potentials.

    wref:  W = s^2 (1 - s)^2 / 2, i.e. N = -s^3 + s^4/2, m2 = 1
    wbad:  W = s^2/2 - s^4/4, negative beyond sqrt(2)
    wfree: N = 0
    """
    key = name.lower().removeprefix("builtin:")
    if key == "wref":
        return polynomial_potential({3: -1.0, 4: 0.5}, m2=1.0, s0=1.0, s1=1.5, p=4.0, name="wref")
    if key == "wbad":
        return polynomial_potential({4: -0.25}, m2=1.0, s0=2.0, p=4.0, name="wbad")
    if key == "wfree":
        return polynomial_potential({}, m2=1.0, s0=1.0, p=4.0, name="wfree")
    raise PotentialError(f"unknown builtin potential {name!r}")


def parse_potential_text(text: str) -> PotentialSpec:
    """Parse the key=value potential format.

    kind=builtin with name=<wref|wbad|wfree>, or kind=polynomial with
    n=3:-1,4:0.5 plus m2, s0 and optional s1, p.  '#' starts a comment.
    """
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PotentialError(f"line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        kv[k.strip().lower()] = v.strip()
    kind = kv.get("kind", "polynomial")
    if kind == "builtin":
        if "name" not in kv:
            raise PotentialError("builtin potential needs name=")
        return builtin(kv["name"])
    if kind != "polynomial":
        raise PotentialError(f"unknown kind {kind!r}")
    try:
        coeffs = {}
        for pair in filter(None, (t.strip() for t in kv.get("n", "").split(","))):
            d, c = pair.split(":")
            coeffs[int(d)] = float(c)
        m2 = float(kv["m2"])
        s0 = float(kv["s0"])
        s1 = float(kv["s1"]) if "s1" in kv else None
        p = float(kv["p"]) if "p" in kv else None
    except (KeyError, ValueError) as exc:
        raise PotentialError(f"bad polynomial potential: {exc}") from exc
    return polynomial_potential(coeffs, m2=m2, s0=s0, s1=s1, p=p, name=kv.get("name", "polynomial"))


def load_potential(ref: str) -> PotentialSpec:
    """``builtin:<name>`` or a path to a key=value potential file."""
    if ref.startswith("builtin:"):
        return builtin(ref)
    path = Path(ref)
    if not path.exists():
        raise PotentialError(f"potential file not found: {ref}")
    return parse_potential_text(path.read_text())
