"""Shooting solver for the radial standing-wave and vortex equations.

    u'' + (d-1)/r u' = W'(u) + ell^2/r^2 u - w^2 u

is integrated outward with RK4 from the regular expansion at the origin
(u = u0 + O(r^2) for ell = 0, u = c r^|ell| (1 + O(r^2)) otherwise).  The
shooting parameter is bisected between trajectories that cross zero and
trajectories that turn back, a batch of candidates at a time.  Past the point
where the two bracketing trajectories separate, the profile is continued by
the decaying solution of the linearized equation, r^(1-d/2) K_nu(kappa r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .grid import Field, RadialGrid
from .potential import PotentialSpec

__all__ = [
    "NoDecayingSolution",
    "BracketError",
    "ShootResult",
    "CrossValidation",
    "shoot",
    "cross_validate",
    "decay_rate_fit",
]


class NoDecayingSolution(ValueError):
    """The frequency admits no localized solution."""


class BracketError(RuntimeError):
    pass


@dataclass
class ShootResult:
    profile: Field
    omega: float
    shoot_param: float
    decay_rate: float
    residual: float
    bisection_steps: int
    splice_radius: float
    r_dense: np.ndarray
    u_dense: np.ndarray
    du_dense: np.ndarray


@dataclass
class CrossValidation:
    l2_distance: float
    energy_difference: float
    omega_mismatch: float
    comparable: bool
    passed: bool

    def to_dict(self) -> dict:
        return dict(vars(self))


def _force(pot: PotentialSpec, omega: float):
    m2, w2 = pot.m2, omega * omega

    def f(u):
        a = np.abs(u)
        return (m2 - w2) * u + np.sign(u) * pot.n_prime(a)

    return f


def _turning_points(pot: PotentialSpec, omega: float, s_max: float):
    """Roots u_- < u_+ of W'(u) = w^2 u bounding the region where the force pulls inward."""
    s = np.linspace(s_max * 1e-6, s_max, 200_001)
    ratio = pot.m2 - omega**2 + pot.n_prime(s) / s
    neg = ratio < 0
    if not np.any(neg):
        raise NoDecayingSolution(f"W'(u) >= w^2 u for all sampled u at w={omega}")
    i0 = int(np.argmax(neg))
    after = ~neg[i0:]
    if not np.any(after):
        return s[i0], None

    i1 = i0 + int(np.argmax(after))
    g = lambda x: pot.m2 - omega**2 + float(pot.n_prime(x)) / x  # noqa: E731
    lo = optimize.brentq(g, s[i0 - 1], s[i0], xtol=1e-15) if i0 > 0 else s[i0]
    hi = optimize.brentq(g, s[i1 - 1], s[i1], xtol=1e-15)
    return lo, hi


class _Integrator:
    def __init__(self, pot, dim, ell, omega, h, n_steps):
        self.f = _force(pot, omega)
        self.dim, self.ell, self.h, self.n = dim, ell, h, n_steps
        self.pot, self.omega = pot, omega

    def rhs(self, r, u, p):
        return self.f(u) + (self.ell**2 / r**2) * u - (self.dim - 1) / r * p

    def _rk4(self, r, u, p, h):
        k1u, k1p = p, self.rhs(r, u, p)
        k2u, k2p = p + 0.5 * h * k1p, self.rhs(r + 0.5 * h, u + 0.5 * h * k1u, p + 0.5 * h * k1p)
        k3u, k3p = p + 0.5 * h * k2p, self.rhs(r + 0.5 * h, u + 0.5 * h * k2u, p + 0.5 * h * k2p)
        k4u, k4p = p + h * k3p, self.rhs(r + h, u + h * k3u, p + h * k3p)
        return u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u), p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)

    def start(self, params, h):
        """State (u, u') at radius h from the series at the origin."""
        d, ell = self.dim, abs(self.ell)
        params = np.asarray(params, dtype=float)
        if ell == 0:
            f0 = self.f(params)
            eps = 1e-6 * np.maximum(np.abs(params), 1.0)
            df = (self.f(params + eps) - self.f(params - eps)) / (2 * eps)
            a = f0 / (2 * d)
            b = df * a / (4 * (d + 2))
            return params + a * h**2 + b * h**4, 2 * a * h + 4 * b * h**3
        # near 0, W'(u)/u -> m2
        k2 = self.pot.m2 - self.omega**2
        a = k2 / (4 * (ell + 1))
        u = params * h**ell * (1 + a * h**2)
        du = params * (ell * h ** (ell - 1) * (1 + a * h**2) + 2 * a * h ** (ell + 1))
        return u, du

    def run(self, params, u_cap=np.inf, record=False):
        """Integrate a batch; return status per member (+1 crossed zero or blew up, -1 turned back, 0 undecided)."""
        # members that already blew up keep integrating to inf/nan; their status is fixed
        with np.errstate(over="ignore", invalid="ignore"):
            return self._run(params, u_cap, record)

    def _run(self, params, u_cap, record):
        h = self.h
        # series start well inside the first cell, then fine RK4 steps out to r = h
        u, p = self.start(params, h / 16)
        for j in range(1, 16):
            u, p = self._rk4(j * h / 16, u, p, h / 16)
        status = np.zeros(u.shape, dtype=int)
        stop_idx = np.full(u.shape, self.n, dtype=int)
        peaked = np.zeros(u.shape, dtype=bool)
        if record:
            us = np.empty((self.n + 1,) + u.shape)
            ps = np.empty_like(us)
            us[0], ps[0] = u, p
        for i in range(1, self.n + 1):
            # the (d-1)/r and ell^2/r^2 coefficients are stiff near the origin: substep there
            nsub = 16 if i < 64 else 1
            hs = h / nsub
            for j in range(nsub):
                u, p = self._rk4(i * h + j * hs, u, p, hs)
            if record:
                us[i], ps[i] = u, p
            open_ = status == 0
            over = open_ & ((u < 0) | (u > u_cap) | ~np.isfinite(u))
            if self.ell == 0:
                # moving outward before ever moving inward: started above the upper turning point
                over |= open_ & ~peaked & (p > 0)
            peaked |= p < 0
            under = open_ & ~over & peaked & (p > 0)
            status[over] = 1
            status[under] = -1
            stop_idx[over | under] = i
            if not record and np.all(status != 0):
                break
        if record:
            return status, stop_idx, us, ps
        return status, stop_idx


def decay_rate_fit(r, u, dim: int, floor: float = 1e-10) -> float:
    """Slope of log(u r^((d-1)/2)) over the last decade of u above ``floor``."""
    r, u = np.asarray(r), np.asarray(u)
    pos = u > floor
    if pos.sum() < 4:
        return float("nan")
    last = np.nonzero(pos)[0][-1]
    top = u[last] * 10.0
    sel = pos & (u <= top) & (np.arange(u.size) <= last)
    sel &= np.r_[np.diff(u) < 0, True]
    idx = np.nonzero(sel)[0]
    if idx.size < 4:
        return float("nan")
    y = np.log(u[idx] * r[idx] ** ((dim - 1) / 2))
    return float(-np.polyfit(r[idx], y, 1)[0])


def shoot(
    pot: PotentialSpec,
    dim: int,
    ell: int,
    omega: float,
    grid: RadialGrid | None = None,
    batch: int = 33,
    s_max: float | None = None,
) -> ShootResult:
    """Ground-state (nodeless) profile at frequency ``omega`` by batched bisection."""
    m = pot.m
    if not 0 < omega < m:
        raise NoDecayingSolution(f"omega={omega} outside (0, m={m})")
    if grid is None:
        grid = RadialGrid(dim, 30.0 / math.sqrt(pot.m2 - omega**2) + 10.0, 4000, ell)
    if grid.dim != dim or grid.ell != ell:
        raise ValueError("grid does not match dim/ell")
    s_max = s_max or 10.0 * pot.s0
    u_minus, u_plus = _turning_points(pot, omega, s_max)
    integ = _Integrator(pot, dim, ell, omega, grid.h, grid.n_nodes - 1)
    steps = 0

    if ell == 0:
        if u_plus is None:
            raise BracketError("no upper turning point within s_max")
        lo, hi = u_minus, u_plus
        u_cap = np.inf
        # starts just below u_+ linger on the hilltop; back off until one visibly overshoots
        gaps = np.logspace(-12, -2, 11)
        st, _ = integ.run(np.concatenate(([lo], hi * (1 - gaps))))
        over = np.nonzero(st[1:] == 1)[0]
        if st[0] == 1 or over.size == 0:
            raise BracketError(f"bisection bracket [{lo}, {hi}] does not straddle the ground state")
        hi = hi * (1 - gaps[over[0]])
    else:
        u_cap = 2.0 * (u_plus if u_plus is not None else s_max)
        cands = np.logspace(-12, 8, batch)
        st, _ = integ.run(cands, u_cap=u_cap)
        over = np.nonzero(st == 1)[0]
        if over.size == 0 or over[0] == 0:
            raise BracketError("could not bracket the vortex amplitude")
        lo, hi = cands[over[0] - 1], cands[over[0]]
        steps += 1

    while hi - lo > 4 * np.spacing(hi):
        cands = np.linspace(lo, hi, batch)
        st, _ = integ.run(cands, u_cap=u_cap)
        steps += 1
        over = np.nonzero(st == 1)[0]
        if over.size == 0:
            lo = cands[-2]
            continue
        k = over[0]
        if k == 0:
            hi = cands[0]
            lo = lo - (hi - lo)
            continue
        new_lo, new_hi = cands[k - 1], cands[k]
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi

    status, stop, us, ps = integ.run(np.array([lo, hi]), u_cap=u_cap, record=True)
    r_all = grid.h * np.arange(grid.n_nodes)
    u_lo, u_hi = us[:, 0], us[:, 1]
    # where the bracketing trajectories separate, the numerical profile stops being trustworthy
    sep = np.abs(u_hi - u_lo) > 1e-6 * np.abs(u_lo) + 1e-300
    sep |= np.arange(r_all.size) >= min(stop.min(), r_all.size - 1)
    peak = int(np.argmax(u_lo))
    sep[: peak + 1] = False
    i_s = int(np.argmax(sep)) - 1 if np.any(sep) else r_all.size - 1
    i_s = max(i_s, peak + 2)
    # r_all[i] is the radius of row i+1 in us (us[0] is at r = h)
    r_rows = grid.h * np.arange(1, grid.n_nodes + 1)
    u_rows = 0.5 * (u_lo + u_hi)
    p_rows = 0.5 * (ps[:, 0] + ps[:, 1])

    kappa = math.sqrt(pot.m2 - omega**2)
    nu = math.sqrt((dim / 2 - 1) ** 2 + ell**2)
    r_s = r_rows[i_s]

    def tail(r):
        return r ** (1 - dim / 2) * special.kve(nu, kappa * r) * np.exp(-kappa * (r - r_s))

    scale = u_rows[i_s] / tail(r_s)
    u_full = u_rows.copy()
    out = r_rows > r_s
    u_full[out] = scale * tail(r_rows[out])
    eps = 1e-6
    dtail = (tail(r_rows[out] + eps) - tail(r_rows[out] - eps)) / (2 * eps)
    p_full = p_rows.copy()
    p_full[out] = scale * dtail

    # residual of the first-order system on the trusted part, via 5-point derivatives
    hh = grid.h
    dp = (p_rows[:-4] - 8 * p_rows[1:-3] + 8 * p_rows[3:-1] - p_rows[4:]) / (12 * hh)
    du = (u_rows[:-4] - 8 * u_rows[1:-3] + 8 * u_rows[3:-1] - u_rows[4:]) / (12 * hh)
    rr = r_rows[2:-2]
    res_p = dp - integ.rhs(rr, u_rows[2:-2], p_rows[2:-2])
    res_u = du - p_rows[2:-2]
    n_ok = max(i_s - 4, 1)
    scale_u = max(float(np.max(np.abs(u_rows[: i_s + 1]))), 1e-300)
    residual = float(max(np.max(np.abs(res_p[:n_ok])), np.max(np.abs(res_u[:n_ok])))) / scale_u

    vals = u_full[:-1].copy()  # drop r = r_max; Dirichlet node
    vals = np.maximum(vals, 0.0)
    prof = Field(grid, vals)
    r_dense = np.concatenate(([0.0], r_rows))
    u_dense = np.concatenate(([0.5 * (lo + hi) if ell == 0 else 0.0], u_full))
    du_dense = np.concatenate(([0.0 if ell != 1 else 0.5 * (lo + hi)], p_full))
    return ShootResult(
        profile=prof,
        omega=omega,
        shoot_param=0.5 * (lo + hi),
        decay_rate=decay_rate_fit(r_rows, u_full, dim),
        residual=residual,
        bisection_steps=steps,
        splice_radius=float(r_s),
        r_dense=r_dense,
        u_dense=u_dense,
        du_dense=du_dense,
    )


def cross_validate(shot: ShootResult, record, ctx=None, tol: float = 1e-2, omega_tol: float = 0.05) -> CrossValidation:
    """Compare a shooting profile with a variational solution at the same frequency.

    Profiles on different grids are resampled onto the record's grid by linear
    interpolation.  Energies are E(u, w) = J(u) + w^2 K(u) evaluated on the
    record's grid with the record's w.
    """
    from .functionals import E, FunctionalContext

    g = record.u.grid
    v = record.u.values
    if shot.profile.grid == g:
        s = shot.profile.values
    else:
        s = np.interp(g.r, shot.r_dense, shot.u_dense, right=0.0)
    w = g.weights
    dist = math.sqrt(float(w @ (s - v) ** 2) / float(w @ (v * v)))
    mism = abs(shot.omega - record.omega) / record.omega
    if ctx is None:
        raise ValueError("cross_validate needs the functional context of the record")
    e_rec = E(ctx, v, record.omega)
    e_sh = E(ctx, s, record.omega)
    de = abs(e_sh - e_rec) / abs(e_rec)
    comparable = mism <= omega_tol
    return CrossValidation(
        l2_distance=dist,
        energy_difference=de,
        omega_mismatch=mism,
        comparable=comparable,
        passed=bool(comparable and dist < tol and de < tol),
    )
