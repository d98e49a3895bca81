"""Solutions of the homogeneous and inhomogeneous Rayleigh equations.

At streamwise wavenumber one the stream-function equation around a
monotone profile b(y) reads

    psi'' - psi - (b''/(b - c)) psi = 0,          c = c_r + i c_i.

Its regular solution through the critical point y_c = b^{-1}(c_r) is
factored as  phi = (b - c) * phi1(y, c_r) * phi2(y, c)  with

    ((b-c_r)^2 phi1')' = (b-c_r)^2 phi1,   phi1(y_c)=1, phi1'(y_c)=0,

and phi2 == 1 on the real axis.  The coefficient (b-c_r)^2 degenerates at
y_c, so phi1 is marched *outward* from a quartic series seed; the seed
coefficients come from substituting a power series into the equation
(phi1''(y_c) = 1/3 always).

The decaying fundamental pair is  varphi^{+-} = phi * int_{+-inf}^{y} phi^{-2}.
Off the real axis that integral is a plain (tail-closed) quadrature.  On
the real axis phi^{-2} has a double pole at y_c and varphi^{+-} are
assembled from the exact decomposition

    varphi^{+-} = phi * [ P1^{+-}/b'(y_c) + P2^{+-} ] - phi1 / b'(y_c),

where P1^{+-}(y) = int_{+-inf}^y (b'(y_c)-b'(y'))/(b-c_r)^2  carries at
worst an odd-pole (log) singularity, handled by subtracting the pole on a
window centered at y_c, and P2^{+-}(y) = int (phi1^{-2}-1)/(b-c_r)^2 is
regular.  Both one-sided limits of varphi^{+-} at y_c equal -1/b'(y_c)
for every real c_r.

The same decomposition yields the boundary values of the Wronskian
W(c) = int phi^{-2}: as c_i -> 0+- it tends to J1 -+ i J2 (see
`indicators`), with J1 = P1-pair/b'(y_c) + P2-pair exactly the pairing of
the one-sided P integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from ._integrate import SegmentedAntiderivative, WorkGrid, exp_tail_integral
from .errors import ConfigError, ConvergenceError, HypothesisError
from .flows import ShearFlow, invert
from .grids import Field, Grid

__all__ = [
    "Phi1Solution",
    "Phi2Solution",
    "RayleighBranch",
    "GluedEigenfunction",
    "InhomogeneousSolution",
    "solve_phi1",
    "solve_phi2",
    "build_branch",
    "varphi_pm",
    "glue_gamma",
    "gamma_c_derivative",
    "solve_inhomogeneous",
    "jstar_quadrature",
    "phi2_band",
]

_SEED_S0 = 1e-3        # series/march hand-off distance from y_c
_PATCH = 1e-3          # use series values of regularized integrands inside
_ODE_RTOL = 3e-12
_ODE_ATOL = 1e-14


def _seed_coeffs(flow: ShearFlow, y_c: float):
    """Quartic series phi1 = 1 + p2 s^2 + p3 s^3 + p4 s^4 about y_c."""
    b1 = float(flow.deriv(y_c, 1))
    b2 = float(flow.deriv(y_c, 2))
    b3 = float(flow.deriv(y_c, 3))
    p2 = 1.0 / 6.0
    p3 = -b2 / (36.0 * b1)
    p4 = (b2**2 / 4.0 - 2.0 * b1 * b3 / 9.0 + b1**2 / 6.0) / (20.0 * b1**2)
    return p2, p3, p4


@dataclass(eq=False)
class Phi1Solution:
    """phi1(., c_r) as dense callables on [lo, hi]."""

    flow: ShearFlow
    c_r: float
    y_c: float
    lo: float
    hi: float
    _p: tuple
    _sol_plus: object = field(repr=False)
    _sol_minus: object = field(repr=False)

    def _series(self, s, order=0):
        p2, p3, p4 = self._p
        if order == 0:
            return 1.0 + p2 * s**2 + p3 * s**3 + p4 * s**4
        if order == 1:
            return 2 * p2 * s + 3 * p3 * s**2 + 4 * p4 * s**3
        return 2 * p2 + 6 * p3 * s + 12 * p4 * s**2

    def _eval(self, y, order):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = y - self.y_c
        out = np.empty_like(y)
        near = np.abs(s) <= _SEED_S0
        out[near] = self._series(s[near], order)
        for sol, side in ((self._sol_plus, s > _SEED_S0), (self._sol_minus, s < -_SEED_S0)):
            if not np.any(side):
                continue
            vals = sol.sol(y[side])
            if order == 0:
                out[side] = vals[0]
            else:
                u2 = (self.flow(y[side]) - self.c_r) ** 2
                dphi = vals[1] / u2
                if order == 1:
                    out[side] = dphi
                else:
                    # phi'' = phi - 2 u' phi' / u   (expanded self-adjoint form)
                    u = self.flow(y[side]) - self.c_r
                    out[side] = vals[0] - 2 * self.flow.deriv(y[side], 1) * dphi / u
        return out

    def value(self, y):
        return self._eval(y, 0)

    def deriv(self, y):
        return self._eval(y, 1)

    def second(self, y):
        return self._eval(y, 2)


def _march_phi1(flow, c_r, y_c, p, side, stop):
    s0 = side * _SEED_S0
    y0 = y_c + s0
    p2, p3, p4 = p
    phi = 1.0 + p2 * s0**2 + p3 * s0**3 + p4 * s0**4
    dphi = 2 * p2 * s0 + 3 * p3 * s0**2 + 4 * p4 * s0**3
    w = (float(flow(y0)) - c_r) ** 2 * dphi

    def rhs(y, z):
        u2 = (float(flow(y)) - c_r) ** 2
        return (z[1] / u2, u2 * z[0])

    sol = solve_ivp(rhs, (y0, stop), (phi, w), method="DOP853",
                    rtol=_ODE_RTOL, atol=_ODE_ATOL, dense_output=True)
    if not sol.success:
        raise ConvergenceError(f"phi1 march failed on side {side}: {sol.message}")
    return sol


@lru_cache(maxsize=256)
def _solve_phi1_cached(flow: ShearFlow, c_r: float, lo: float, hi: float) -> Phi1Solution:
    y_c = invert(flow, c_r)
    if not (lo + 1e-9 < y_c < hi - 1e-9):
        raise ConfigError(f"critical point y_c={y_c:.4g} outside window [{lo:g},{hi:g}]")
    p = _seed_coeffs(flow, y_c)
    sol_p = _march_phi1(flow, c_r, y_c, p, +1, hi)
    sol_m = _march_phi1(flow, c_r, y_c, p, -1, lo)
    return Phi1Solution(flow, c_r, y_c, lo, hi, p, sol_p, sol_m)


def solve_phi1(flow: ShearFlow, c_r: float, half_width: float,
               margin: float = 0.0) -> Phi1Solution:
    """Regular solution of the critical-layer equation on [-L-margin, L+margin]."""
    return _solve_phi1_cached(flow, float(c_r), -half_width - margin, half_width + margin)


# ---------------------------------------------------------------------------
# phi2: the off-axis correction factor
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Phi2Solution:
    c: complex
    y_c: float
    trivial: bool
    _sol_plus: object = field(default=None, repr=False)
    _sol_minus: object = field(default=None, repr=False)
    _phi1: Phi1Solution | None = field(default=None, repr=False)
    _flow: ShearFlow | None = field(default=None, repr=False)

    def value(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.trivial:
            return np.ones_like(y, dtype=complex)
        out = np.empty(y.shape, dtype=complex)
        plus = y >= self.y_c
        if np.any(plus):
            out[plus] = self._sol_plus.sol(y[plus])[0]
        if np.any(~plus):
            out[~plus] = self._sol_minus.sol(y[~plus])[0]
        return out

    def deriv(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.trivial:
            return np.zeros_like(y, dtype=complex)
        out = np.empty(y.shape, dtype=complex)
        plus = y >= self.y_c
        for sol, sel in ((self._sol_plus, plus), (self._sol_minus, ~plus)):
            if not np.any(sel):
                continue
            z = sol.sol(y[sel])
            denom = (self._flow(y[sel]) - self.c) ** 2 * self._phi1.value(y[sel]) ** 2
            out[sel] = z[1] / denom
        return out


def solve_phi2(flow: ShearFlow, c: complex, phi1: Phi1Solution) -> Phi2Solution:
    """Off-axis factor: phi2(y_c)=1, phi2'(y_c)=0; identically 1 on the axis."""
    c = complex(c)
    c_i = c.imag
    y_c = phi1.y_c
    if c_i == 0.0:
        return Phi2Solution(c=c, y_c=y_c, trivial=True)

    b1c = float(flow.deriv(y_c, 1))
    b2c = float(flow.deriv(y_c, 2))

    def ratio(y):
        # phi1 phi1' / (b - c_r): both factors vanish linearly at y_c
        s = y - y_c
        if abs(s) < _PATCH:
            return (1.0 / b1c) * (1.0 / 3.0 - (b2c / (4.0 * b1c)) * s)
        return float(phi1.value(y) * phi1.deriv(y)) / (float(flow(y)) - c.real)

    def rhs(y, z):
        u = float(flow(y)) - c
        p1 = float(phi1.value(y))
        dphi2 = z[1] / (u * u * p1 * p1)
        q = 2j * c_i * float(flow.deriv(y, 1)) * u * ratio(y)
        return (dphi2, -q * z[0])

    z0 = np.array([1.0 + 0.0j, 0.0 + 0.0j])
    sols = []
    for stop in (phi1.hi, phi1.lo):
        sol = solve_ivp(rhs, (y_c, stop), z0, method="DOP853",
                        rtol=1e-11, atol=1e-13, dense_output=True)
        if not sol.success:
            raise ConvergenceError(f"phi2 march failed: {sol.message}")
        sols.append(sol)
    return Phi2Solution(c=c, y_c=y_c, trivial=False,
                        _sol_plus=sols[0], _sol_minus=sols[1],
                        _phi1=phi1, _flow=flow)


def phi2_band(flow: ShearFlow, c_r: float, half_width: float,
              bound: float = 0.5) -> float:
    """Empirical admissible-imaginary-part band for this flow.

    Largest |c_i| among a dyadic ladder for which max|phi2 - 1| stays
    below `bound` across the window; recorded per flow, no claim of
    sharpness.
    """
    phi1 = solve_phi1(flow, c_r, half_width)
    ys = np.linspace(-half_width, half_width, 801)
    best = 0.0
    for c_i in (0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.0):
        phi2 = solve_phi2(flow, complex(c_r, c_i), phi1)
        if np.max(np.abs(phi2.value(ys) - 1.0)) <= bound:
            best = c_i
        else:
            break
    return best


# ---------------------------------------------------------------------------
# real-axis building blocks: pole-subtracted cumulatives of the P integrands
# ---------------------------------------------------------------------------

class _RealLineData:
    """Cumulative machinery shared by varphi^{+-}, the spectral indicator
    functions and the glued eigenfunction at real spectral parameter.

    Everything is derived from two antiderivatives on one structured work
    grid: F1 for the slope-mismatch integrand g1 = (b'(y_c)-b')/(b-c_r)^2
    (odd pole kappa/s subtracted on |y-y_c| < a) and F2 for the regular
    integrand g2 = (phi1^{-2}-1)/(b-c_r)^2.
    """

    def __init__(self, flow: ShearFlow, c_r: float, half_width: float,
                 base_h: float | None = None, window: float = 0.5):
        self.flow = flow
        self.c_r = float(c_r)
        self.phi1 = solve_phi1(flow, c_r, half_width)
        self.y_c = self.phi1.y_c
        self.half_width = half_width
        if base_h is None:
            base_h = min(0.02, flow.feature_scale / 6.0)

        y_c = self.y_c
        b1 = float(flow.deriv(y_c, 1))
        b2 = float(flow.deriv(y_c, 2))
        b3 = float(flow.deriv(y_c, 3))
        b4 = float(flow.deriv(y_c, 4))
        self.b1, self.b2, self.b3, self.b4 = b1, b2, b3, b4
        self.kappa = -b2 / b1**2
        # series constants of the regularized integrands at y_c
        self._g1_0 = (b2**2 / b1 - b3 / 2.0) / b1**2
        self._g1_1 = -(b4 / 6.0 - (5.0 / 6.0) * b2 * b3 / b1
                       + 0.75 * b2**3 / b1**2) / b1**2
        self._g2_0 = -1.0 / (3.0 * b1**2)
        self._g2_1 = 7.0 * b2 / (18.0 * b1**3)

        a = min(window, (half_width - abs(y_c)) / 2.0)
        if a <= 4 * _PATCH:
            raise ConfigError("window too small around the critical point")
        self.a = a
        self.work = WorkGrid.around(-half_width, half_width, center=y_c,
                                    window=a, base_h=base_h)
        yw = self.work.nodes
        self.F1 = SegmentedAntiderivative(self.work, self.g1_reg(yw))
        self.F2 = SegmentedAntiderivative(self.work, self.g2_reg(yw))
        self._tails()

    # -- integrands --------------------------------------------------------
    def g1_reg(self, y):
        """(b'(y_c)-b')/(b-c_r)^2 with kappa/(y-y_c) removed inside the window."""
        y = np.asarray(y, dtype=float)
        s = y - self.y_c
        out = np.empty_like(y)
        near = np.abs(s) < _PATCH
        out[near] = self._g1_0 + self._g1_1 * s[near]
        ys, ss = y[~near], s[~near]
        u = self.flow(ys) - self.c_r
        raw = (self.b1 - self.flow.deriv(ys, 1)) / u**2
        inside = np.abs(ss) < self.a
        raw = raw - np.where(inside, self.kappa / ss, 0.0)
        out[~near] = raw
        return out

    def g2_reg(self, y):
        """(phi1^{-2} - 1)/(b-c_r)^2, continuous across y_c."""
        y = np.asarray(y, dtype=float)
        s = y - self.y_c
        out = np.empty_like(y)
        near = np.abs(s) < _PATCH
        out[near] = self._g2_0 + self._g2_1 * s[near]
        ys = y[~near]
        u = self.flow(ys) - self.c_r
        p1 = self.phi1.value(ys)
        out[~near] = (1.0 / p1**2 - 1.0) / u**2
        return out

    def _tails(self):
        """Algebraic tails assuming b is affine beyond the window, plus the
        exponentially small phi1^{-2} remainder fitted on the last decade."""
        f, L, c_r = self.flow, self.half_width, self.c_r
        bl, bl1 = float(f(-L)), float(f.deriv(-L, 1))
        br, br1 = float(f(L)), float(f.deriv(L, 1))
        # int_{-inf}^{-L} u^{-2} and int_{L}^{inf} u^{-2} for affine b
        i_lo = 1.0 / (bl1 * (c_r - bl))
        i_hi = 1.0 / (br1 * (br - c_r))
        self.t1_lo = (self.b1 - bl1) * i_lo
        self.t1_hi = (self.b1 - br1) * i_hi
        self.t2_lo = -i_lo
        self.t2_hi = -i_hi
        # residual exp tails of  u^{-2} phi1^{-2}
        for side in (-1, +1):
            edge = -L if side < 0 else L
            ys = np.linspace(edge - side * 1.0, edge, 25)[:: (1 if side > 0 else 1)]
            ys = np.sort(ys)
            u = f(ys) - c_r
            vals = 1.0 / (u**2 * self.phi1.value(ys) ** 2)
            t = exp_tail_integral(ys, vals, side)
            if side < 0:
                self.t2_lo += t
            else:
                self.t2_hi += t

    # -- one-sided cumulative integrals -------------------------------------
    def P1_minus(self, y):
        """int_{-inf}^{y} g1 for y < y_c (log pole carried analytically)."""
        y = np.asarray(y, dtype=float)
        s = y - self.y_c
        base = self.t1_lo + self.F1(y)
        logpart = np.where((s > -self.a) & (s < 0),
                           self.kappa * np.log(np.maximum(-s, 1e-300) / self.a), 0.0)
        return base + logpart

    def P1_plus(self, y):
        """int_{+inf}^{y} g1 for y > y_c."""
        y = np.asarray(y, dtype=float)
        s = y - self.y_c
        base = -(self.F1.total - self.F1(y) + self.t1_hi)
        logpart = np.where((s < self.a) & (s > 0),
                           -self.kappa * (np.log(self.a) - np.log(np.maximum(s, 1e-300))),
                           0.0)
        return base + logpart

    def P2_minus(self, y):
        return self.t2_lo + self.F2(y)

    def P2_plus(self, y):
        return -(self.F2.total - self.F2(y) + self.t2_hi)

    # -- full-line pairings --------------------------------------------------
    @property
    def pi1(self) -> float:
        """Principal value of int g1 over the line (odd pole drops out)."""
        return float((self.t1_lo + self.F1.total + self.t1_hi).real)

    @property
    def pi2(self) -> float:
        return float((self.t2_lo + self.F2.total + self.t2_hi).real)

    @property
    def j1(self) -> float:
        return self.pi1 / self.b1 + self.pi2

    @property
    def j2(self) -> float:
        return math.pi * self.b2 / self.b1**3


@lru_cache(maxsize=256)
def _real_line_data(flow: ShearFlow, c_r: float, half_width: float,
                    base_h: float | None = None) -> _RealLineData:
    return _RealLineData(flow, c_r, half_width, base_h=base_h)


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RayleighBranch:
    """All solution data at one spectral parameter, sampled on a grid."""

    flow: ShearFlow
    c: complex
    y_c: float
    grid: Grid
    phi1: np.ndarray           # real field
    phi2: np.ndarray           # complex (== 1 on the axis)
    phi: np.ndarray            # (b - c) phi1 phi2
    varphi_plus: np.ndarray
    varphi_minus: np.ndarray
    dvarphi_plus: np.ndarray
    dvarphi_minus: np.ndarray
    wronskian: complex | None  # int phi^{-2} for c_i != 0, else None
    j1: float | None = None    # real-axis boundary data (c_i = 0 only)
    j2: float | None = None
    phi1_sol: Phi1Solution = None
    phi2_sol: Phi2Solution = None
    _rl: _RealLineData = field(default=None, repr=False)
    _I_minus: Callable = field(default=None, repr=False)
    _I_plus: Callable = field(default=None, repr=False)

    def phi_at(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return ((self.flow(y) - self.c) * self.phi1_sol.value(y)
                * self.phi2_sol.value(y))

    def dphi_at(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        p1, dp1 = self.phi1_sol.value(y), self.phi1_sol.deriv(y)
        p2, dp2 = self.phi2_sol.value(y), self.phi2_sol.deriv(y)
        u = self.flow(y) - self.c
        return self.flow.deriv(y, 1) * p1 * p2 + u * (dp1 * p2 + p1 * dp2)


def _offaxis_cumulative(flow, c, phi1, phi2, half_width, base_h):
    """Antiderivative of phi^{-2} with clustered nodes and exp tail closure."""
    y_c = phi1.y_c
    c_i = abs(c.imag)
    work = WorkGrid.around(-half_width, half_width, center=y_c,
                           window=min(0.5, (half_width - abs(y_c)) / 2),
                           base_h=base_h, cluster_scale=max(c_i / 6.0, 1e-7))
    yw = work.nodes
    phi_w = (flow(yw) - c) * phi1.value(yw) * phi2.value(yw)
    F = SegmentedAntiderivative(work, 1.0 / phi_w**2)
    sel_lo = yw <= yw[0] + 1.0
    sel_hi = yw >= yw[-1] - 1.0
    t_lo = exp_tail_integral(yw[sel_lo], 1.0 / phi_w[sel_lo] ** 2, -1)
    t_hi = exp_tail_integral(yw[sel_hi], 1.0 / phi_w[sel_hi] ** 2, +1)
    W = t_lo + F.total + t_hi

    def I_minus(y):
        return t_lo + F(y)

    def I_plus(y):
        return -(F.total - F(y) + t_hi)

    return I_minus, I_plus, W


def build_branch(flow: ShearFlow, c: complex, grid: Grid,
                 base_h: float | None = None) -> RayleighBranch:
    """Construct phi1, phi2, phi and the decaying pair on the given grid."""
    c = complex(c)
    L = grid.half_width
    phi1 = solve_phi1(flow, c.real, L)
    y_c = phi1.y_c
    if L - abs(y_c) < 10 * grid.h:
        raise ConfigError("critical point too close to the window edge")
    phi2 = solve_phi2(flow, c, phi1)
    if base_h is None:
        base_h = min(0.02, flow.feature_scale / 6.0)

    y = grid.nodes
    p1 = phi1.value(y)
    p2 = phi2.value(y)
    phi = (flow(y) - c) * p1 * p2

    if c.imag != 0.0:
        I_minus, I_plus, W = _offaxis_cumulative(flow, c, phi1, phi2, L, base_h)
        im, ip = I_minus(y), I_plus(y)
        vm, vp = phi * im, phi * ip
        dphi = ((flow.deriv(y, 1)) * p1 * p2
                + (flow(y) - c) * (phi1.deriv(y) * p2 + p1 * phi2.deriv(y)))
        dvm = dphi * im + 1.0 / phi
        dvp = dphi * ip + 1.0 / phi
        branch = RayleighBranch(flow, c, y_c, grid, p1, p2, phi, vp, vm, dvp, dvm,
                                wronskian=complex(W),
                                phi1_sol=phi1, phi2_sol=phi2)
        branch._I_minus, branch._I_plus = I_minus, I_plus
        return branch

    rl = _real_line_data(flow, c.real, L, base_h)
    b1 = rl.b1
    minus = y < y_c
    plus = ~minus
    vm = np.zeros(grid.n, dtype=complex)
    vp = np.zeros(grid.n, dtype=complex)
    dvm = np.zeros(grid.n, dtype=complex)
    dvp = np.zeros(grid.n, dtype=complex)

    dphi = (flow.deriv(y, 1) * p1 + (flow(y) - c.real) * phi1.deriv(y)).astype(complex)

    def assemble(sel, P1, P2, g1_at, g2_at):
        ys = y[sel]
        bracket = P1(ys) / b1 + P2(ys)
        val = phi[sel] * bracket - p1[sel] / b1
        dval = (dphi[sel] * bracket
                + phi[sel] * (g1_at(ys) / b1 + g2_at(ys))
                - phi1.deriv(ys) / b1)
        return val, dval

    def g1_full(ys):
        # unsubtracted integrand, safe away from the patch; series inside
        s = ys - y_c
        out = np.empty_like(ys)
        near = np.abs(s) < _PATCH
        if np.any(near):
            out[near] = (rl._g1_0 + rl._g1_1 * s[near]) + rl.kappa / s[near]
        u = flow(ys[~near]) - c.real
        out[~near] = (b1 - flow.deriv(ys[~near], 1)) / u**2
        return out

    def g2_full(ys):
        return rl.g2_reg(ys)

    if np.any(minus):
        vm[minus], dvm[minus] = assemble(minus, rl.P1_minus, rl.P2_minus, g1_full, g2_full)
    if np.any(plus):
        vp[plus], dvp[plus] = assemble(plus, rl.P1_plus, rl.P2_plus, g1_full, g2_full)

    branch = RayleighBranch(flow, c, y_c, grid, p1, p2.astype(complex),
                            phi.astype(complex), vp, vm, dvp, dvm,
                            wronskian=None, j1=rl.j1, j2=rl.j2,
                            phi1_sol=phi1, phi2_sol=phi2)
    branch._rl = rl
    return branch


def varphi_pm(flow: ShearFlow, c: complex, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Decaying fundamental pair (varphi^+, varphi^-) sampled on the grid.

    For real c the plus branch is only defined on y > y_c and the minus
    branch on y < y_c; entries outside those half-lines are zero.
    """
    br = build_branch(flow, c, grid)
    return br.varphi_plus, br.varphi_minus


# ---------------------------------------------------------------------------
# glued eigenfunction and its spectral-parameter derivative
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GluedEigenfunction:
    """Stream-function eigenfunction candidate glued from varphi^{+-}.

    gamma is continuous with value -1/b'(y_c) at y_c for any real c_star;
    it is an actual decaying solution exactly when the derivative also
    matches, i.e. when both indicator functions vanish.  jump_value and
    jump_deriv record the one-sided mismatches of d/dc varphi^{+-} and of
    d/dy d/dc varphi^{+-}; the first equals J1(c_star), the second is
    -[dP1-pair + b' dP2-pair] and vanishes together with J1', J2'.
    """

    c_star: float
    y_c: float
    grid: Grid
    gamma: np.ndarray
    dgamma: np.ndarray
    omega_star: np.ndarray       # (d^2/dy^2 - 1) gamma  via  b'' gamma / (b - c)
    jump_value: float
    jump_deriv: float
    gamma_cderiv: np.ndarray | None = None
    branch: RayleighBranch = None

    def gamma_field(self) -> Field:
        return Field(self.grid, self.gamma)

    def omega_field(self) -> Field:
        return Field(self.grid, self.omega_star)


def _omega_from_gamma(flow, c_star, y_c, y, gamma):
    """(d^2-1)Gamma = b'' Gamma / (b - c_star) pointwise from the equation.

    The ratio has limit b'''(y_c)/b'(y_c) at the critical point (both
    numerator and denominator vanish linearly there when b''(y_c) = 0).
    """
    u = flow(y) - c_star
    ratio = np.empty_like(y)
    s = y - y_c
    near = np.abs(s) < 1e-7
    ratio[near] = float(flow.deriv(y_c, 3)) / float(flow.deriv(y_c, 1))
    ratio[~near] = flow.deriv(y[~near], 2) / u[~near]
    return ratio * gamma


def glue_gamma(flow: ShearFlow, c_star: float, grid: Grid,
               tol: float = 1e-4) -> GluedEigenfunction:
    """Glue varphi^- (y < y_c) to varphi^+ (y > y_c) at an eigenvalue candidate.

    Raises HypothesisError when the derivative mismatch certifies that
    c_star is not an eigenvalue at this resolution.
    """
    br = build_branch(flow, c_star, grid)
    rl = br._rl
    y = grid.nodes
    y_c = br.y_c
    minus = y < y_c
    gamma = np.where(minus, br.varphi_minus, br.varphi_plus)
    dgamma = np.where(minus, br.dvarphi_minus, br.dvarphi_plus)
    exact = np.abs(y - y_c) < 1e-12
    gamma[exact] = -1.0 / rl.b1
    jump_value = rl.j1
    jump_deriv = _dc_pair_mismatch(flow, c_star, grid.half_width, rl)
    if math.hypot(rl.j1, rl.j2) > tol:
        raise HypothesisError(
            f"c={c_star:g} is not an eigenvalue at this resolution: "
            f"|J1|={abs(rl.j1):.2e}, |J2|={abs(rl.j2):.2e} (tol {tol:g})")
    omega = _omega_from_gamma(flow, c_star, y_c, y, gamma)
    return GluedEigenfunction(c_star=c_star, y_c=y_c, grid=grid,
                              gamma=gamma.astype(complex),
                              dgamma=dgamma.astype(complex),
                              omega_star=omega.astype(complex),
                              jump_value=float(jump_value),
                              jump_deriv=float(jump_deriv),
                              branch=br)


def _dc_pair_mismatch(flow, c_r, half_width, rl: _RealLineData) -> float:
    """Mismatch of d/dy d/dc varphi^{+-} at y_c: -[dP1 + b' dP2] paired.

    dP1 integrand: (b''(y_c)-b'')/(b' u^2) + 2 (b'(y_c)-b')^2/(b'(y_c) u^3),
    odd pole (-b''' / b'^3 + 2 b''^2 / b'^4)/s subtracted on the window.
    dP2 integrand is regular; the common boundary terms of the one-sided
    limits cancel in the pairing and are omitted.
    """
    y_c, b1, b2, b3, b4 = rl.y_c, rl.b1, rl.b2, rl.b3, rl.b4
    kap = -b3 / b1**3 + 2 * b2**2 / b1**4
    lam0 = (-(b4 / 2 - b3 * b2 / b1) / b1**3
            + (2 * b2 * b3 - 3 * b2**3 / b1) / b1**4)
    a = rl.a
    # c_r-derivative of phi1 by central differences (for the dP2 integrand)
    d = 1e-4
    ph_p = solve_phi1(flow, c_r + d, half_width, margin=1.0)
    ph_m = solve_phi1(flow, c_r - d, half_width, margin=1.0)

    def dG_g1(y):
        y = np.asarray(y, dtype=float)
        s = y - y_c
        out = np.empty_like(y)
        near = np.abs(s) < _PATCH
        out[near] = lam0
        ys, ss = y[~near], s[~near]
        u = flow(ys) - c_r
        v1 = (b2 - flow.deriv(ys, 2)) / (b1 * u**2)
        v2 = 2 * (b1 - flow.deriv(ys, 1)) ** 2 / (b1 * u**3)
        raw = v1 + v2 - np.where(np.abs(ss) < a, kap / ss, 0.0)
        out[~near] = raw
        return out

    def dG_g2(y):
        y = np.asarray(y, dtype=float)
        s = y - y_c
        out = np.empty(y.shape)
        near = np.abs(s) < _PATCH
        out[near] = 2 * b2 / (3 * b1**4)
        ys = y[~near]
        u = flow(ys) - c_r
        p1 = rl.phi1.value(ys)
        dG_phi1 = (ph_p.value(ys) - ph_m.value(ys)) / (2 * d) + rl.phi1.deriv(ys) / b1
        t1 = 2 * (b1 - flow.deriv(ys, 1)) * (1.0 / p1**2 - 1.0) / (b1 * u**3)
        t2 = -2.0 * dG_phi1 / (u**2 * p1**3)
        out[~near] = t1 + t2
        return out

    work = rl.work
    F_d1 = SegmentedAntiderivative(work, dG_g1(work.nodes))
    F_d2 = SegmentedAntiderivative(work, dG_g2(work.nodes))
    # affine tails: beyond the window b'' ~ 0 and b is affine, so
    # int u^{-2} and int u^{-3} close in closed form per side
    L = half_width
    bl, bl1 = float(flow(-L)), float(flow.deriv(-L, 1))
    br_, br1 = float(flow(L)), float(flow.deriv(L, 1))
    i2_lo = 1.0 / (bl1 * (c_r - bl))
    i2_hi = 1.0 / (br1 * (br_ - c_r))
    i3_lo = -1.0 / (2 * bl1 * (bl - c_r) ** 2)   # int_{-inf}^{-L} u^{-3} < 0
    i3_hi = 1.0 / (2 * br1 * (br_ - c_r) ** 2)   # int_{L}^{inf} u^{-3} > 0
    t1_lo = (b2 / b1) * i2_lo + (2 * (b1 - bl1) ** 2 / b1) * i3_lo
    t1_hi = (b2 / b1) * i2_hi + (2 * (b1 - br1) ** 2 / b1) * i3_hi
    t2_lo = -(2 * (b1 - bl1) / b1) * i3_lo
    t2_hi = -(2 * (b1 - br1) / b1) * i3_hi
    dP1 = F_d1.total + t1_lo + t1_hi
    dP2 = F_d2.total + t2_lo + t2_hi
    return float(-(dP1 + b1 * dP2))


def gamma_c_derivative(flow: ShearFlow, c_star: float, grid: Grid,
                       delta: float = 1e-3, tol_value: float = 1e-3,
                       tol_deriv: float = 5e-3,
                       check: bool = True) -> np.ndarray:
    """d/dc of the glued eigenfunction at c_star by Richardson differences.

    Each sampled branch is glued at its own critical point; the handful of
    nodes inside the branch-switch strip |y - y_c| < 4 delta / c_m are
    repaired by local cubic interpolation.  When `check` is set, the
    one-sided limits of value and slope at y_c are compared and a
    HypothesisError raised if they disagree beyond tolerance (the
    eigenvalue is then not degenerate at this resolution).
    """
    y = grid.nodes
    y_c = invert(flow, c_star)

    def glued_at(c_r):
        br = build_branch(flow, c_r, grid)
        g = np.where(y < br.y_c, br.varphi_minus, br.varphi_plus)
        return g

    def diff(h):
        return (glued_at(c_star + h) - glued_at(c_star - h)) / (2 * h)

    D1 = diff(delta)
    D2 = diff(delta / 2)
    dgam = (4 * D2 - D1) / 3

    strip = np.abs(y - y_c) < 4 * delta / flow.c_m
    if np.any(strip):
        idx = np.where(~strip)[0]
        from scipy.interpolate import CubicSpline
        spl_r = CubicSpline(y[idx], dgam[idx].real)
        spl_i = CubicSpline(y[idx], dgam[idx].imag)
        dgam[strip] = spl_r(y[strip]) + 1j * spl_i(y[strip])

    if check:
        rl = _real_line_data(flow, c_star, grid.half_width, None)
        if math.hypot(rl.j1, rl.j2) > tol_value:
            raise HypothesisError("value matching fails: c_star is not an eigenvalue")
        mism = _dc_pair_mismatch(flow, c_star, grid.half_width, rl)
        scale = max(1.0, float(np.max(np.abs(dgam))))
        if abs(mism) > tol_deriv * scale:
            raise HypothesisError(
                f"slope matching fails (mismatch {mism:.3e}): eigenvalue not degenerate")
    return dgam


def dc_varphi_limits(flow: ShearFlow, c_star: float, half_width: float) -> dict:
    """One-sided limits of d/dc varphi^{+-} and d/dy d/dc varphi^{+-} at y_c.

    Closed-form limits used as a cross-check of the finite-difference
    field: value^{+-} = -P1^{+-}(y_c)/b' - P2^{+-}(y_c) + 2 J2 / pi, and
    slope^{+-} = dP1^{+-} + b' dP2^{+-} + 2/(3 b'^2) - b'''/(2 b'^3).
    Only the *mismatches* are returned (individual limits need the common
    boundary constants, which cancel in the mismatch).
    """
    rl = _real_line_data(flow, c_star, half_width, None)
    return {
        "value_mismatch": rl.j1,
        "slope_mismatch": _dc_pair_mismatch(flow, c_star, half_width, rl),
    }


# ---------------------------------------------------------------------------
# inhomogeneous problem at complex spectral parameter
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class InhomogeneousSolution:
    """Decaying solution Phi of the forced critical-layer equation.

    resolvent_psi = i Phi is the resolvent of the conjugated generator
    applied to the stream form of the forcing.  well_conditioned is False
    near an eigenvalue (|W| below threshold); values are still returned.
    """

    c: complex
    grid: Grid
    Phi: np.ndarray
    mu: complex
    jstar: complex
    wronskian: complex
    Phi_left: np.ndarray
    Phi_right: np.ndarray
    well_conditioned: bool

    @property
    def resolvent_psi(self) -> np.ndarray:
        return 1j * self.Phi


def _omega_callable(omega_in):
    if callable(omega_in):
        return omega_in
    if isinstance(omega_in, Field):
        from scipy.interpolate import CubicSpline
        nodes = omega_in.grid.nodes
        vals = omega_in.values
        spl_r = CubicSpline(nodes, vals.real, bc_type="natural")
        spl_i = CubicSpline(nodes, vals.imag, bc_type="natural")
        lo, hi = nodes[0], nodes[-1]

        def f(y):
            y = np.asarray(y, dtype=float)
            out = spl_r(np.clip(y, lo, hi)) + 1j * spl_i(np.clip(y, lo, hi))
            return np.where((y < lo) | (y > hi), 0.0, out)
        return f
    raise ConfigError("omega_in must be callable or a Field")


def jstar_quadrature(flow: ShearFlow, omega_in, c: complex, half_width: float,
                     base_h: float | None = None) -> complex:
    """J*(omega, c) = int G(y)/phi(y,c)^2 dy with G = int_{y_c}^y omega phi1(.,c).

    Defined for c off the real axis; the real-axis boundary values are the
    indicator pair (J3, +-J4) computed in `indicators`.
    """
    c = complex(c)
    if c.imag == 0:
        raise ConfigError("jstar_quadrature needs c_i != 0; use indicators.j3/j4 on the axis")
    phi1 = solve_phi1(flow, c.real, half_width)
    phi2 = solve_phi2(flow, c, phi1)
    omega = _omega_callable(omega_in, None) if callable(omega_in) else None
    if omega is None:
        raise ConfigError("jstar_quadrature needs a callable forcing")
    if base_h is None:
        base_h = min(0.02, flow.feature_scale / 6.0)
    y_c = phi1.y_c
    work = WorkGrid.around(-half_width, half_width, center=y_c,
                           window=min(0.5, (half_width - abs(y_c)) / 2),
                           base_h=base_h, cluster_scale=max(abs(c.imag) / 6.0, 1e-7))
    yw = work.nodes
    gphi1 = np.asarray(omega(yw), dtype=complex) * phi1.value(yw) * phi2.value(yw)
    G = SegmentedAntiderivative(work, gphi1, anchor=y_c)
    phi_w = (flow(yw) - c) * phi1.value(yw) * phi2.value(yw)
    K = G(yw) / phi_w**2
    F = SegmentedAntiderivative(work, K)
    sel_lo = yw <= yw[0] + 1.0
    sel_hi = yw >= yw[-1] - 1.0
    t_lo = exp_tail_integral(yw[sel_lo], K[sel_lo], -1)
    t_hi = exp_tail_integral(yw[sel_hi], K[sel_hi], +1)
    return complex(t_lo + F.total + t_hi)


def solve_inhomogeneous(flow: ShearFlow, c: complex, omega_in, grid: Grid,
                        w_threshold: float = 1e-6,
                        base_h: float | None = None) -> InhomogeneousSolution:
    """Unique decaying solution of the forced equation at c off the axis.

    Built from nested quadratures against phi^{-2}; the left and right
    assemblies agree identically in exact arithmetic and their interior
    disagreement is a discretization diagnostic, tested separately.
    """
    c = complex(c)
    if c.imag == 0:
        raise ConfigError("solve_inhomogeneous requires c_i != 0")
    omega = _omega_callable(omega_in, grid)
    br = build_branch(flow, c, grid, base_h=base_h)
    phi1, phi2 = br.phi1_sol, br.phi2_sol
    y_c = br.y_c
    L = grid.half_width
    if base_h is None:
        base_h = min(0.02, flow.feature_scale / 6.0)
    work = WorkGrid.around(-L, L, center=y_c,
                           window=min(0.5, (L - abs(y_c)) / 2),
                           base_h=base_h, cluster_scale=max(abs(c.imag) / 6.0, 1e-7))
    yw = work.nodes
    p1w = phi1.value(yw)
    p2w = phi2.value(yw)
    phi_w = (flow(yw) - c) * p1w * p2w
    gphi1 = np.asarray(omega(yw), dtype=complex) * p1w * p2w
    G = SegmentedAntiderivative(work, gphi1, anchor=y_c)
    K = G(yw) / phi_w**2
    FK = SegmentedAntiderivative(work, K)
    sel_lo = yw <= yw[0] + 1.0
    sel_hi = yw >= yw[-1] - 1.0
    tK_lo = exp_tail_integral(yw[sel_lo], K[sel_lo], -1)
    tK_hi = exp_tail_integral(yw[sel_hi], K[sel_hi], +1)
    jstar = complex(tK_lo + FK.total + tK_hi)
    W = br.wronskian
    mu = jstar / W
    well = abs(W) >= w_threshold

    y = grid.nodes
    phi_y = br.phi
    KI_minus = tK_lo + FK(y)
    KI_plus = -(FK.total - FK(y) + tK_hi)
    Phi_il = 1j * phi_y * KI_minus
    Phi_ir = 1j * phi_y * KI_plus
    Phi_hl = 1j * phi_y * br._I_minus(y)
    Phi_hr = 1j * phi_y * br._I_plus(y)
    Phi_left = Phi_il - mu * Phi_hl
    Phi_right = Phi_ir - mu * Phi_hr
    # the two assemblies are analytically equal; average for symmetry
    Phi = 0.5 * (Phi_left + Phi_right)
    return InhomogeneousSolution(c=c, grid=grid, Phi=Phi, mu=complex(mu),
                                 jstar=jstar, wronskian=complex(W),
                                 Phi_left=Phi_left, Phi_right=Phi_right,
                                 well_conditioned=bool(well))
