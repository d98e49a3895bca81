"""Monotone shear-flow profiles with exact derivatives up to fourth order.

Every later computation sees a profile through b, b', ..., b'''', the
monotonicity constant c_m with 0 < c_m <= b' <= 1/c_m, and the decay of
b'' at infinity.  The built-in bump family keeps all of that analytic:

    b(y) = y + N * ( int_0^y g0 exp(-z^2/g0^2) dz
                     - int_0^y g0 g1^2 exp(-z^2/(g0 g1)^2) dz )
           + skew * y^3 exp(-(y/skew_scale)^2)

The integrals are error functions; every derivative of the remainder is a
polynomial times a Gaussian, a class closed under differentiation, so no
numerical differentiation enters anywhere.  With 0 < g1 < 1 the symmetric
part has b' >= 1 pointwise; the monotone range only shrinks through the
(small) skew term.

With skew = 0 the profile is odd and b''(0) = b'''(0) = 0.  A nonzero
skew keeps b(0) = b''(0) = 0 but makes b'''(0) = 6*skew nonzero, which is
what separates the two kinds of neutral states this package studies (see
`indicators`): the odd flow carries a degenerate spectral point, the
skewed one a nondegenerate one.

`build_neutral_flow` tunes the amplitude N so that the Schrodinger-type
operator -d^2/dy^2 + b''/b has its ground eigenvalue at a prescribed
target.  Ground value -1 is the neutral-state condition at streamwise
wavenumber one: the stream function of a decaying mode with wave speed 0
solves  psi'' - psi - (b''/b) psi = 0, i.e. (-d^2 + b''/b) psi = -psi.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import erf

from .errors import ConfigError, ConvergenceError
from .grids import Field, Grid

__all__ = [
    "ShearFlow",
    "NeutralFlowParams",
    "ValidationReport",
    "make_profile",
    "validate",
    "invert",
    "schrodinger_ground_eigen",
    "build_neutral_flow",
    "flow_to_config",
    "flow_from_config",
]


# ---------------------------------------------------------------------------
# polynomial-times-Gaussian terms: p(y) * exp(-(y/s)^2), closed under d/dy
# ---------------------------------------------------------------------------

def _poly_mul_y(p: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], p))


def _poly_deriv(p: np.ndarray) -> np.ndarray:
    if len(p) <= 1:
        return np.zeros(1)
    return p[1:] * np.arange(1, len(p))


def _gauss_diff(terms):
    """Differentiate sum of p(y) exp(-(y/s)^2) terms exactly."""
    out = []
    for p, s in terms:
        dp = _poly_deriv(p) - (2.0 / s**2) * _poly_mul_y(p)
        out.append((dp, s))
    return out


def _gauss_eval(terms, y):
    y = np.asarray(y, dtype=float)
    acc = np.zeros_like(y)
    for p, s in terms:
        acc = acc + np.polynomial.polynomial.polyval(y, p) * np.exp(-((y / s) ** 2))
    return acc


@dataclass(frozen=True, eq=False)
class ShearFlow:
    """A monotone profile b with four exact derivatives and decay metadata.

    c_m is the measured monotonicity constant (0 < c_m <= b' <= 1/c_m on
    the reference window); decay_rate r certifies |b''(y)| <~ e^{-r|y|}
    for |y| >= 1, which fixes how wide truncated windows must be.
    feature_scale is the smallest length scale on which b'' varies, used
    to pick quadrature resolutions downstream.
    """

    label: str
    c_m: float
    decay_rate: float
    _b: Callable = field(repr=False)
    _derivs: tuple = field(repr=False)  # callables for n = 1..4
    params: dict = field(default_factory=dict)
    feature_scale: float = 0.25

    def __call__(self, y):
        return self._b(np.asarray(y, dtype=float))

    def deriv(self, y, n: int = 1):
        if not 1 <= n <= 4:
            raise ValueError("derivative order must be 1..4")
        return self._derivs[n - 1](np.asarray(y, dtype=float))

    def inverse(self, c_r: float, tol: float = 1e-14) -> float:
        return invert(self, c_r, tol=tol)

    def suggest_half_width(self, floor: float = 10.0, tol: float = 1e-12) -> float:
        """Window half-width with |b''| < tol outside and room for e^{-2|y|} tails."""
        if not np.isfinite(self.decay_rate):
            return floor
        L = floor
        while abs(float(self.deriv(L, 2))) + abs(float(self.deriv(-L, 2))) > tol and L < 60:
            L += 1.0
        return L


@dataclass(frozen=True)
class NeutralFlowParams:
    """Parameters of the tunable bump family."""

    gamma0: float
    gamma1: float
    N: float
    target_eigenvalue: float = -1.0
    skew: float = 0.0
    skew_scale: float = 1.0

    def __post_init__(self):
        if self.gamma0 <= 0 or self.gamma1 <= 0:
            raise ConfigError("gamma0, gamma1 must be positive")
        if self.N <= 0:
            raise ConfigError("N must be positive")
        if 1.0 - self.N * self.gamma0 * self.gamma1**2 <= 0 and self.gamma1 >= 1:
            raise ConfigError("amplitude too large: profile would lose monotonicity")


def _neutral_family(p: NeutralFlowParams) -> ShearFlow:
    g0, g1, N = p.gamma0, p.gamma1, p.N
    a0, a1 = g0, g0 * g1
    c0 = np.sqrt(np.pi) / 2 * g0**2          # integral of g0 e^{-z^2/g0^2}
    c1 = np.sqrt(np.pi) / 2 * g0**2 * g1**3  # integral of g0 g1^2 e^{-z^2/a1^2}

    # b' - 1 and the skew bump as Gaussian-polynomial terms
    terms1 = [(np.array([N * g0]), a0), (np.array([-N * g0 * g1**2]), a1)]
    if p.skew != 0.0:
        skew_term = [(np.array([0.0, 0.0, 0.0, p.skew]), p.skew_scale)]
        terms1 = terms1 + _gauss_diff(skew_term)
    else:
        skew_term = []

    terms = {1: terms1}
    for n in (2, 3, 4):
        terms[n] = _gauss_diff(terms[n - 1])

    def b(y):
        y = np.asarray(y, dtype=float)
        core = y + N * (c0 * erf(y / a0) - c1 * erf(y / a1))
        if skew_term:
            core = core + _gauss_eval(skew_term, y)
        return core

    def b1(y):
        return 1.0 + _gauss_eval(terms[1], y)

    derivs = (b1,) + tuple(
        (lambda y, t=terms[n]: _gauss_eval(t, y)) for n in (2, 3, 4)
    )

    # measured monotonicity constant on a dense reference window
    yy = np.linspace(-8 * g0 - 4 * p.skew_scale, 8 * g0 + 4 * p.skew_scale, 40001)
    bp = b1(yy)
    if np.min(bp) <= 0:
        raise ConfigError("profile not monotone for these parameters")
    c_m = float(min(np.min(bp), 1.0 / np.max(bp)))

    # |b''(y)| <= C e^{-decay*|y|} for |y| >= 1: Gaussians beat any such rate;
    # take the slowest scale present and certify from |y| >= 1.
    s_max = max([a0, a1] + ([p.skew_scale] if p.skew != 0 else []))
    decay = 1.0 / s_max**2

    label = f"neutral(g0={g0:g},g1={g1:g},N={N:.12g}" + (
        f",skew={p.skew:g})" if p.skew else ")"
    )
    return ShearFlow(
        label=label,
        c_m=c_m,
        decay_rate=decay,
        _b=b,
        _derivs=derivs,
        params={
            "kind": "neutral_family",
            "gamma0": g0,
            "gamma1": g1,
            "N": N,
            "skew": p.skew,
            "skew_scale": p.skew_scale,
        },
        feature_scale=a1,
    )


def _couette() -> ShearFlow:
    one = lambda y: np.ones_like(np.asarray(y, dtype=float))
    zero = lambda y: np.zeros_like(np.asarray(y, dtype=float))
    return ShearFlow(
        label="couette",
        c_m=1.0,
        decay_rate=np.inf,
        _b=lambda y: np.asarray(y, dtype=float),
        _derivs=(one, zero, zero, zero),
        params={"kind": "couette"},
        feature_scale=1.0,
    )


def _tabulated(y: np.ndarray, b: np.ndarray) -> ShearFlow:
    from scipy.interpolate import make_interp_spline

    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    if y.ndim != 1 or y.shape != b.shape or len(y) < 8:
        raise ConfigError("tabulated profile needs two equal 1-D columns, >= 8 rows")
    if np.any(np.diff(y) <= 0):
        raise ConfigError("tabulated y values must be strictly increasing")
    if np.any(np.diff(b) <= 0):
        raise ConfigError("tabulated profile is not strictly increasing")

    # quintic spline: four well-defined derivatives everywhere in the table.
    spl = make_interp_spline(y, b, k=5)
    ders = [spl.derivative(n) for n in range(1, 5)]
    lo, hi = y[0], y[-1]

    def clip(x):
        return np.clip(np.asarray(x, dtype=float), lo, hi)

    # extend linearly outside the table with the edge slope
    def bfun(x):
        x = np.asarray(x, dtype=float)
        inner = spl(clip(x))
        left = spl(lo) + ders[0](lo) * (x - lo)
        right = spl(hi) + ders[0](hi) * (x - hi)
        return np.where(x < lo, left, np.where(x > hi, right, inner))

    def dfun(n):
        def f(x):
            x = np.asarray(x, dtype=float)
            inner = ders[n - 1](clip(x))
            if n == 1:
                out = np.where(x < lo, ders[0](lo), np.where(x > hi, ders[0](hi), inner))
            else:
                out = np.where((x < lo) | (x > hi), 0.0, inner)
            return out
        return f

    bp = ders[0](np.linspace(lo, hi, 4001))
    if np.min(bp) <= 0:
        raise ConfigError("tabulated profile has non-positive slope after interpolation")
    c_m = float(min(np.min(bp), 1.0 / np.max(bp)))
    return ShearFlow(
        label="tabulated",
        c_m=c_m,
        decay_rate=1.0,  # unknown; validated against the window instead
        _b=bfun,
        _derivs=tuple(dfun(n) for n in (1, 2, 3, 4)),
        params={"kind": "tabulated", "y": y.tolist(), "b": b.tolist()},
        feature_scale=float(max(2 * np.min(np.diff(y)), 1e-3)),
    )


def make_profile(kind: str, params: dict | NeutralFlowParams | None = None) -> ShearFlow:
    """Construct a profile: 'couette', 'neutral_family', or 'tabulated'."""
    if kind == "couette":
        return _couette()
    if kind == "neutral_family":
        if isinstance(params, NeutralFlowParams):
            return _neutral_family(params)
        if not isinstance(params, dict):
            raise ConfigError("neutral_family needs parameters")
        return _neutral_family(NeutralFlowParams(
            gamma0=params["gamma0"],
            gamma1=params["gamma1"],
            N=params["N"],
            skew=params.get("skew", 0.0),
            skew_scale=params.get("skew_scale", 1.0),
        ))
    if kind == "tabulated":
        if not isinstance(params, dict) or "y" not in params or "b" not in params:
            raise ConfigError("tabulated profile needs 'y' and 'b' columns")
        return _tabulated(np.asarray(params["y"]), np.asarray(params["b"]))
    raise ConfigError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    label: str
    half_width: float
    bprime_min: float
    bprime_max: float
    c_m: float
    tail_b2: float
    tail_b3: float
    tail_b4: float
    monotone_ok: bool
    tails_ok: bool

    @property
    def ok(self) -> bool:
        return self.monotone_ok and self.tails_ok


def validate(flow: ShearFlow, half_width: float, tol: float = 1e-10,
             n_sample: int = 20001) -> ValidationReport:
    """Measure the monotonicity bounds on [-L, L] and the derivative tails.

    Tails are the largest magnitude of b'', b''', b'''' on |y| in [L, L+5];
    they stand in for the requirement that b'' and three more derivatives
    are square integrable.
    """
    if half_width <= 0:
        raise ConfigError("half_width must be positive")
    y = np.linspace(-half_width, half_width, n_sample)
    bp = flow.deriv(y, 1)
    bmin, bmax = float(np.min(bp)), float(np.max(bp))
    monotone_ok = bmin > 0
    c_m = float(min(bmin, 1.0 / bmax)) if monotone_ok else 0.0

    yt = np.concatenate([np.linspace(half_width, half_width + 5, 501),
                         np.linspace(-half_width - 5, -half_width, 501)])
    tails = [float(np.max(np.abs(flow.deriv(yt, n)))) for n in (2, 3, 4)]
    tails_ok = all(t < tol for t in tails)
    return ValidationReport(
        label=flow.label,
        half_width=half_width,
        bprime_min=bmin,
        bprime_max=bmax,
        c_m=c_m,
        tail_b2=tails[0],
        tail_b3=tails[1],
        tail_b4=tails[2],
        monotone_ok=monotone_ok,
        tails_ok=tails_ok,
    )


def invert(flow: ShearFlow, c_r: float, tol: float = 1e-14) -> float:
    """Solve b(y_c) = c_r by bracketed root finding (b is monotone onto R)."""
    lo, hi = c_r - 1.0, c_r + 1.0
    flo, fhi = float(flow(lo)) - c_r, float(flow(hi)) - c_r
    width = 1.0
    while flo > 0:
        width *= 2
        lo -= width
        flo = float(flow(lo)) - c_r
    while fhi < 0:
        width *= 2
        hi += width
        fhi = float(flow(hi)) - c_r
    y_c = brentq(lambda y: float(flow(y)) - c_r, lo, hi, xtol=tol, rtol=4e-16)
    return float(y_c)


# ---------------------------------------------------------------------------
# ground state of  -d^2/dy^2 + b''/b  and amplitude tuning
# ---------------------------------------------------------------------------

def _potential(flow: ShearFlow, y: np.ndarray, patch_width: float = 1e-4) -> np.ndarray:
    """b''/b with the removable point at the zero of b patched by a Taylor value.

    Requires b''(y0) = 0 at the zero y0 of b; otherwise the ratio has a
    genuine pole and the operator is not the one this routine discretizes.
    """
    y0 = invert(flow, 0.0)
    b2_at = float(flow.deriv(y0, 2))
    b1_at = float(flow.deriv(y0, 1))
    if abs(b2_at) > 1e-8:
        raise ConfigError(
            f"potential b''/b is singular: b''({y0:.3g}) = {b2_at:.3g} != 0"
        )
    b3_at = float(flow.deriv(y0, 3))
    b4_at = float(flow.deriv(y0, 4))
    s = y - y0
    near = np.abs(s) < patch_width
    V = np.empty_like(y)
    ys = y[~near]
    V[~near] = flow.deriv(ys, 2) / flow(ys)
    # second-order Taylor of (b'' / b) about y0 with b(y0) = b''(y0) = 0
    V[near] = (b3_at / b1_at
               + (b4_at / (2 * b1_at)) * s[near]
               - (b3_at**2 / (6 * b1_at**2)) * s[near] ** 2)
    return V


def _ground_on_grid(flow: ShearFlow, grid: Grid):
    y, h = grid.nodes, grid.h
    V = _potential(flow, y)
    diag = 2.0 / h**2 + V
    off = -np.ones(grid.n - 1) / h**2
    lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    v = vec[:, 0]
    v = v / np.sqrt(h * np.sum(v**2))
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return float(lam[0]), v


def schrodinger_ground_eigen(flow: ShearFlow, half_width: float, n: int,
                             conv_tol: float = 1e-6) -> tuple[float, Field]:
    """Lowest eigenvalue of -d^2/dy^2 + b''/b with decay boundary conditions.

    Second-order centered differences on the dyadic pair (n, 2n+1), with one
    Richardson step; the pair difference certifies convergence.
    """
    grid = Grid(half_width, n)
    lam_h, _ = _ground_on_grid(flow, grid)
    fine = grid.refined(2)
    lam_h2, vec = _ground_on_grid(flow, fine)
    lam = (4.0 * lam_h2 - lam_h) / 3.0
    if abs(lam_h2 - lam_h) > 100 * conv_tol:
        raise ConvergenceError(
            f"ground eigenvalue not converged: |delta| = {abs(lam_h2 - lam_h):.2e}"
        )
    # return the eigenvector on the requested grid (restriction of the fine one)
    coarse_vals = vec[1::2]
    coarse_vals = coarse_vals / np.sqrt(grid.h * np.sum(coarse_vals**2))
    return lam, Field(grid, coarse_vals.astype(complex))


def build_neutral_flow(gamma0: float, gamma1: float, target: float = -1.0,
                       skew: float = 0.0, skew_scale: float = 1.0,
                       N_bracket: tuple[float, float] = (0.5, 6.0),
                       half_width: float | None = None, n: int = 4095,
                       tol: float = 1e-8) -> tuple[ShearFlow, float]:
    """Tune the bump amplitude N so the ground eigenvalue hits `target`.

    The eigenvalue decreases as the bump deepens; a sign bracket is located
    by scanning N over the given range and the root polished by Brent.
    Raises HypothesisError-free ConvergenceError diagnostics if no bracket
    exists (the scanned eigenvalue range is reported).
    """
    def flow_at(N):
        return _neutral_family(NeutralFlowParams(
            gamma0=gamma0, gamma1=gamma1, N=N,
            target_eigenvalue=target, skew=skew, skew_scale=skew_scale))

    if half_width is None:
        half_width = flow_at(N_bracket[1]).suggest_half_width(floor=12.0)

    cache: dict[float, float] = {}

    def lam(N):
        if N not in cache:
            cache[N] = schrodinger_ground_eigen(flow_at(N), half_width, n)[0]
        return cache[N]

    # scan for a sign change of lam(N) - target
    Ns = np.linspace(N_bracket[0], N_bracket[1], 12)
    vals = [lam(N) - target for N in Ns]
    bracket = None
    for i in range(len(Ns) - 1):
        if vals[i] == 0.0:
            bracket = (Ns[i], Ns[i])
            break
        if vals[i] * vals[i + 1] < 0:
            bracket = (Ns[i], Ns[i + 1])
            break
    if bracket is None:
        lo, hi = min(v + target for v in vals), max(v + target for v in vals)
        raise ConvergenceError(
            f"no bracket for target {target:g}: eigenvalue range scanned "
            f"[{lo:.6g}, {hi:.6g}] over N in [{N_bracket[0]:g}, {N_bracket[1]:g}]"
        )

    if bracket[0] == bracket[1]:
        N_star = bracket[0]
    else:
        N_star = brentq(lambda N: lam(N) - target, bracket[0], bracket[1],
                        xtol=1e-13, rtol=4e-16)
    resid = abs(lam(N_star) - target)
    if resid > tol:
        raise ConvergenceError(f"amplitude tuning stalled: |lambda - target| = {resid:.2e}")
    return flow_at(float(N_star)), float(N_star)


# ---------------------------------------------------------------------------
# flat-file round trip
# ---------------------------------------------------------------------------

def flow_to_config(flow: ShearFlow, half_width: float | None = None) -> dict:
    cfg = dict(flow.params)
    if half_width is not None:
        cfg["half_width"] = half_width
    return cfg


def flow_from_config(cfg: dict) -> ShearFlow:
    kind = cfg.get("kind")
    if kind is None:
        raise ConfigError("flow config needs a 'kind' entry")
    params = {k: v for k, v in cfg.items() if k not in ("kind", "half_width")}
    return make_profile(kind, params)


def load_tabulated_csv(path: str) -> ShearFlow:
    """Two-column CSV (y, b) -> tabulated profile."""
    data = np.loadtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigError("tabulated CSV must have exactly two columns (y, b)")
    return make_profile("tabulated", {"y": data[:, 0], "b": data[:, 1]})


def save_flow_json(flow: ShearFlow, path: str, half_width: float | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(flow_to_config(flow, half_width), fh, indent=2, sort_keys=True)
        fh.write("\n")
