"""Shared quadrature machinery: structured work grids, spline antiderivatives,
and exponential tail closures.

The integrands this package meets are smooth away from a single marked
point (the critical point y_c), may have a kink where a pole-subtraction
window ends, and develop an O(|c_i|)-wide feature at y_c when the spectral
parameter leaves the real axis.  A `WorkGrid` places nodes accordingly:
uniform background, segment boundaries exactly at y_c and y_c +- a, and an
optional geometric cluster toward y_c.  Integrals are then evaluated by
interpolating the sampled integrand with a cubic spline *per smooth
segment* and integrating the spline exactly, which keeps fourth-order
accuracy through kinks and yields a callable antiderivative usable at
arbitrary points (finite-difference stencils included).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError

__all__ = ["WorkGrid", "SegmentedAntiderivative", "integrate_segments", "exp_tail_integral"]


def _cluster(scale: float, outer: float, per_decade: int = 14) -> np.ndarray:
    """Positive offsets from `scale` to `outer`, log-spaced, plus a linear core."""
    if scale >= outer:
        return np.array([outer])
    decades = np.log10(outer / scale)
    n = max(int(np.ceil(decades * per_decade)), 4)
    logs = np.geomspace(scale, outer, n + 1)
    core = np.linspace(0.0, scale, 5)[1:]
    return np.unique(np.concatenate([core, logs]))


@dataclass(frozen=True)
class WorkGrid:
    """Sorted nodes on [lo, hi] with marked smooth-segment boundaries."""

    nodes: np.ndarray
    boundaries: tuple[float, ...]  # interior segment boundaries (subset of nodes)

    @classmethod
    def around(cls, lo: float, hi: float, center: float | None = None,
               window: float = 0.0, base_h: float = 0.02,
               cluster_scale: float = 0.0) -> "WorkGrid":
        """Uniform base grid plus refinement near `center`.

        `window` marks kink locations center +- window as segment boundaries;
        `cluster_scale` adds geometrically refined nodes down to that scale
        around the center (used when the integrand has an O(|c_i|) feature).
        """
        if hi <= lo:
            raise ValueError("empty work interval")
        n_base = max(int(np.ceil((hi - lo) / base_h)), 16)
        pts = [np.linspace(lo, hi, n_base + 1)]
        bounds: list[float] = []
        if center is not None and lo < center < hi:
            edge = min(window if window > 0 else 0.25, (hi - center), (center - lo))
            scale = cluster_scale if cluster_scale > 0 else edge / 16
            offs = _cluster(scale, edge)
            pts.append(center + offs[offs <= hi - center])
            pts.append(center - offs[offs <= center - lo])
            pts.append(np.array([center]))
            bounds.append(center)
            if window > 0:
                for e in (center - window, center + window):
                    if lo < e < hi:
                        bounds.append(e)
                        pts.append(np.array([e]))
        nodes = np.unique(np.concatenate(pts))
        # drop near-duplicates that would make spline construction singular
        keep = np.concatenate([[True], np.diff(nodes) > 1e-13 * max(1.0, hi - lo)])
        return cls(nodes=nodes[keep], boundaries=tuple(sorted(set(bounds))))

    def segments(self):
        cuts = [self.nodes[0], *self.boundaries, self.nodes[-1]]
        for a, b in zip(cuts[:-1], cuts[1:]):
            sel = (self.nodes >= a - 1e-15) & (self.nodes <= b + 1e-15)
            yield self.nodes[sel]


class SegmentedAntiderivative:
    """F(y) = int_{anchor}^{y} f  from samples of f on a WorkGrid.

    A cubic spline is fitted per smooth segment and integrated in closed
    form, so kinks at segment boundaries cost no accuracy.  Works for real
    or complex integrands.
    """

    def __init__(self, work: WorkGrid, f_vals: np.ndarray, anchor: float | None = None):
        f_vals = np.asarray(f_vals)
        if f_vals.shape != work.nodes.shape:
            raise ValueError("integrand samples do not match work grid")
        self._complex = np.iscomplexobj(f_vals)
        self._pieces = []
        offset = 0.0 + 0.0j if self._complex else 0.0
        idx = {float(x): i for i, x in enumerate(work.nodes)}
        for seg in work.segments():
            i0, i1 = idx[float(seg[0])], idx[float(seg[-1])]
            vals = f_vals[i0:i1 + 1]
            if len(seg) < 4:
                raise ValueError("segment too short for cubic interpolation")
            if self._complex:
                sp = (CubicSpline(seg, vals.real).antiderivative(),
                      CubicSpline(seg, vals.imag).antiderivative())
                end = complex(sp[0](seg[-1]) - sp[0](seg[0]),
                              sp[1](seg[-1]) - sp[1](seg[0]))
            else:
                sp = CubicSpline(seg, vals).antiderivative()
                end = float(sp(seg[-1]) - sp(seg[0]))
            self._pieces.append((seg[0], seg[-1], sp, offset))
            offset = offset + end
        self._lo = self._pieces[0][0]
        self._hi = self._pieces[-1][1]
        self._total = offset
        self._anchor_val = 0.0
        if anchor is not None:
            self._anchor_val = self._raw(np.array([anchor]))[0]

    @property
    def lo(self):
        return self._lo

    @property
    def hi(self):
        return self._hi

    @property
    def total(self):
        """Integral over the whole work interval."""
        return self._total

    def _raw(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex if self._complex else float)
        done = np.zeros(y.shape, dtype=bool)
        for a, b, sp, off in self._pieces:
            sel = (~done) & (y <= b + 1e-14)
            if not np.any(sel):
                continue
            yy = np.clip(y[sel], a, b)
            if self._complex:
                vals = (sp[0](yy) - sp[0](a)) + 1j * (sp[1](yy) - sp[1](a))
            else:
                vals = sp(yy) - sp(a)
            out[sel] = off + vals
            done |= sel
        if not np.all(done):  # beyond the right end: clamp to the total
            out[~done] = self._total
        return out

    def __call__(self, y):
        scalar = np.isscalar(y)
        vals = self._raw(np.atleast_1d(np.asarray(y, dtype=float))) - self._anchor_val
        return vals[0] if scalar else vals


def integrate_segments(work: WorkGrid, f_vals: np.ndarray):
    """One-shot integral of sampled f over the work interval."""
    return SegmentedAntiderivative(work, f_vals).total


def exp_tail_integral(ys: np.ndarray, fs: np.ndarray, side: int):
    """Closure of int f over (hi, +inf) (side=+1) or (-inf, lo) (side=-1).

    Fits |f| ~ A e^{-r |y|} on the supplied boundary-decade samples by a
    linear fit of log|f| and integrates the fitted model; the (complex)
    phase is carried by the last sample.  Returns 0 for negligible data.
    """
    ys = np.asarray(ys, dtype=float)
    fs = np.asarray(fs)
    mags = np.abs(fs)
    if np.max(mags) < 1e-300:
        return 0.0j if np.iscomplexobj(fs) else 0.0
    good = mags > np.max(mags) * 1e-8
    if np.count_nonzero(good) < 3:
        return 0.0j if np.iscomplexobj(fs) else 0.0
    x = ys[good] * side
    slope, logA = np.polyfit(x, np.log(mags[good]), 1)
    rate = -slope
    if rate <= 0:
        raise ConvergenceError("tail does not decay: window too small for tail closure")
    edge = ys[-1] if side > 0 else ys[0]
    # int_edge^{inf} A e^{-r|y|} = |f(edge)| / r; keep the edge phase
    phase = fs[-1] / mags[-1] if side > 0 else fs[0] / mags[0]
    mag = (mags[-1] if side > 0 else mags[0]) / rate
    return phase * mag
