"""Symmetrisation: distribution function, u*, u**, u^sharp, Hardy and Talenti checks.

Atomic inputs (value, measure) are rearranged exactly by sorting.  For the
Talenti comparison, continuous data are sampled on a fine grid and treated as
piecewise linear in s, whose distribution function and rearrangement are
computed in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .deficit import DeficitReport
from .errors import DomainError, NotVanishingError
from .profile import (
    COMPACT,
    Pointwise,
    RadialProfile,
    SourceProfile,
    laplace_hyperbolic,
    talenti_profile,
)
from .quadrature import adaptive_gk

__all__ = [
    "SampledFunction",
    "RearrangementResult",
    "distribution",
    "decreasing_rearrangement",
    "maximal",
    "hardy_check",
    "hardy_littlewood_check",
    "sample_profile",
    "linear_rearrangement",
    "talenti_compare",
]


class SampledFunction:
    """A nonnegative function known through its value distribution.

    values[i] is taken on a set of measure weights[i].  For weighted
    comparisons an atom is the radial shell s in [positions[i],
    positions[i] + weights[i]); without positions the shells are laid end
    to end from s = 0 in the given order.
    """

    def __init__(self, values, weights, positions=None):
        values = np.abs(np.asarray(values, dtype=float))
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape or values.ndim != 1:
            raise DomainError("values and weights must be 1-D of equal length")
        if not np.all(np.isfinite(values)):
            raise DomainError("values must be finite")
        if np.any(~(weights > 0)):
            raise DomainError("weights must be positive")
        self.values = values
        self.weights = weights
        self.positions = None if positions is None else np.asarray(positions, dtype=float)
        self.total_measure = float(weights.sum())


def distribution(f, lam):
    """mu(lam) = measure{ |u| > lam }."""
    if lam < 0:
        raise DomainError("level must be >= 0")
    return float(f.weights[f.values > lam].sum())


@dataclass(frozen=True)
class RearrangementResult:
    """u* as a right-continuous step function with levels[j] on [cum[j-1], cum[j])."""

    levels: np.ndarray
    cum: np.ndarray
    ctx: object = None

    def ustar(self, t):
        t = np.asarray(t, dtype=float)
        if self.levels.size == 0:
            return np.zeros(t.shape)
        j = np.searchsorted(self.cum, t, side="right")
        lv = np.concatenate([self.levels, [0.0]])
        return lv[j]

    def ustarstar(self, t):
        return maximal(self)(t)

    @property
    def sharp_profile(self):
        if self.ctx is None:
            raise DomainError("u^sharp needs a GeometryContext")
        return step_profile(self.ctx, self.levels, self.cum)

    def lp_norm(self, q):
        widths = np.diff(np.concatenate([[0.0], self.cum]))
        return float((self.levels ** q * widths).sum() ** (1.0 / q))


def decreasing_rearrangement(f, ctx=None):
    """Sort atoms by value (descending), merge ties, accumulate measure."""
    keep = f.values > 0
    vals, wts = f.values[keep], f.weights[keep]
    if np.any(~np.isfinite(wts)):
        raise NotVanishingError("a positive level set has infinite measure")
    if vals.size == 0:
        return RearrangementResult(np.zeros(0), np.zeros(0), ctx)
    order = np.argsort(-vals, kind="stable")
    vals, wts = vals[order], wts[order]
    uniq, start = np.unique(-vals, return_index=True)
    merged = np.add.reduceat(wts, start)
    return RearrangementResult(-uniq, np.cumsum(merged), ctx)


def maximal(res):
    """u**(t) = (1/t) int_0^t u*, exact for the step function u*."""
    lv, cum = res.levels, res.cum
    prev = np.concatenate([[0.0], cum[:-1]]) if cum.size else np.zeros(0)
    C = np.concatenate([[0.0], np.cumsum(lv * (cum - prev))])
    top = lv[0] if lv.size else 0.0

    def ustarstar(t):
        t = np.asarray(t, dtype=float)
        if lv.size == 0:
            return np.zeros(t.shape)
        j = np.searchsorted(cum, t, side="right")
        lvx = np.concatenate([lv, [0.0]])
        start = np.concatenate([[0.0], cum])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (C[j] + lvx[j] * (t - start[j])) / t
        return np.where(t > 0, out, top)

    return ustarstar


def hardy_check(res, p):
    """(p/(p-1))^p int (u*)^p  >=  int (u**)^p."""
    if p <= 1:
        raise DomainError("Hardy's inequality needs p > 1")
    lv, cum = res.levels, res.cum
    if lv.size == 0:
        return DeficitReport("hardy_maximal", 0.0, 0.0, params={"p": p})
    widths = np.diff(np.concatenate([[0.0], cum]))
    lp = float((lv ** p * widths).sum())
    uss = maximal(res)
    # first cell is constant; the rest in log t
    head = lv[0] ** p * cum[0]
    body = 0.0
    err = 0.0
    if cum.size > 1:
        y = np.log(cum)
        q = adaptive_gk(lambda yy: uss(np.exp(yy)) ** p * np.exp(yy), y, tol=1e-13)
        body, err = q.value, q.error
    total = float(lv @ widths)
    tail = total ** p * cum[-1] ** (1 - p) / (p - 1)
    lhs = (p / (p - 1)) ** p * lp
    rhs = head + body + tail
    return DeficitReport("hardy_maximal", lhs, rhs, quad_error=err, params={"p": p})


def step_profile(ctx, levels, cum):
    """u^sharp: the radial step function with u*(s) as profile."""
    n, sig = ctx.n, ctx.sigma_n
    radii = (np.asarray(cum) / sig) ** (1.0 / n)
    lv = np.concatenate([np.asarray(levels, dtype=float), [0.0]])

    def w(r):
        return lv[np.searchsorted(radii, r, side="right")]

    zero = lambda r: np.zeros(np.shape(r))
    support = float(radii[-1]) if radii.size else 1.0
    return RadialProfile(ctx, w, zero, zero, support=support, breaks=radii,
                         r_scale=float(np.median(radii)) if radii.size else 1.0,
                         decay=COMPACT, name="sharp")


_GLX, _GLW = np.polynomial.legendre.leggauss(10)


def sample_profile(p, width=0.05):
    """Atoms at Gauss-Legendre nodes in log r: sum w_i |v_i|^q matches int |v|^q ds."""
    x_lo, x_hi = p.x_range
    edges = np.arange(x_lo, x_hi + width, width)
    edges[-1] = min(edges[-1], x_hi)
    brk = [math.log(b) for b in p.breaks if x_lo < math.log(b) < x_hi]
    edges = np.unique(np.concatenate([edges, brk]))
    a, b = edges[:-1], edges[1:]
    x = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GLX).ravel()
    wq = (0.5 * (b - a)[:, None] * _GLW).ravel()
    pw = Pointwise(p, np.exp(x))
    weight = wq * pw.jac
    vals = np.abs(pw.w)
    keep = weight > 0
    return SampledFunction(vals[keep], weight[keep])


def _w_integral(sig, n, lo, hi):
    # int_lo^hi (t/sigma_n)^(-4/n) dt
    e = 1.0 - 4.0 / n
    return sig ** (4.0 / n) * (hi ** e - lo ** e) / e


def hardy_littlewood_check(f, ctx):
    """int u^2 W <= int (u^sharp)^2 W for the decreasing weight W = (s/sigma_n)^(-4/n).

    Both sides integrate W exactly over shells, so step functions are
    handled without quadrature error and equality holds when u is already
    radially decreasing.
    """
    n, sig = ctx.n, ctx.sigma_n
    if n <= 4:
        raise DomainError("W is not integrable at 0 for n <= 4")
    if f.positions is None:
        lo = np.concatenate([[0.0], np.cumsum(f.weights)[:-1]])
    else:
        lo = f.positions
    if np.any(lo < 0):
        raise DomainError("positions must be nonnegative")
    plain = float((f.values ** 2 * _w_integral(sig, n, lo, lo + f.weights)).sum())
    res = decreasing_rearrangement(f)
    start = np.concatenate([[0.0], res.cum[:-1]])
    sharp = float((res.levels ** 2 * _w_integral(sig, n, start, res.cum)).sum())
    return DeficitReport("hardy_littlewood", sharp, plain, params={"n": n}, tol=1e-12)


# ---------------------------------------------------------------------------
# piecewise-linear rearrangement

def linear_rearrangement(s, y):
    """Decreasing rearrangement of the piecewise-linear |y| on nodes s (zero past s[-1]).

    Returns knots (T, L), T increasing from 0 and L nonincreasing, such that
    u*(t) = interp(t, T, L) and u* = 0 beyond T[-1].  Exact for piecewise
    linear data: mu is evaluated at every node value, where it is the sum of
    whole cells lying above the level plus the crossing fraction of each cell
    the level cuts.  Sums run from the top level down, so nothing cancels.
    """
    s = np.asarray(s, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    nodes = np.concatenate([[0.0], s])
    vals = np.concatenate([[y[0]], y])   # constant continuation on [0, s_0]
    h = np.diff(nodes)
    m = np.minimum(vals[:-1], vals[1:])
    M = np.maximum(vals[:-1], vals[1:])
    flat = M == m
    levA = np.unique(vals)                               # ascending
    lev = levA[::-1]

    def above(keys, weights, lam, strict):
        # sum of weights with key > lam (strict) or >= lam
        order = np.argsort(-keys, kind="stable")
        kd = -keys[order]                                 # ascending in -key
        cw = np.concatenate([[0.0], np.cumsum(weights[order])])
        side = "left" if strict else "right"
        return cw[np.searchsorted(kd, -lam, side=side)]

    nf = ~flat
    full = above(m[nf], h[nf], lev, strict=False)        # non-flat cells with m >= lam
    fl_r = above(m[flat], h[flat], lev, strict=True)
    fl_l = above(m[flat], h[flat], lev, strict=False)
    # crossing fractions: levels strictly inside (m_c, M_c)
    mc, Mc, hc = m[nf], M[nf], h[nf]
    lo = np.searchsorted(levA, mc, side="right")
    hi = np.searchsorted(levA, Mc, side="left")
    cnt = np.maximum(hi - lo, 0)
    part = np.zeros(levA.size)
    if cnt.sum():
        cell = np.repeat(np.arange(mc.size), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        idx = np.repeat(lo, cnt) + offs
        frac = hc[cell] * (Mc[cell] - levA[idx]) / (Mc[cell] - mc[cell])
        part = np.bincount(idx, weights=frac, minlength=levA.size)
    part = part[::-1]
    mu_r = full + part + fl_r
    mu_l = full + part + fl_l
    T = np.empty(2 * lev.size)
    L = np.empty(2 * lev.size)
    T[0::2], T[1::2] = mu_r, mu_l
    L[0::2], L[1::2] = lev, lev
    T = np.maximum.accumulate(T)
    return T, L


class PiecewiseLinearSource(SourceProfile):
    """Source given by knots (T, L); its running integral is exact."""

    def __init__(self, T, L):
        T = np.asarray(T, dtype=float)
        L = np.asarray(L, dtype=float)
        keep = np.concatenate([[True], np.diff(T) > 0])
        T, L = T[keep], L[keep]
        self.T, self.L = T, L
        self.f = lambda s: np.interp(s, T, L, right=0.0)
        self.grid = T[T > 0]
        seg = 0.5 * (L[1:] + L[:-1]) * np.diff(T)
        self._cumT = np.concatenate([[0.0], np.cumsum(seg)])
        slope = np.diff(L) / np.diff(T)
        self._slope = slope
        self.l2_squared = float((np.diff(T) * (L[:-1] ** 2 + L[:-1] * L[1:] + L[1:] ** 2) / 3).sum())

    def _f_masked(self, s):
        return self.f(np.asarray(s, dtype=float))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        T, L = self.T, self.L
        tt = np.clip(t, T[0], T[-1])
        i = np.clip(np.searchsorted(T, tt, side="right") - 1, 0, T.size - 2)
        d = tt - T[i]
        return self._cumT[i] + L[i] * d + 0.5 * self._slope[i] * d * d


def _profile_grid(u, m):
    x_lo, x_hi = u.x_range
    lo = math.log(u.r_scale) - 8.0
    hi = x_hi if math.isfinite(u.support) else math.log(u.r_scale) + 12.0
    x = np.linspace(max(lo, x_lo), hi, m)
    brk = [math.log(b) for b in u.breaks if x[0] < math.log(b) < x[-1]]
    x = np.unique(np.concatenate([x, brk]))
    if math.isfinite(u.support):
        x = x[:-1]   # the support end is the last node, where u and f vanish
    return np.exp(x)


def talenti_compare(u, *, m=6000, tol=1e-6):
    """Check u* <= v with v rebuilt from f** where f = -Delta_g u.

    Also records the residual of -Delta_g(v profile) against f^sharp at
    interior points (params["laplace_residual"]).
    """
    ctx = u.ctx
    r = _profile_grid(u, m)
    pw = Pointwise(u, r)
    s = pw.s
    f = -pw.lap_g
    if math.isfinite(u.support):
        s_end = ctx.sigma_n * u.support ** ctx.n
        s = np.concatenate([s, [s_end]])
        f = np.concatenate([f, [0.0]])
        uval = np.concatenate([pw.w, [0.0]])
    else:
        uval = pw.w
    if not np.any(f):
        return DeficitReport("talenti", 0.0, 0.0, params={"n": ctx.n}, tol=tol)
    Tf, Lf = linear_rearrangement(s, f)
    src = PiecewiseLinearSource(Tf, Lf)
    vprof = talenti_profile(src, ctx)
    Tu, Lu = linear_rearrangement(s, uval)
    pts = Tu[(Tu > 0) & (Tu < Tf[-1])]
    ustar = np.interp(pts, Tu, Lu, right=0.0)
    vv = vprof.v(pts)
    diff = vv - ustar
    j = int(np.argmin(diff))
    scale = float(np.max(np.abs(uval)))
    # Laplacian round trip at interior cell midpoints
    mids = np.sqrt(src.grid[1:] * src.grid[:-1])
    mids = mids[:: max(1, mids.size // 400)]
    lap = laplace_hyperbolic(vprof, mids)
    lap_res = float(np.max(np.abs(lap - src.f(mids))) / max(np.max(np.abs(Lf)), 1e-300))
    rep = DeficitReport(
        "talenti", float(vv[j]), float(ustar[j]),
        params={"n": ctx.n, "t_min": float(pts[j]), "scale": scale,
                "min_gap_over_scale": float(diff[j] / scale),
                "laplace_residual": lap_res},
        tol=tol, ref_scale=scale)
    return rep
