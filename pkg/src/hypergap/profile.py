"""Radial profiles and their integral functionals.

A radial function u on H^n is u(x) = v(s) with s the hyperbolic volume of
the geodesic ball through x; its Euclidean partner is u_e(y) = v(sigma_n|y|^n).
Internally a profile is carried as w(r) = v(sigma_n r^n), with r the
Euclidean radius of the partner point, because smooth u give smooth w while
v itself behaves like s^(2/n) at the origin.  Every integral over s becomes
an integral over x = log r with ds = n sigma_n r^n dx.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import DomainError, ExtrapolationError, IntegrabilityError
from .hypgeo import GeometryContext, radius_geometry
from .quadrature import adaptive_gk, integrate_log

__all__ = [
    "DecayClass",
    "RadialProfile",
    "SourceProfile",
    "laplace_hyperbolic",
    "laplace_euclidean",
    "energy_hyp",
    "energy_euc",
    "lp_norm",
    "weighted_l2",
    "inner_product_laplace",
    "gradient_sq_hyp",
    "talenti_profile",
    "integrate_profile",
]

_DECAY_KINDS = ("compact_support", "polynomial_decay", "exponential_decay")


@dataclass(frozen=True)
class DecayClass:
    """Behaviour at infinity: v(s) ~ s^-rate or exp(-rate s), or compact support."""

    kind: str = "compact_support"
    rate: float | None = None

    def __post_init__(self):
        if self.kind not in _DECAY_KINDS:
            raise DomainError(f"unknown decay class {self.kind!r}")
        if self.kind != "compact_support" and not (self.rate and self.rate > 0):
            raise DomainError(f"{self.kind} needs a positive rate")

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate}

    @classmethod
    def from_obj(cls, obj):
        if isinstance(obj, DecayClass):
            return obj
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["kind"], obj.get("rate"))


COMPACT = DecayClass("compact_support")


class RadialProfile:
    """Immutable radial profile.

    Parameters
    ----------
    ctx : GeometryContext
    w, dw, d2w : vectorised callables of the Euclidean radius r > 0
    support : radius beyond which the profile vanishes identically (inf if none)
    breaks : radii where w'' may jump; quadrature panels are split there
    r_scale : characteristic radius, used to place truncation points
    """

    def __init__(self, ctx, w, dw, d2w, *, support=math.inf, breaks=(),
                 r_scale=1.0, decay=None, name="", grid=None):
        if not isinstance(ctx, GeometryContext):
            raise DomainError("ctx must be a GeometryContext")
        self.ctx = ctx
        self._w, self._dw, self._d2w = w, dw, d2w
        self.support = float(support)
        self.breaks = tuple(sorted(float(b) for b in breaks if 0 < b < self.support))
        self.r_scale = float(r_scale)
        if decay is None:
            decay = COMPACT if math.isfinite(self.support) else DecayClass("polynomial_decay", 1.0)
        self.decay = DecayClass.from_obj(decay)
        if self.decay.kind == "compact_support" and not math.isfinite(self.support):
            raise DomainError("compact_support needs a finite support radius")
        self.name = name
        self._grid = None if grid is None else np.asarray(grid, dtype=float)

    # ---- pointwise -------------------------------------------------------
    def _mask(self, r, fn):
        r = np.asarray(r, dtype=float)
        if math.isfinite(self.support):
            out = np.zeros(r.shape)
            inside = r < self.support
            if inside.any():
                out[inside] = fn(r[inside])
            return out
        return np.asarray(fn(r), dtype=float) * np.ones(r.shape)

    def w(self, r):
        return self._mask(r, self._w)

    def dw(self, r):
        return self._mask(r, self._dw)

    def d2w(self, r):
        return self._mask(r, self._d2w)

    def radius(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ExtrapolationError("profile evaluated outside (0, inf)")
        return (s / self.ctx.sigma_n) ** (1.0 / self.ctx.n)

    def v(self, s):
        return _scalar(self.w(self.radius(s)), s)

    def dv(self, s):
        r = self.radius(s)
        return _scalar(self.dw(r) * r / (self.ctx.n * np.asarray(s)), s)

    def d2v(self, s):
        n = self.ctx.n
        s_arr = np.asarray(s, dtype=float)
        r = self.radius(s_arr)
        val = (r / (n * s_arr)) ** 2 * (self.d2w(r) + (1 - n) * self.dw(r) / r)
        return _scalar(val, s)

    def __call__(self, s):
        return self.v(s)

    # ---- grids -------------------------------------------------------------
    @property
    def grid(self):
        """Sample grid in s (log-spaced by default) used for serialisation."""
        if self._grid is not None:
            return self._grid
        hi = self.support if math.isfinite(self.support) else self.r_scale * 1e3
        r = np.geomspace(self.r_scale * 1e-3, hi, 401)
        return self.ctx.sigma_n * r ** self.ctx.n

    @property
    def x_range(self):
        lo = math.log(self.r_scale) - 30.0
        if math.isfinite(self.support):
            return lo, math.log(self.support)
        return lo, math.log(self.r_scale) + 40.0

    # ---- transforms -------------------------------------------------------
    def scaled(self, c):
        """The profile c * v."""
        c = float(c)
        return RadialProfile(
            self.ctx, lambda r: c * self._w(r), lambda r: c * self._dw(r),
            lambda r: c * self._d2w(r), support=self.support, breaks=self.breaks,
            r_scale=self.r_scale, decay=self.decay, name=self.name, grid=self._grid)

    def with_context(self, ctx):
        """Same w(r) read in another dimension (only meaningful for r-defined profiles)."""
        return RadialProfile(ctx, self._w, self._dw, self._d2w, support=self.support,
                             breaks=self.breaks, r_scale=self.r_scale, decay=self.decay,
                             name=self.name, grid=None)

    # ---- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, ctx):
        z = lambda r: np.zeros(np.shape(r))
        return cls(ctx, z, z, z, support=1.0, name="zero")

    @classmethod
    def from_volume_functions(cls, ctx, v, dv, d2v, **kw):
        """Build from v(s), v'(s), v''(s)."""
        n, sig = ctx.n, ctx.sigma_n

        def w(r):
            return v(sig * r ** n)

        def dw(r):
            return dv(sig * r ** n) * n * sig * r ** (n - 1)

        def d2w(r):
            s = sig * r ** n
            return d2v(s) * (n * sig * r ** (n - 1)) ** 2 + dv(s) * n * (n - 1) * sig * r ** (n - 2)

        if "support" in kw and kw["support"] is not None:
            kw["support"] = (kw["support"] / sig) ** (1.0 / n)
        if "breaks" in kw:
            kw["breaks"] = [(b / sig) ** (1.0 / n) for b in kw["breaks"]]
        return cls(ctx, w, dw, d2w, **kw)

    @classmethod
    def from_geodesic(cls, ctx, h, dh, d2h, *, support_rho=math.inf, breaks_rho=(), **kw):
        """Build from u = h(rho) given as a function of geodesic distance."""
        n = ctx.n

        def parts(r):
            g = radius_geometry(ctx, r)
            return g.F, g.k, g.coth

        def w(r):
            return h(parts(r)[0])

        def dw(r):
            F, k, _ = parts(r)
            return dh(F) / k

        def d2w(r):
            F, k, coth = parts(r)
            rho2 = -(n - 1) * (coth / k ** 2 - 1.0 / (np.asarray(r) * k))
            return d2h(F) / k ** 2 + dh(F) * rho2

        from .hypgeo import phi
        to_r = lambda rho: float(phi(ctx, rho)) ** (1.0 / n)
        support = to_r(support_rho) if math.isfinite(support_rho) else math.inf
        breaks = [to_r(b) for b in breaks_rho]
        return cls(ctx, w, dw, d2w, support=support, breaks=breaks, **kw)

    @classmethod
    def from_samples(cls, ctx, grid, values, decay="compact_support", *, degree=5, name=""):
        """Interpolating spline through (s_i, v_i).

        The spline lives in r and is mirrored to negative r, so it is even and
        w'(0) = 0.  Its end conditions match the declared decay: w' = w'' = 0
        for compact support, and the value/slope/curvature of the tail model
        otherwise, which keeps the continuation C^2.
        """
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < degree + 1:
            raise DomainError("grid and values must be 1-D of equal length > degree")
        if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise DomainError("grid must be strictly increasing and positive")
        if not np.all(np.isfinite(values)):
            raise DomainError("values must be finite")
        if degree not in (3, 5):
            raise DomainError("degree must be 3 or 5")
        decay = DecayClass.from_obj(decay)
        n, sig = ctx.n, ctx.sigma_n
        r = (grid / sig) ** (1.0 / n)
        rN, vN = r[-1], values[-1]
        sN = grid[-1]
        if decay.kind == "compact_support":
            d1 = d2 = 0.0
        elif decay.kind == "polynomial_decay":
            q = n * decay.rate               # w ~ r^-q
            d1 = -q * vN / rN
            d2 = q * (q + 1) * vN / rN ** 2
        else:
            a = decay.rate
            dv_ = -a * vN
            d2v_ = a * a * vN
            d1 = dv_ * n * sig * rN ** (n - 1)
            d2 = d2v_ * (n * sig * rN ** (n - 1)) ** 2 + dv_ * n * (n - 1) * sig * rN ** (n - 2)
        xs = np.concatenate([-r[::-1], r])
        ys = np.concatenate([values[::-1], values])
        if degree == 5:
            bc = ([(1, -d1), (2, d2)], [(1, d1), (2, d2)])
        else:
            bc = ([(1, -d1)], [(1, d1)])
        spl = make_interp_spline(xs, ys, k=degree, bc_type=bc)
        dspl, d2spl = spl.derivative(1), spl.derivative(2)

        if decay.kind == "compact_support":
            return cls(ctx, spl, dspl, d2spl, support=rN, breaks=r, r_scale=float(np.median(r)),
                       decay=decay, name=name, grid=grid)

        def tail_w(rr):
            if decay.kind == "polynomial_decay":
                q = n * decay.rate
                return vN * (rr / rN) ** (-q), -q * vN * (rr / rN) ** (-q) / rr, \
                    q * (q + 1) * vN * (rr / rN) ** (-q) / rr ** 2
            a = decay.rate
            s = sig * rr ** n
            v0 = vN * np.exp(-a * (s - sN))
            dv0, d2v0 = -a * v0, a * a * v0
            return v0, dv0 * n * sig * rr ** (n - 1), \
                d2v0 * (n * sig * rr ** (n - 1)) ** 2 + dv0 * n * (n - 1) * sig * rr ** (n - 2)

        def piece(i):
            fs = (spl, dspl, d2spl)[i]

            def f(rr):
                rr = np.asarray(rr, dtype=float)
                out = np.empty(rr.shape)
                inner = rr <= rN
                out[inner] = fs(rr[inner])
                if (~inner).any():
                    out[~inner] = tail_w(rr[~inner])[i]
                return out
            return f

        return cls(ctx, piece(0), piece(1), piece(2), breaks=r, r_scale=float(np.median(r)),
                   decay=decay, name=name, grid=grid)

    # ---- serialisation ----------------------------------------------------
    def to_dict(self):
        g = self.grid
        return {"format": 1, "n": self.ctx.n, "grid": [float(x) for x in g],
                "values": [float(x) for x in np.asarray(self.v(g))],
                "decay_class": self.decay.to_dict()}

    def to_json(self):
        from .report import dumps
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d, ctx=None):
        if d.get("format") != 1:
            raise DomainError(f"unsupported profile format {d.get('format')!r}")
        if ctx is None:
            ctx = GeometryContext(int(d["n"]))
        elif ctx.n != int(d["n"]):
            raise DomainError("dimension mismatch between document and context")
        return cls.from_samples(ctx, d["grid"], d["values"], d["decay_class"])

    @classmethod
    def from_json(cls, text, ctx=None):
        return cls.from_dict(json.loads(text), ctx)

    def __repr__(self):
        return f"RadialProfile(n={self.ctx.n}, name={self.name!r}, decay={self.decay.kind})"


def _scalar(val, like):
    val = np.asarray(val, dtype=float)
    return float(val) if np.ndim(like) == 0 else val


# ---------------------------------------------------------------------------
# pointwise operators

class Pointwise:
    """Profile data and geometry at a set of radii (computed lazily)."""

    def __init__(self, p, r):
        self.p = p
        self.ctx = p.ctx
        self.n = p.ctx.n
        self.r = np.asarray(r, dtype=float)
        self.w = p.w(self.r)
        self.dw = p.dw(self.r)
        self.d2w = p.d2w(self.r)

    @cached_property
    def geom(self):
        return radius_geometry(self.ctx, self.r)

    @cached_property
    def s(self):
        return self.ctx.sigma_n * self.r ** self.n

    @cached_property
    def jac(self):
        """ds/dx for x = log r."""
        return self.n * self.ctx.sigma_n * self.r ** self.n

    @cached_property
    def lap_e(self):
        return self.d2w + (self.n - 1) * self.dw / self.r

    @cached_property
    def lap_g(self):
        g = self.geom
        k = g.k
        return k * k * (self.d2w - (self.n - 1) * self.dw / self.r) \
            + 2 * (self.n - 1) * g.coth * k * self.dw

    @cached_property
    def grad_g(self):
        return self.geom.k * self.dw

    @cached_property
    def dv(self):
        return self.dw * self.r / (self.n * self.s)

    @cached_property
    def d2v(self):
        return (self.r / (self.n * self.s)) ** 2 * (self.d2w + (1 - self.n) * self.dw / self.r)


def integrate_profile(p, integrand, *, tol=None, lower_tail=True):
    """int_0^inf integrand(Pointwise) ds as a QuadResult."""
    tol = p.ctx.tol_quad if tol is None else tol
    x_lo, x_hi = p.x_range

    def f(x):
        pw = Pointwise(p, np.exp(x))
        return integrand(pw) * pw.jac

    width = x_hi - x_lo
    panels = np.linspace(x_lo, x_hi, max(2, int(math.ceil(width / 0.5)) + 1))
    breaks = list(panels) + [math.log(b) for b in p.breaks]
    breaks = [b for b in breaks if x_lo <= b <= x_hi]
    upper = not math.isfinite(p.support)
    return integrate_log(f, x_lo, x_hi, breaks=breaks, lower_tail=lower_tail,
                         upper_tail=upper, tol=tol)


def _ret(res, full_output):
    return (res.value, res.error) if full_output else res.value


def laplace_hyperbolic(p, s):
    """-Delta_g u at volume coordinate s."""
    pw = Pointwise(p, p.radius(s))
    return _scalar(-pw.lap_g, s)


def laplace_euclidean(p, s):
    """-Delta u_e at volume coordinate s."""
    pw = Pointwise(p, p.radius(s))
    return _scalar(-pw.lap_e, s)


def energy_hyp(p, *, full_output=False):
    """int_{H^n} (Delta_g u)^2 dV_g."""
    return _ret(integrate_profile(p, lambda q: q.lap_g ** 2), full_output)


def energy_euc(p, *, full_output=False):
    """int_{R^n} (Delta u_e)^2 dy."""
    return _ret(integrate_profile(p, lambda q: q.lap_e ** 2), full_output)


def lp_norm(p, q, *, full_output=False):
    """(int |v|^q ds)^(1/q); identical on H^n and R^n."""
    if q < 1:
        raise DomainError("lp_norm needs q >= 1")
    res = integrate_profile(p, lambda pt: np.abs(pt.w) ** q)
    val = res.value ** (1.0 / q) if res.value > 0 else 0.0
    if full_output:
        err = val * res.error / (q * res.value) if res.value > 0 else res.error
        return val, err
    return val


def weighted_l2(p, a, *, full_output=False):
    """int v(s)^2 (s/sigma_n)^(-a) ds."""
    n = p.ctx.n
    if a < 0 or a > 4.0 / n + 1e-15:
        raise DomainError("weight exponent must lie in [0, 4/n]")
    try:
        res = integrate_profile(p, lambda pt: pt.w ** 2 * pt.r ** (-n * a))
    except IntegrabilityError as exc:
        raise IntegrabilityError(f"v^2 s^-{a:g} is not integrable at 0: {exc}") from exc
    return _ret(res, full_output)


def inner_product_laplace(p, *, full_output=False):
    """int (Delta_g u) u dV_g."""
    return _ret(integrate_profile(p, lambda q: q.lap_g * q.w), full_output)


def gradient_sq_hyp(p, *, full_output=False):
    """int |grad_g u|^2 dV_g."""
    return _ret(integrate_profile(p, lambda q: q.grad_g ** 2), full_output)


# ---------------------------------------------------------------------------
# Talenti reconstruction

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class SourceProfile:
    """Laplacian datum f(s) on [0, inf), zero beyond the last grid point.

    `grid` must contain every point where f fails to be smooth; between grid
    points f is integrated with a 20-point Gauss-Legendre rule.
    """

    def __init__(self, f, grid):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise DomainError("grid must be strictly increasing and positive")
        self.f = f
        self.grid = grid
        nodes = np.concatenate([[0.0], grid])
        a, b = nodes[:-1], nodes[1:]
        x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X[None, :]
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(fx)):
            raise IntegrabilityError("source is not finite on its grid")
        cells = 0.5 * (b - a) * (fx @ _GL_W)
        self._nodes = nodes
        self._cum = np.concatenate([[0.0], np.cumsum(cells)])
        sq = 0.5 * (b - a) * ((fx ** 2) @ _GL_W)
        self.l2_squared = float(sq.sum())

    def _f_masked(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        inside = s <= self.grid[-1]
        out[inside] = self.f(s[inside])
        return out

    def integral(self, t):
        """int_0^t f."""
        t = np.asarray(t, dtype=float)
        tt = np.minimum(t, self.grid[-1])
        i = np.clip(np.searchsorted(self._nodes, tt, side="right") - 1, 0, self._nodes.size - 2)
        a = self._nodes[i]
        x = a[..., None] + 0.5 * (tt - a)[..., None] * (_GL_X + 1.0)
        part = 0.5 * (tt - a) * (np.asarray(self.f(x.ravel())).reshape(x.shape) @ _GL_W)
        return self._cum[i] + part

    def fbar(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.integral(t) / t
        return np.where(t > 0, out, self._f_masked(np.maximum(t, 1e-300)))


def _density(ctx, s):
    """(n sigma_n sinh(F_n(s))^(n-1))^2 and its s-derivative."""
    n, sig = ctx.n, ctx.sigma_n
    s = np.asarray(s, dtype=float)
    g = radius_geometry(ctx, (s / sig) ** (1.0 / n))
    sh = np.exp(g.log_sinh)
    D = (n * sig) ** 2 * sh ** (2 * n - 2)
    dD = n * sig * (2 * n - 2) * sh ** (n - 2) * np.cosh(g.F)
    return D, dD


def talenti_profile(src, ctx):
    """v(t) = int_t^inf s fbar(s) / (n sigma_n sinh(F_n(s))^(n-1))^2 ds."""
    grid = src.grid
    n = ctx.n

    def integrand_s(s):
        D, _ = _density(ctx, s)
        return src.integral(s) / D

    # cell integrals in log s (the integrand behaves like s^(2/n - 1) at 0)
    lg = np.log(grid)
    a, b = lg[:-1], lg[1:]
    cells = _gl_log(integrand_s, a, b)
    yN = lg[-1]
    tail = adaptive_gk(lambda yy: integrand_s(np.exp(yy)) * np.exp(yy),
                       [yN, yN + 5, yN + 20, yN + 60], tol=1e-12)
    # beyond yN+60 the integrand is ~exp(-y): closed-form remainder
    end = float(integrand_s(np.exp(np.array([yN + 60.0])))[0] * math.exp(yN + 60.0))
    v_end = tail.value + end
    v_nodes = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) + v_end

    def v(s):
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        beyond = s >= grid[-1]
        if beyond.any():
            out[beyond] = [_tail_from(integrand_s, float(x), yN, v_end) for x in s[beyond]]
        mid = ~beyond & (s >= grid[0])
        if mid.any():
            sm = s[mid]
            i = np.clip(np.searchsorted(grid, sm, side="right") - 1, 0, grid.size - 2)
            out[mid] = v_nodes[i + 1] + _gl_log(integrand_s, np.log(sm), lg[i + 1])
        low = s < grid[0]
        if low.any():
            sl = s[low]
            out[low] = v_nodes[0] + _gl_log(integrand_s, np.log(sl), np.full(sl.shape, lg[0]))
        return out

    def dv(s):
        return -integrand_s(s)

    def d2v(s):
        s = np.asarray(s, dtype=float)
        D, dD = _density(ctx, s)
        return -src._f_masked(s) / D + src.integral(s) * dD / D ** 2

    r_scale = float((np.median(grid) / ctx.sigma_n) ** (1.0 / n))
    return RadialProfile.from_volume_functions(
        ctx, v, dv, d2v, breaks=list(grid), r_scale=r_scale,
        decay=DecayClass("polynomial_decay", 1.0), name="talenti", grid=grid)


_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _gl_log(g, ya, yb):
    """int_{e^ya}^{e^yb} g(s) ds by 8-point Gauss-Legendre in log s (within one cell)."""
    ya = np.asarray(ya, dtype=float)
    yb = np.asarray(yb, dtype=float)
    y = 0.5 * (ya + yb)[..., None] + 0.5 * (yb - ya)[..., None] * _GL8_X
    ey = np.exp(y)
    vals = np.asarray(g(ey.ravel())).reshape(y.shape) * ey
    return 0.5 * (yb - ya) * (vals @ _GL8_W)


def _tail_from(g, s, yN, v_end):
    # v(s) for s past the last grid point: v_end minus the piece on [s_N, s]
    return v_end - float(adaptive_gk(lambda yy: g(np.exp(yy)) * np.exp(yy),
                                     [yN, math.log(s)], tol=1e-12).value)
