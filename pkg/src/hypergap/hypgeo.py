"""Hyperbolic radial geometry: sigma_n, Phi_n, its inverse F_n, ball volumes.

Phi_n(t) = n * int_0^t sinh(x)^(n-1) dx is evaluated from the exact
antiderivative (binomial expansion of sinh^(n-1) into exponentials) for
moderate and large t, and from the convergent series in y = sinh(t) near 0,
where the exponential expansion cancels badly.  Everything is carried in
log-space so large radii never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "GeometryContext",
    "RadialGeometry",
    "unit_ball_volume",
    "log_phi",
    "phi",
    "phi_derivative",
    "phi_inverse",
    "phi_inverse_log",
    "ball_volume",
    "radius_geometry",
    "volume_geometry",
    "phi_lower_bound_residual",
    "weight_rho4_table",
    "mp_phi",
    "proof_dps",
]

_SERIES_Y = 0.9
_GL_BAND = (0.9, 3.0)


def unit_ball_volume(n):
    """pi^(n/2) / Gamma(n/2 + 1)."""
    if int(n) != n or n <= 0:
        raise DomainError(f"dimension must be a positive integer, got {n!r}")
    return math.exp(0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0))


@dataclass(frozen=True)
class GeometryContext:
    """Dimension plus accuracy controls.  Immutable."""

    n: int
    tol_root: float = 1e-12
    tol_quad: float = 1e-10
    sigma_n: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise DomainError(f"GeometryContext needs an integer n >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.tol_root > 0 and self.tol_quad > 0):
            raise DomainError("tolerances must be positive")
        object.__setattr__(self, "sigma_n", unit_ball_volume(self.n))


# ---------------------------------------------------------------------------
# float kernels

def _series_coeffs(k, terms):
    # sum_j binom(-1/2, j) z^j / (k + 1 + 2j), z = y^2
    j = np.arange(terms)
    b = np.empty(terms)
    b[0] = 1.0
    for i in range(1, terms):
        b[i] = b[i - 1] * (-(2 * i - 1) / (2 * i))
    return b / (k + 1 + 2 * j)


_SERIES_TERMS = int(math.ceil(19 * math.log(10) / (-2 * math.log(_SERIES_Y)))) + 2
_coeff_cache = {}


def _log_sinh(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > 20.0
    out[big] = x[big] - math.log(2.0) + np.log1p(-np.exp(-2.0 * x[big]))
    small = ~big
    with np.errstate(divide="ignore"):
        out[small] = np.log(np.sinh(x[small]))
    return out


_SERIES_BINS = (0.02, 0.1, 0.3, 0.6, _SERIES_Y)


def _log_int_series(k, y):
    # fewer terms for small y: z^J < 1e-19 with z = y^2 at the bin edge
    c = _coeff_cache.get(k)
    if c is None:
        c = _coeff_cache[k] = _series_coeffs(k, _SERIES_TERMS)
    z = y * y
    acc = np.empty_like(z)
    lo = 0.0
    for edge in _SERIES_BINS:
        sel = (y > lo) & (y <= edge) if lo > 0 else (y <= edge)
        if sel.any():
            terms = min(c.size, int(math.ceil(19 * math.log(10) / (-2 * math.log(edge)))) + 1)
            acc[sel] = np.polynomial.polynomial.polyval(z[sel], c[:terms])
        lo = edge
    return (k + 1) * np.log(y) + np.log(acc)


def _log_int_exp(k, t):
    # int_0^t sinh^k = 2^-k sum_j C(k,j)(-1)^j int_0^t e^{(k-2j)x} dx, with e^{kt} factored out
    total = np.zeros_like(t)
    for j in range(k + 1):
        d = k - 2 * j
        if d > 0:
            h = np.exp(-2.0 * j * t) * (-np.expm1(-d * t)) / d
        elif d < 0:
            h = np.exp(-k * t) * (-np.expm1(d * t)) / (-d)
        else:
            h = t * np.exp(-k * t)
        total += (-1) ** j * math.comb(k, j) * h
    return k * t - k * math.log(2.0) + np.log(total)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


def _log_int_gl(k, t):
    # integrand is entire and t < 2 here, so a fixed rule is exact to rounding
    x = 0.5 * t[:, None] * (_GL_X[None, :] + 1.0)
    vals = np.sinh(x) ** k
    return np.log(0.5 * t * (vals @ _GL_W))


def log_phi(n, t):
    """log Phi_n(t) for t >= 0 (array friendly); -inf at t = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("Phi_n is defined for t >= 0")
    k = n - 1
    flat = np.atleast_1d(t).ravel()
    out = np.full(flat.shape, -np.inf)
    y = np.sinh(np.minimum(flat, 30.0))
    pos = flat > 0
    ser = pos & (y <= _SERIES_Y)
    if n > 12:
        band = pos & (y > _GL_BAND[0]) & (y < _GL_BAND[1])
    else:
        band = np.zeros_like(pos)
    ex = pos & ~ser & ~band
    if ser.any():
        out[ser] = _log_int_series(k, y[ser])
    if ex.any():
        out[ex] = _log_int_exp(k, flat[ex])
    if band.any():
        out[band] = _log_int_gl(k, flat[band])
    out[pos] += math.log(n)
    out = out.reshape(np.shape(t))
    return out if out.ndim else float(out)


def phi(ctx, t):
    """Phi_n(t) = n int_0^t sinh^(n-1); overflows to inf only when the value does."""
    with np.errstate(over="ignore"):
        return np.exp(log_phi(ctx.n, t))


def phi_derivative(ctx, t):
    """Phi_n'(t) = n sinh(t)^(n-1)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        return ctx.n * np.exp((ctx.n - 1) * _log_sinh(t))


def _newton_log(n, L, tol, maxiter=100):
    """Solve log Phi_n(x) = L elementwise by bracketed, safeguarded Newton."""
    L = np.asarray(L, dtype=float)
    a = np.exp(L / n)
    lo = np.arcsinh(a)                      # Phi_n <= sinh^n
    hi = np.where(np.isfinite(a), a, np.inf)  # Phi_n >= t^n
    big = L > 0
    x = np.where(big,
                 np.arcsinh(np.exp((math.log((n - 1) / n) + L) / (n - 1))),
                 a)
    x = np.clip(x, lo, hi)
    done = np.zeros(L.shape, dtype=bool)
    for it in range(maxiter):
        lp = log_phi(n, x)
        g = lp - L
        with np.errstate(over="ignore"):
            dg = np.exp(math.log(n) + (n - 1) * _log_sinh(x) - lp)
        lo = np.where(g < 0, np.maximum(lo, x), lo)
        hi = np.where(g > 0, np.minimum(hi, x), hi)
        step = g / dg
        xn = x - step
        bad = ~((xn > lo) & (xn < hi)) | ~np.isfinite(xn)
        xn = np.where(bad, np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * x), xn)
        conv = (np.abs(xn - x) <= 0.05 * tol * np.maximum(x, 1e-300)) | (g == 0)
        x = np.where(done, x, xn)
        done |= conv
        if done.all():
            return x
    raise ConvergenceError(
        "phi_inverse did not converge",
        iterations=maxiter,
        worst_residual=float(np.max(np.abs(log_phi(n, x) - L))),
    )


def phi_inverse_log(ctx, log_ratio):
    """F with log Phi_n(F) = log_ratio, i.e. F_n(sigma_n * exp(log_ratio))."""
    L = np.asarray(log_ratio, dtype=float)
    out = np.zeros(L.shape)
    fin = np.isfinite(L)
    if np.any(L[~fin] > 0):
        raise DomainError("infinite volume")
    if fin.any():
        out[fin] = _newton_log(ctx.n, L[fin], ctx.tol_root)
    return out if out.ndim else float(out)


def phi_inverse(ctx, s):
    """F_n(s): the geodesic radius of the ball of hyperbolic volume s."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("volume coordinate must be >= 0")
    with np.errstate(divide="ignore"):
        L = np.log(s) - math.log(ctx.sigma_n)
    return phi_inverse_log(ctx, L)


def ball_volume(ctx, r):
    """Hyperbolic volume of a geodesic ball of radius r."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be >= 0")
    out = ctx.sigma_n * phi(ctx, r)
    return out if np.ndim(out) else float(out)


class RadialGeometry(NamedTuple):
    """Geometry at Euclidean radius r = (s/sigma_n)^(1/n)."""

    r: np.ndarray
    F: np.ndarray        # geodesic radius
    log_sinh: np.ndarray
    coth: np.ndarray
    k: np.ndarray        # dr / d rho = (sinh F / r)^(n-1)


def radius_geometry(ctx, r):
    """Geodesic data for the point whose volume coordinate is sigma_n r^n."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius_geometry needs r > 0")
    F = phi_inverse_log(ctx, ctx.n * np.log(r))
    F = np.asarray(F, dtype=float)
    ls = _log_sinh(F)
    coth = 1.0 / np.tanh(F)
    with np.errstate(over="ignore"):
        k = np.exp((ctx.n - 1) * (ls - np.log(r)))
    return RadialGeometry(r, F, ls, coth, k)


def volume_geometry(ctx, s):
    """radius_geometry at volume coordinate s > 0."""
    s = np.asarray(s, dtype=float)
    return radius_geometry(ctx, (s / ctx.sigma_n) ** (1.0 / ctx.n))


# ---------------------------------------------------------------------------
# multiprecision helpers (sign-critical quantities cancel in double precision)

def mp_phi(n, t):
    """Phi_n(t) in the current mpmath precision from the exact antiderivative."""
    t = mpmath.mpf(t)
    if t == 0:
        return mpmath.mpf(0)
    k = n - 1
    # e^(dt) - 1 = (1+x)^d - 1 = sum_j C(d,j) x^j with x = expm1(t): one
    # transcendental call and no cancellation for d > 0
    x = mpmath.expm1(t)
    xp = [mpmath.mpf(1)]
    for _ in range(k):
        xp.append(xp[-1] * x)
    grow = [mpmath.mpf(0)] + [mpmath.fsum(math.comb(d, j) * xp[j] for j in range(1, d + 1))
                              for d in range(1, k + 1)]
    total = mpmath.mpf(0)
    for j in range(k + 1):
        d = k - 2 * j
        if d == 0:
            g = t
        elif d > 0:
            g = grow[d] / d
        else:
            g = grow[-d] / (grow[-d] + 1) / -d
        total += (-1) ** j * math.comb(k, j) * g
    return n * total / mpmath.mpf(2) ** k


def proof_dps(n, t):
    """Working precision that survives the cancellations in G, H, J, K at t."""
    t = float(t)
    small = max(0.0, -math.log10(t)) if t > 0 else 0.0
    return int(40 + 2 * n * small + 2 * t)


def phi_lower_bound_residual(ctx, t):
    """int_0^t sinh^(n-1) minus the rational lower bound (this is K_n(t))."""
    n = ctx.n
    if n < 4:
        raise DomainError("the lower bound is stated for n >= 4")
    t = float(t)
    if t <= 0:
        raise DomainError("t must be positive")
    with mpmath.workdps(proof_dps(n, t)):
        return float(mp_K(n, mpmath.mpf(t)))


def mp_K(n, t, phi_value=None):
    S = mpmath.sinh(t)
    C = mpmath.cosh(t)
    s = S * S
    Q = (n - 1) * (n - 3) * s * s + 2 * n * (n - 1) * s + n * (n + 2)
    P = mp_phi(n, t) if phi_value is None else phi_value
    return P / n - S ** n * C * ((n - 3) * s + n + 2) / Q


def weight_rho4_table(ctx, s):
    """W(x) * rho(x)^4 with W = (V/sigma_n)^(-4/n), tabulated on volumes s.

    Only a tabulation: no inequality between W and rho^-4 is asserted here.
    """
    s = np.asarray(s, dtype=float)
    F = np.asarray(phi_inverse(ctx, s))
    return (s / ctx.sigma_n) ** (-4.0 / ctx.n) * F ** 4
