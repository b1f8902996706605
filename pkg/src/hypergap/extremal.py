"""Test families, concentration scans and a derivative-free ratio optimiser."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .deficit import (
    SharpConstants,
    _E_h,
    _L2,
    _Lq,
    _W,
    adams_exact_ratio,
    sobolev_sharp_constant,
)
from .errors import ConvergenceError, DomainError, IntegrabilityError
from .hypgeo import GeometryContext
from .profile import DecayClass, RadialProfile
from .report import csv_text, dumps

__all__ = [
    "ScanResult",
    "smoothstep",
    "make_bubble",
    "rellich_powerlaw",
    "poincare_spreading",
    "adams_sequence",
    "adams_sequence_data",
    "sobolev_sharpness_scan",
    "rellich_sharpness_scan",
    "adams_sharpness_scan",
    "optimize_ratio",
    "OptimizeResult",
]


# ---------------------------------------------------------------------------
# smooth cut-offs

def smoothstep(x):
    """C^2 quintic step: 0 for x <= 0, 1 for x >= 1; returns (S, S', S'')."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    S = x ** 3 * (10 - 15 * x + 6 * x * x)
    dS = 30 * x * x * (1 - x) ** 2
    d2S = 60 * x * (1 - x) * (1 - 2 * x)
    return S, dS, d2S


def _log_cutoff(R, width):
    """chi(r) = 1 - smoothstep((log r - log R + width)/width), with r-derivatives."""
    lR = math.log(R)

    def chi(r):
        x = (np.log(r) - lR + width) / width
        S, dS, d2S = smoothstep(x)
        c = 1 - S
        dc = -dS / (width * r)
        d2c = -(d2S / width ** 2 - dS / width) / (r * r)
        return c, dc, d2c

    return chi


def _times(f, chi):
    """Product rule for (w, w', w'') triples."""
    def parts(r):
        w, dw, d2w = f(r)
        c, dc, d2c = chi(r)
        return w * c, dw * c + w * dc, d2w * c + 2 * dw * dc + w * d2c
    return parts


def _profile_from_parts(ctx, parts, **kw):
    return RadialProfile(ctx, lambda r: parts(r)[0], lambda r: parts(r)[1],
                         lambda r: parts(r)[2], **kw)


# ---------------------------------------------------------------------------
# families

def make_bubble(n, scale=1.0, cutoff=None, cutoff_width=2.0):
    """The Euclidean bubble (1 + |y/scale|^2)^(-(n-4)/2) in the volume coordinate.

    With cutoff=R the profile is multiplied by a C^2 cut-off in log r that
    ends at r = R (width cutoff_width in log r); this makes it admissible on
    H^n, where the bare bubble is not square integrable for n <= 8.
    """
    if n < 5:
        raise DomainError("the bubble needs n >= 5")
    if not scale > 0:
        raise DomainError("scale must be positive")
    ctx = GeometryContext(n)
    a = 0.5 * (n - 4)
    sc = float(scale)

    def parts(r):
        r = np.asarray(r, dtype=float)
        q = 1 + (r / sc) ** 2
        w = q ** -a
        dw = -2 * a * r / sc ** 2 * q ** (-a - 1)
        d2w = -2 * a / sc ** 2 * q ** (-a - 1) + 4 * a * (a + 1) * r * r / sc ** 4 * q ** (-a - 2)
        return w, dw, d2w

    name = f"bubble(n={n},scale={sc:.6g})"
    if cutoff is None:
        return _profile_from_parts(ctx, parts, r_scale=sc, name=name,
                                   decay=DecayClass("polynomial_decay", (n - 4) / n))
    R = float(cutoff)
    chi = _log_cutoff(R, cutoff_width)
    brk = [R * math.exp(-cutoff_width)]
    return _profile_from_parts(ctx, _times(parts, chi), support=R, breaks=brk, r_scale=sc,
                               name=name + f"*cut({R:.6g})")


def _cubic_step(x):
    """C^1 cubic step 3x^2 - 2x^3 with (S, S', S''); S'' is piecewise."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x), 6 * x * (1 - x), np.where(inside, 6 - 12 * x, 0.0)


def _log_cutoff_c1(R, width):
    lR = math.log(R)

    def chi(r):
        S, dS, d2S = _cubic_step((np.log(r) - lR + width) / width)
        return 1 - S, -dS / (width * r), -(d2S / width ** 2 - dS / width) / (r * r)

    return chi


def rellich_powerlaw(n, inner_cut, outer_cut=0.5, width=1.65, phase=0.7, offset=-0.33):
    """Truncated r^(-(n-4)/2) with a slowly varying log-amplitude.

    On [inner_cut, outer_cut] the profile is r^(-p) cos(k t - phase) with
    t = log(r / inner_cut), p = (n-4)/2 the Rellich-critical exponent and k
    chosen so the cosine vanishes at log(outer_cut) + offset.  Below inner_cut
    it is the even quartic matching value, slope and curvature; a C^1 cut-off
    of log-width `width` ends the support at outer_cut.  A plain plateau
    amplitude pays a fixed boundary cost at the inner cap; the cosine
    amplitude spreads that cost over the whole log range.
    """
    if n < 5:
        raise DomainError("the Rellich family needs n >= 5")
    eps, R = float(inner_cut), float(outer_cut)
    if not 0 < eps < R * math.exp(-width):
        raise DomainError("inner cut must lie inside the cut-off region")
    ctx = GeometryContext(n)
    p = 0.5 * (n - 4)
    k = (0.5 * math.pi + phase) / (math.log(R / eps) + offset)
    le = math.log(eps)

    def core(r):
        r = np.asarray(r, dtype=float)
        inner = r <= eps
        rr = np.where(inner, eps, r)
        a = k * (np.log(rr) - le) - phase
        f, df, d2f = np.cos(a), -k * np.sin(a), -k * k * np.cos(a)
        w = rr ** -p * f
        dw = rr ** (-p - 1) * (df - p * f)
        d2w = rr ** (-p - 2) * (d2f - (2 * p + 1) * df + p * (p + 1) * f)
        C = (d2w - dw / rr) / (8 * rr * rr)
        B = (dw - 4 * C * rr ** 3) / (2 * rr)
        A = w - B * rr * rr - C * rr ** 4
        return (np.where(inner, A + B * r * r + C * r ** 4, w),
                np.where(inner, 2 * B * r + 4 * C * r ** 3, dw),
                np.where(inner, 2 * B + 12 * C * r * r, d2w))

    chi = _log_cutoff_c1(R, width)
    return _profile_from_parts(ctx, _times(core, chi), support=R,
                               breaks=[eps, R * math.exp(-width)], r_scale=eps,
                               name=f"rellich_powerlaw(n={n},span={R / eps:.6g})")


def poincare_spreading(n, width):
    """exp(-rho^2 / width^2) style bump spread over geodesic radius ~ width."""
    ctx = GeometryContext(n)
    w2 = float(width) ** 2
    h = lambda rho: np.exp(-rho * rho / w2)
    dh = lambda rho: -2 * rho / w2 * np.exp(-rho * rho / w2)
    d2h = lambda rho: (4 * rho * rho / w2 - 2) / w2 * np.exp(-rho * rho / w2)
    # beyond 12 widths the profile is below 1e-60: treat as compact
    return RadialProfile.from_geodesic(ctx, h, dh, d2h, support_rho=12.0 * float(width),
                                       r_scale=1.0, name=f"spreading(n={n},width={width:.6g})")


# ---------------------------------------------------------------------------
# Adams test sequence

def _u_m_parts(m):
    """u_m(x), u_m', u_m'' as functions of |x| (the Euclidean sequence)."""
    L = math.log(m)
    A0 = math.sqrt(L / (32 * math.pi ** 2))
    B0 = math.sqrt(1.0 / (8 * math.pi ** 2 * L))
    K = math.sqrt(1.0 / (2 * math.pi ** 2 * L))
    a = m ** -0.25
    sm = math.sqrt(m)

    def f(x):
        x = np.asarray(x, dtype=float)
        u = np.zeros(x.shape)
        du = np.zeros(x.shape)
        d2u = np.zeros(x.shape)
        c = x <= a
        u[c] = A0 + B0 * (1 - sm * x[c] ** 2)
        du[c] = -2 * B0 * sm * x[c]
        d2u[c] = -2 * B0 * sm
        g = (x > a) & (x <= 1)
        u[g] = -K * np.log(x[g])
        du[g] = -K / x[g]
        d2u[g] = K / x[g] ** 2
        e = (x > 1) & (x < 2)
        y = x[e]
        # cap eta(x) = -(x-1)(2-x)^3: eta(1) = 0, eta'(1) = -1, C^2 zero at x = 2
        u[e] = K * (-(y - 1) * (2 - y) ** 3)
        du[e] = K * (-(2 - y) ** 3 + 3 * (y - 1) * (2 - y) ** 2)
        d2u[e] = K * (6 * (2 - y) ** 2 - 6 * (y - 1) * (2 - y))
        return u, du, d2u

    return f, a


def _bar_u_m(m):
    """The rescaled u_m(3x) on H^4 through the ball model, |x| = tanh(rho/2)."""
    ctx = GeometryContext(4)
    f, a = _u_m_parts(m)

    def hparts(rho):
        rho = np.asarray(rho, dtype=float)
        th = np.tanh(0.5 * rho)
        sech2 = 1 - th * th
        x = 3 * th
        u, du, d2u = f(x)
        dx = 1.5 * sech2
        d2x = -1.5 * sech2 * th
        return u, du * dx, d2u * dx * dx + du * d2x

    to_rho = lambda x: 2 * math.atanh(x / 3.0)
    rho_a = to_rho(a)
    r_scale = rho_a  # near the origin the partner radius and rho agree
    return RadialProfile.from_geodesic(
        ctx, lambda t: hparts(t)[0], lambda t: hparts(t)[1], lambda t: hparts(t)[2],
        support_rho=to_rho(2.0), breaks_rho=[rho_a, to_rho(1.0)], r_scale=r_scale,
        name=f"adams_u_bar(m={m:.6g})")


def adams_sequence_data(m):
    """(w_m, c_m, constraint of u_bar pieces) for the Adams sharpness sequence."""
    if m < 10:
        raise DomainError("the Adams sequence needs m >= 10")
    ub = _bar_u_m(m)
    E, _ = _E_h(ub)
    L, _ = _L2(ub)
    val = E - SharpConstants.adams_threshold * L
    if not val > 0:
        raise ConvergenceError("normalisation of the Adams sequence failed", value=val)
    # the constraint is quadratic in c, so the root is explicit
    c = 1.0 / math.sqrt(val)
    w = ub.scaled(c)
    w.name = f"adams_w(m={m:.6g})"
    cache = w.__dict__.setdefault("_functionals", {})
    cache["E_h"] = (c * c * E, c * c * _E_h(ub)[1])
    cache["L2"] = (c * c * L, c * c * _L2(ub)[1])
    return w, c, {"energy": E, "l2": L, "constraint_unscaled": val}


def adams_sequence(m):
    """w_m = c_m * u_bar_m with int (Delta_g w)^2 - 81/16 int w^2 = 1."""
    return adams_sequence_data(m)[0]


# ---------------------------------------------------------------------------
# scans

@dataclass
class ScanResult:
    kind: str
    params: list
    ratios: list
    target: float | None = None
    statuses: list = field(default_factory=list)
    trend: dict = field(default_factory=dict)
    param_name: str = "param"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) != len(self.ratios):
            raise DomainError("grid and ratios must have equal length")

    def to_dict(self):
        return {"kind": self.kind, "param_name": self.param_name,
                "params": [float(x) for x in self.params],
                "ratios": [float(x) for x in self.ratios], "target": self.target,
                "statuses": list(self.statuses), "trend": self.trend, "extra": self.extra}

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        rows = [{"param": float(p), "ratio": float(r), "status": s}
                for p, r, s in zip(self.params, self.ratios, self.statuses)]
        return csv_text(rows, ["param", "ratio", "status"])


def _trend(params, ratios, increasing_param):
    r = np.asarray(ratios, dtype=float)
    d = np.diff(r)
    out = {"monotone_decreasing": bool(np.all(d < 0)),
           "monotone_increasing": bool(np.all(d > 0)),
           "first": float(r[0]), "last": float(r[-1])}
    if r.size >= 4:
        # Richardson-style limit assuming ratio ~ a + b * h with h the last step scale
        p = np.asarray(params, dtype=float)
        h = 1.0 / np.log(p) if increasing_param else p
        A = np.vstack([np.ones(3), h[-3:]]).T
        coef, *_ = np.linalg.lstsq(A, r[-3:], rcond=None)
        out["extrapolated_limit"] = float(coef[0])
    return out


def sobolev_sharpness_scan(n=5, scales=(1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001), cutoff=1.0,
                           tol=1e-8):
    """ratio(scale) = Poincare deficit / ||u||^2_{2n/(n-4)} for cut-off bubbles."""
    if n < 5:
        raise DomainError("needs n >= 5")
    S2 = sobolev_sharp_constant(n)
    ratios, stats = [], []
    for sc in scales:
        p = make_bubble(n, sc, cutoff=max(cutoff, 4 * sc))
        (E, _), (L, _) = _E_h(p), _L2(p)
        Lq, _ = _Lq(p, 2.0 * n / (n - 4))
        ratio = (E - SharpConstants.poincare2(n) * L) / Lq
        ratios.append(ratio)
        stats.append("PASS" if ratio >= S2 * (1 - tol) else "FAIL")
    tr = _trend(scales, ratios, False)
    tr["final_over_target"] = ratios[-1] / S2
    return ScanResult("sobolev", list(scales), ratios, S2, stats, tr, "scale")


def rellich_sharpness_scan(n=5, spans=(1e2, 1e3, 1e4, 1e5, 1e6), outer_cut=0.5, width=1.65,
                           tol=1e-8):
    """ratio(span) = Poincare deficit / int u^2 (V/sigma_n)^(-4/n) for truncated power laws."""
    target = SharpConstants.rellich(n)
    ratios, stats = [], []
    for sp in spans:
        p = rellich_powerlaw(n, outer_cut / sp, outer_cut, width)
        (E, _), (L, _) = _E_h(p), _L2(p)
        W, _ = _W(p, 4.0 / n)
        ratio = (E - SharpConstants.poincare2(n) * L) / W
        ratios.append(ratio)
        stats.append("PASS" if ratio >= target * (1 - tol) else "FAIL")
    tr = _trend(spans, ratios, True)
    tr["final_over_target"] = ratios[-1] / target
    return ScanResult("rellich", list(spans), ratios, target, stats, tr, "span")


def adams_sharpness_scan(pows=(1.0, 2.0), ms=(1e3, 1e4, 1e5, 1e6)):
    """For each power, ratio(m) = adams_exact_ratio(w_m, pow); one ScanResult per power."""
    seq = [adams_sequence_data(m) for m in ms]
    out = {}
    for pw in pows:
        if not 0 < pw <= 2:
            raise DomainError("powers must lie in (0, 2]")
        ratios = [adams_exact_ratio(w, pw) for w, _, _ in seq]
        tr = _trend(ms, ratios, True)
        r = np.asarray(ratios)
        tr["growth_factor"] = float(r[-1] / r[0])
        tr["max_over_min"] = float(r.max() / r.min())
        ll = np.log(np.log(np.asarray(ms, dtype=float)))
        tr["loglog_slope"] = float(np.polyfit(ll, np.log(r), 1)[0])
        tr["predicted_slope"] = 1 - pw / 2
        out[pw] = ScanResult("adams", list(ms), ratios, None, ["PASS"] * len(ms), tr, "m",
                             extra={"pow": pw, "c_m": [float(c) for _, c, _ in seq],
                                    "l2": [float(_L2(w)[0]) for w, _, _ in seq]})
    return out


# ---------------------------------------------------------------------------
# optimiser

@dataclass
class OptimizeResult:
    profile: RadialProfile
    ratio: float
    converged: bool
    evaluations: int
    history: list
    sharp: float
    status: str


def _ratio_fn(kind, n):
    c = SharpConstants.poincare2(n)
    if kind == "sobolev":
        q = 2.0 * n / (n - 4)
        return lambda p: (_E_h(p)[0] - c * _L2(p)[0]) / _Lq(p, q)[0], sobolev_sharp_constant(n)
    if kind == "rellich":
        return lambda p: (_E_h(p)[0] - c * _L2(p)[0]) / _W(p, 4.0 / n)[0], SharpConstants.rellich(n)
    raise DomainError(f"unknown ratio kind {kind!r}")


def optimize_ratio(kind, init, budget=400, controls=16, seed=0, tol=1e-8):
    """Dilation line search, then Nelder-Mead over log weights of a Gaussian mixture.

    The profile is sum_j exp(theta_j) exp(-(r / l_j)^2) with log-spaced
    widths l_j, all dilated by exp(theta_0); the initial weights are a
    non-negative least-squares fit to init, floored at 1e-4 of the largest
    so that every width stays reachable.  A bounded scalar search over the
    dilation comes first (concentration is the main way down), then the
    simplex works on all coordinates.  Positive mixtures are smooth,
    decay fast and contain good approximations of the bubble (which is
    completely monotone in r^2).  Ratios are homogeneous of degree 0, so no
    normalisation is needed.  Returns the best profile seen; its ratio never
    increases along the accepted trajectory.
    """
    from scipy.optimize import nnls
    from .corpus import gaussian_mixture

    n = init.ctx.n
    if not 8 <= controls <= 32:
        raise DomainError("controls must lie in [8, 32]")
    ratio, sharp = _ratio_fn(kind, n)
    hi = init.support if math.isfinite(init.support) else init.r_scale * 10.0
    ell = np.geomspace(hi * 1e-3, hi * 10.0, controls)
    rs = np.geomspace(hi * 1e-4, hi * 20.0, 8 * controls)
    basis = np.exp(-(rs[:, None] / ell[None, :]) ** 2)
    target = np.asarray(init.w(rs), dtype=float)
    wts, _ = nnls(basis / target.max(), target / target.max())
    floor = 1e-4 * max(wts.max(), 1e-300)
    theta0 = np.concatenate([[0.0], np.log(np.maximum(wts, floor))])

    def build(theta):
        return gaussian_mixture(n, np.exp(theta[1:]), ell * math.exp(theta[0]))

    history = []
    best = {"f": math.inf, "theta": theta0}

    def obj(theta):
        try:
            f = float(ratio(build(theta)))
        except (IntegrabilityError, ConvergenceError, FloatingPointError, DomainError):
            f = math.inf
        if not math.isfinite(f):
            f = 1e300
        if f < best["f"]:
            best["f"], best["theta"] = f, np.array(theta)
            history.append(f)
        return f

    line_budget = min(40, max(budget // 10, 1))
    line = minimize_scalar(lambda d: obj(np.concatenate([[d], theta0[1:]])), bounds=(-12.0, 1.0),
                           method="bounded", options={"maxiter": line_budget, "xatol": 1e-2})
    start = np.array(best["theta"])
    rest = budget - int(line.nfev)
    converged, used = False, int(line.nfev)
    if rest > 0:
        rng = np.random.default_rng(seed)
        simplex = [start] + [start + 0.3 * rng.standard_normal(start.size) for _ in range(start.size)]
        res = minimize(obj, start, method="Nelder-Mead",
                       options={"maxfev": rest, "initial_simplex": np.array(simplex),
                                "xatol": 1e-6, "fatol": 1e-10 * max(sharp, 1.0)})
        converged, used = bool(res.success), used + int(res.nfev)
    prof = build(best["theta"])
    status = "PASS" if best["f"] >= sharp * (1 - tol) else "FAIL"
    return OptimizeResult(prof, best["f"], converged, used, history, sharp, status)
