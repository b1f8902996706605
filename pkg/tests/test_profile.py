import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from hypergap.corpus import gaussian_mixture, random_profiles
from hypergap.errors import DomainError, ExtrapolationError
from hypergap.extremal import make_bubble
from hypergap.hypgeo import GeometryContext, mp_phi, phi, phi_inverse
from hypergap.profile import (DecayClass, RadialProfile, SourceProfile, energy_euc, energy_hyp,
                              gradient_sq_hyp, inner_product_laplace, laplace_euclidean,
                              laplace_hyperbolic, lp_norm, talenti_profile, weighted_l2)


def exp_profile(n):
    """v(s) = exp(-s)."""
    ctx = GeometryContext(n)
    return RadialProfile.from_volume_functions(
        ctx, lambda s: np.exp(-s), lambda s: -np.exp(-s), lambda s: np.exp(-s),
        r_scale=(1 / ctx.sigma_n) ** (1 / n), decay=DecayClass("exponential_decay", 1.0))


def constant_profile(n, c=2.5):
    return RadialProfile(GeometryContext(n), lambda r: c + 0 * r, lambda r: 0 * r,
                         lambda r: 0 * r, support=10.0)


def test_decay_class_validation():
    with pytest.raises(DomainError):
        DecayClass("fast")
    with pytest.raises(DomainError):
        DecayClass("polynomial_decay")
    assert DecayClass.from_obj({"kind": "exponential_decay", "rate": 2}).rate == 2


def test_outside_domain():
    p = exp_profile(4)
    with pytest.raises(ExtrapolationError):
        p.v(0.0)
    with pytest.raises(ExtrapolationError):
        p.v(-1.0)


def test_laplacians_of_constant_vanish():
    p = constant_profile(5)
    s = np.geomspace(1e-3, 1e3, 9)
    assert np.all(laplace_hyperbolic(p, s) == 0)
    assert np.all(laplace_euclidean(p, s) == 0)


def test_zero_profile_functionals():
    z = RadialProfile.zero(GeometryContext(6))
    assert energy_hyp(z) == 0 and energy_euc(z) == 0 and lp_norm(z, 2) == 0
    assert inner_product_laplace(z) == 0 and weighted_l2(z, 0.5) == 0


def test_laplace_hyperbolic_geodesic_fd():
    n, s0 = 4, 1.0
    ctx = GeometryContext(n)
    sig = mpmath.mpf(ctx.sigma_n)
    with mpmath.workdps(40):
        u = lambda rho: mpmath.exp(-sig * mp_phi(n, rho))
        rho0 = mpmath.mpf(float(phi_inverse(ctx, s0)))
        lap = mpmath.diff(u, rho0, 2) + (n - 1) * mpmath.coth(rho0) * mpmath.diff(u, rho0)
    got = laplace_hyperbolic(exp_profile(n), float(sig * mp_phi(n, rho0)))
    assert got == pytest.approx(-float(lap), rel=1e-5)


def test_laplace_euclidean_fd():
    n = 4
    sig = GeometryContext(n).sigma_n
    r0 = (1.0 / sig) ** 0.25
    f = lambda r: mpmath.exp(-sig * r ** 4)
    with mpmath.workdps(30):
        lap = mpmath.diff(f, r0, 2) + (n - 1) / r0 * mpmath.diff(f, r0)
    assert laplace_euclidean(exp_profile(n), 1.0) == pytest.approx(-float(lap), rel=1e-5)


def test_laplace_euclidean_bubble_symbolic():
    r = sp.symbols("r", positive=True)
    f = (1 + r ** 2) ** sp.Rational(-1, 2)
    lap = sp.lambdify(r, -(sp.diff(f, r, 2) + 4 / r * sp.diff(f, r)))
    p = make_bubble(5, 1.0)
    sig = p.ctx.sigma_n
    for rv in (0.01, 0.5, 1.0, 3.0, 40.0):
        assert laplace_euclidean(p, sig * rv ** 5) == pytest.approx(lap(rv), rel=1e-6)


def test_laplace_small_s_matches_euclidean():
    p = exp_profile(5)
    s = 1e-6
    h, e = laplace_hyperbolic(p, s), laplace_euclidean(p, s)
    assert abs(h / e - 1) < 10 * s ** 0.4


def test_lp_norm_exponential():
    assert lp_norm(exp_profile(4), 2) == pytest.approx(1 / math.sqrt(2), rel=1e-9)
    assert lp_norm(exp_profile(7), 1) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(DomainError):
        lp_norm(exp_profile(4), 0.5)


def test_lp_norm_plateau():
    # smoothed plateau of height 1 on [0, 2] in s: int |v|^q ds -> 2 as the ramp narrows
    ctx = GeometryContext(5)
    eps = 1e-3

    def step(s):
        x = np.clip((np.asarray(s) - 2 + eps) / (2 * eps), 0, 1)
        return 1 - x * x * x * (10 - 15 * x + 6 * x * x)

    p = RadialProfile.from_volume_functions(ctx, step, lambda s: 0 * s, lambda s: 0 * s,
                                            support=2 + eps, breaks=[2 - eps])
    for q in (1, 2, 4):
        assert lp_norm(p, q) == pytest.approx(2 ** (1 / q), rel=1e-3)


def test_weighted_l2_gamma_oracle():
    p = exp_profile(5)
    sig = p.ctx.sigma_n
    assert weighted_l2(p, 0.8) == pytest.approx(sig ** 0.8 * gamma(0.2) * 2 ** -0.2, rel=1e-8)
    assert weighted_l2(p, 0.0) == pytest.approx(lp_norm(p, 2) ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        weighted_l2(p, 0.9)


def test_energy_euc_radial_quadrature():
    n = 4
    sig = GeometryContext(n).sigma_n
    r = sp.symbols("r", positive=True)
    u = sp.exp(-sig * r ** 4)
    lap = sp.lambdify(r, sp.diff(u, r, 2) + (n - 1) / r * sp.diff(u, r))
    ref = quad(lambda x: lap(x) ** 2 * n * sig * x ** (n - 1), 0, 4, epsrel=1e-12, limit=200)[0]
    assert energy_euc(exp_profile(n)) == pytest.approx(ref, rel=1e-6)


def test_inner_product_against_geodesic_gradient():
    n = 5
    ctx = GeometryContext(n)
    sig = ctx.sigma_n

    def grad_sq(rho):
        s = sig * phi(ctx, rho)
        du = -math.exp(-s) * sig * n * math.sinh(rho) ** (n - 1)
        return du * du * n * sig * math.sinh(rho) ** (n - 1)

    ref = quad(grad_sq, 0, 6, epsrel=1e-12, limit=400)[0]
    p = exp_profile(n)
    assert inner_product_laplace(p) == pytest.approx(-ref, rel=1e-5)
    assert gradient_sq_hyp(p) == pytest.approx(ref, rel=1e-5)


def test_first_order_poincare_on_bump():
    p = gaussian_mixture(6, [1.0, -0.4], [0.8, 0.3])
    assert inner_product_laplace(p) <= -(25 / 4) * lp_norm(p, 2) ** 2


def test_energy_hyp_exceeds_euclidean_for_cut_bubble():
    p = make_bubble(5, 1.0, cutoff=3.0)
    assert energy_hyp(p) > energy_euc(p) > 0


def test_transform_isometry(corpus):
    for p in corpus(5)[:10]:
        ctx = p.ctx
        n, sig = ctx.n, ctx.sigma_n

        def integrand(rho, q):
            r = float(phi(ctx, rho)) ** (1 / n)
            return abs(float(p.w(r))) ** q * n * sig * math.sinh(rho) ** (n - 1)

        for q in (1, 2, 4):
            ref = quad(integrand, 0, 8, args=(q,), epsrel=1e-11, limit=400, points=[0.5, 1, 2, 4])[0]
            assert lp_norm(p, q) ** q == pytest.approx(ref, rel=1e-6)


def test_refinement_stability(corpus):
    # coarse vs default tolerance: the default is already near round-off for lap_g^2
    coarse = GeometryContext(6, tol_quad=1e-8)
    for p in corpus(6)[:5]:
        q = p.with_context(coarse)
        for fn in (energy_hyp, energy_euc, lambda x: lp_norm(x, 2), inner_product_laplace):
            assert fn(q) == pytest.approx(fn(p), rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(c=st.sampled_from([0.5, 2.0, 10.0]), k=st.integers(0, 19))
def test_homogeneity(c, k):
    p = random_profiles(5, 20)[k]
    q = p.scaled(c)
    assert energy_hyp(q) == pytest.approx(c * c * energy_hyp(p), rel=1e-9)
    assert lp_norm(q, 3) == pytest.approx(c * lp_norm(p, 3), rel=1e-9)


def test_serialisation_round_trip():
    p = gaussian_mixture(5, [1.3, -0.5], [1.0, 0.4])
    doc = p.to_json()
    q = RadialProfile.from_json(doc)
    assert q.ctx.n == 5 and q.decay.kind == "exponential_decay"
    s = np.geomspace(1e-2, 30, 25)
    assert np.allclose(q.v(s), p.v(s), rtol=1e-7, atol=1e-12)
    assert lp_norm(q, 2) == pytest.approx(lp_norm(p, 2), rel=1e-6)
    with pytest.raises(DomainError):
        RadialProfile.from_dict({"format": 2, "n": 5, "grid": [], "values": []})
    with pytest.raises(DomainError):
        RadialProfile.from_json(doc, GeometryContext(6))


def test_from_samples_compact():
    ctx = GeometryContext(4)
    s = np.linspace(0.01, 3.0, 300)
    vals = (3.0 - s) ** 3
    p = RadialProfile.from_samples(ctx, s, vals, "compact_support")
    assert p.v(1.5) == pytest.approx(1.5 ** 3, rel=1e-6)
    assert p.v(4.0) == 0.0
    with pytest.raises(DomainError):
        RadialProfile.from_samples(ctx, s[::-1], vals)


def test_talenti_zero_source():
    ctx = GeometryContext(5)
    src = SourceProfile(lambda s: 0 * np.asarray(s), np.geomspace(1e-3, 10, 50))
    v = talenti_profile(src, ctx)
    assert np.all(v.v(np.array([1e-2, 1.0, 20.0])) == 0)


def test_talenti_round_trip_indicator():
    ctx = GeometryContext(4)

    def f(s):
        x = np.clip((np.asarray(s) - 0.95) / 0.1, 0, 1)
        return 1 - x * x * x * (10 - 15 * x + 6 * x * x)

    grid = np.unique(np.concatenate([np.geomspace(1e-4, 1.05, 300), [0.95]]))
    v = talenti_profile(SourceProfile(f, grid), ctx)
    s = np.linspace(0.1, 0.9, 17)
    assert np.allclose(laplace_hyperbolic(v, s), f(s), rtol=1e-4)


def test_talenti_exponential_source_positive_decreasing():
    ctx = GeometryContext(5)
    v = talenti_profile(SourceProfile(lambda s: np.exp(-np.asarray(s)), np.geomspace(1e-4, 60, 400)), ctx)
    vals = v.v(np.geomspace(1e-3, 100, 40))
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)
