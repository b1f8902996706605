import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from hypergap import deficit as D
from hypergap.corpus import gaussian_mixture, random_profiles
from hypergap.errors import ConstraintError, DomainError
from hypergap.hypgeo import GeometryContext
from hypergap.profile import RadialProfile


def lieb_constant(n):
    """Closed form of the sharp second-order Sobolev constant (test oracle only)."""
    return (math.pi ** 2 * (n + 2) * n * (n - 2) * (n - 4)
            * math.exp(4.0 / n * (gammaln(n / 2) - gammaln(n))))


def bump(n):
    return gaussian_mixture(n, [1.2, -0.3], [0.9, 0.35], name="bump")


# ---------------------------------------------------------------------------
# report semantics

def test_report_contracts():
    R = D.DeficitReport
    assert R("x", 2.0, 1.0).status == "PASS"
    assert R("x", 1.0, 1.0 + 1e-10).status == "PASS-with-warning"
    assert R("x", 1.0, 1.1).status == "FAIL"
    assert R("x", 1.0, 1.0, contract="positive").status == "FAIL"
    assert R("x", 1.0, 1.0 + 1e-9, contract="equal", tol=1e-8).status == "PASS"
    assert R("x", 1.0, 1.1, contract="equal").status == "FAIL"
    assert R("x", math.nan, 0.0).status == "FAIL"
    assert R("x", 2.0, 1.0, checks_ok=False).status == "FAIL"
    r = R("x", 3.0, 1.0, ref_scale=10.0)
    assert r.scale == 10.0 and r.rel_gap == pytest.approx(0.2)
    assert set(r.to_dict()) >= {"lhs", "rhs", "gap", "status", "params"}


def test_constants():
    assert D.SharpConstants.rellich(5) == 25 / 16
    assert D.SharpConstants.rellich(8) == 64
    assert D.SharpConstants.poincare2(5) == 16
    assert D.SharpConstants.weighted_hardy(6) == 9
    assert D.SharpConstants.adams_threshold == 81 / 16


@pytest.mark.parametrize("n", [5, 6, 8])
def test_sobolev_constant_matches_closed_form(n):
    assert D.sobolev_sharp_constant(n) == pytest.approx(lieb_constant(n), rel=1e-8)
    with pytest.raises(DomainError):
        D.sobolev_sharp_constant(4)


def test_bubble_is_sobolev_equality_case():
    from hypergap.extremal import make_bubble
    from hypergap.profile import energy_euc, lp_norm
    p = make_bubble(5, 0.7)
    assert energy_euc(p) == pytest.approx(lieb_constant(5) * lp_norm(p, 10) ** 2, rel=1e-4)


# ---------------------------------------------------------------------------
# inequalities on profiles

def test_zero_profile_gives_zero_gaps():
    z = RadialProfile.zero(GeometryContext(6))
    for rep in (D.keytool_gap(z), D.rellich_remainder(z), D.sobolev_remainder(z),
                *D.tofinish_chain(z), *D.euclidean_weighted_checks(z)):
        assert rep.gap == 0 and rep.status == "PASS"


@pytest.mark.parametrize("n", [4, 5, 6, 8])
def test_keytool_and_chain_on_bump(n):
    p = bump(n)
    k = D.keytool_gap(p)
    l1, l2 = D.tofinish_chain(p)
    assert k.gap > 0 and l1.gap > 0 and l2.gap > 0
    # the chain implies the inequality: its two links add up to the keytool gap
    assert l1.gap + l2.gap == pytest.approx(k.gap, rel=1e-9)


def test_dimension_guards():
    with pytest.raises(DomainError):
        D.rellich_remainder(bump(4))
    with pytest.raises(DomainError):
        D.sobolev_remainder(bump(4))
    with pytest.raises(DomainError):
        D.gjms_p2_check(bump(4))
    with pytest.raises(DomainError):
        D.keytool_gap(gaussian_mixture(3, [1.0], [1.0]))
    with pytest.raises(DomainError):
        D.adams_functional(bump(5), 1.0)


def test_weighted_checks_bump():
    rel, har = D.euclidean_weighted_checks(bump(5))
    assert rel.gap > 0 and har.gap > 0


@pytest.mark.parametrize("n", [5, 6])
def test_gjms_identity(n):
    rep = D.gjms_p2_check(bump(n))
    assert rep.params["identity_residual"] <= 1e-6
    assert rep.status == "PASS"


def test_gjms_identity_detects_wrong_prefactor():
    rep = D.gjms_p2_check(bump(6))
    left, right = rep.params["identity_left"], rep.params["identity_right"]
    assert abs(left - 1.01 * right) / abs(left) > 1e-3


def test_lemma31_identity(corpus):
    for p in corpus(5)[:4] + [bump(4)]:
        rep = D.lemma31_check(p)
        assert rep.status == "PASS", rep.to_dict()


def test_rellich_sobolev_family_endpoints():
    p = bump(6)
    s0 = D.rellich_sobolev_remainder(p, 0.0, D.sobolev_sharp_constant(6))
    assert s0.rhs == pytest.approx(D.sobolev_remainder(p).rhs, rel=1e-7)
    s4 = D.rellich_sobolev_remainder(p, 4.0, D.SharpConstants.rellich(6))
    assert s4.rhs == pytest.approx(D.rellich_remainder(p).rhs, rel=1e-7)
    mid = D.rellich_sobolev_remainder(p, 2.0, 1.0)
    assert mid.status == "PASS"


def test_negative_control_wrong_constant_fails():
    p = bump(6)
    huge = D.rellich_sobolev_remainder(p, 2.0, 1e6)
    assert huge.status == "FAIL"


@settings(max_examples=12, deadline=None)
@given(c=st.sampled_from([0.5, 2.0, 10.0]), k=st.integers(0, 9))
def test_deficit_ratios_homogeneous(c, k):
    p = random_profiles(6, 10)[k]
    q = p.scaled(c)
    a, b = D.keytool_gap(p), D.keytool_gap(q)
    assert b.gap == pytest.approx(c * c * a.gap, rel=1e-8)
    assert b.rel_gap == pytest.approx(a.rel_gap, rel=1e-8, abs=1e-12)
    ra, rb = D.sobolev_remainder(p), D.sobolev_remainder(q)
    assert rb.lhs / rb.rhs == pytest.approx(ra.lhs / ra.rhs, rel=1e-8)


# ---------------------------------------------------------------------------
# Adams

def test_adams_normalise_and_constraint():
    p = bump(4)
    q = D.adams_normalize(p, 4.0)
    rep = D.adams_functional(q, 4.0)
    assert rep.params["constraint"] == pytest.approx(1.0, rel=1e-12)
    assert rep.status == "PASS" and math.isfinite(rep.params["functional"])
    with pytest.raises(ConstraintError):
        D.adams_functional(q.scaled(1.1), 4.0)
    with pytest.raises(DomainError):
        D.adams_functional(q, 81 / 16)


def test_adams_exact_ratio():
    q = D.adams_normalize(bump(4), 81 / 16)
    r2 = D.adams_exact_ratio(q, 2.0)
    r1 = D.adams_exact_ratio(q, 1.0)
    assert 0 < r2 < r1
    assert D.adams_exact_ratio(RadialProfile.zero(GeometryContext(4))) == 0.0
    with pytest.raises(ConstraintError):
        D.adams_exact_ratio(q.scaled(2.0))


def test_adams_small_amplitude_limit():
    # (e^{a u^2} - 1) ~ a u^2, so the ratio tends to 32 pi^2 as the amplitude shrinks
    q = D.adams_normalize(bump(4), 81 / 16).scaled(1e-4)
    assert D.adams_exact_ratio(q, 2.0) == pytest.approx(32 * math.pi ** 2, rel=1e-3)


# ---------------------------------------------------------------------------
# the proof functions (multiprecision)

@pytest.mark.parametrize("n", [4, 7, 12])
def test_proof_function_signs_small_grid(n):
    rep = D.proof_function_signs(n, np.geomspace(1e-2, 20, 60), jprime_points=6)
    assert rep.status == "PASS", rep.params
    assert rep.params["jprime_max_rel_err"] < 1e-10


def test_proof_functions_at_specific_points():
    pf = D.ProofFunctionSet(5)
    with mpmath.workdps(80):
        for t in ("0.05", "1", "7"):
            assert pf.G(t)[0] < 0 and pf.H(t)[0] < 0 and pf.J(t)[0] < 0 and pf.K(t)[0] > 0
        assert pf.K(0)[0] == 0
    with pytest.raises(DomainError):
        D.ProofFunctionSet(3)


def test_keyestimate_examples():
    rep = D.keyestimate_check(4, [100.0])
    assert rep.status == "PASS" and rep.params["min_relative_margin"] > 0
    assert D.keyestimate_check(6, np.geomspace(1e-4, 1e4, 9)).status == "PASS"


def test_pointwise_transfer_examples():
    assert D.pointwise_transfer_bound(4, [1.0]).lhs > 0
    assert D.pointwise_transfer_bound(8, [1e4]).lhs > 0


def test_lower_bound_check():
    rep = D.lower_bound_check(9, np.geomspace(1e-2, 20, 50))
    assert rep.lhs >= 0 and rep.status == "PASS"
