"""Exact polynomial algebra over the rationals for the key lemma's coefficients.

Everything here runs on fractions.Fraction; nothing is ever rounded.
Polynomials in (n, s) may carry a power of n in the denominator, kept as a
separate offset so the coefficient table itself stays polynomial.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "RationalPoly",
    "BivarRationalPoly",
    "Certificate",
    "build_A",
    "build_B",
    "build_P",
    "printed_coefficients",
    "verify_coefficients",
    "certify_nonneg",
    "kn_identity",
    "claimkey_check",
    "certify_all",
]


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not allowed in exact arithmetic")
    return Fraction(x)


class RationalPoly:
    """Univariate polynomial, coeffs[i] multiplies x^i."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = [_frac(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def x(cls):
        return cls([0, 1])

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    def _lift(self, other):
        return other if isinstance(other, RationalPoly) else RationalPoly([other])

    def __add__(self, other):
        o = self._lift(other)
        m = max(len(self.coeffs), len(o.coeffs))
        a = self.coeffs + (Fraction(0),) * (m - len(self.coeffs))
        b = o.coeffs + (Fraction(0),) * (m - len(o.coeffs))
        return RationalPoly([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly([-x for x in self.coeffs])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        if self.is_zero() or o.is_zero():
            return RationalPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(o.coeffs):
                    out[i + j] += a * b
        return RationalPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = RationalPoly([1])
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c):
        return self * RationalPoly([c])

    def derivative(self):
        return RationalPoly([i * c for i, c in enumerate(self.coeffs)][1:])

    def __call__(self, x):
        x = _frac(x)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def compose(self, q):
        """self(q(x))."""
        acc = RationalPoly()
        for c in reversed(self.coeffs):
            acc = acc * q + c
        return acc

    def __eq__(self, other):
        return isinstance(other, RationalPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"RationalPoly({self.to_str()})"

    def to_str(self, var="x"):
        if not self.coeffs:
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c:
                mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
                terms.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(terms)


class BivarRationalPoly:
    """n^(-npow) * sum c[i, j] n^i s^j with rational c."""

    __slots__ = ("terms", "npow")

    def __init__(self, terms=None, npow=0):
        t = {}
        for (i, j), c in (terms or {}).items():
            c = _frac(c)
            if c:
                t[(int(i), int(j))] = c
        # pull common factors of n out of the table
        while npow > 0 and t and all(i > 0 for i, _ in t):
            t = {(i - 1, j): c for (i, j), c in t.items()}
            npow -= 1
        if not t:
            npow = 0
        self.terms = t
        self.npow = int(npow)

    # ---- constructors --------------------------------------------------
    @classmethod
    def const(cls, c):
        return cls({(0, 0): c})

    @classmethod
    def n(cls):
        return cls({(1, 0): 1})

    @classmethod
    def s(cls):
        return cls({(0, 1): 1})

    # ---- arithmetic --------------------------------------------------------
    @staticmethod
    def _lift(o):
        return o if isinstance(o, BivarRationalPoly) else BivarRationalPoly.const(o)

    def _raised(self, npow):
        d = npow - self.npow
        return {(i + d, j): c for (i, j), c in self.terms.items()}

    def __add__(self, other):
        o = self._lift(other)
        p = max(self.npow, o.npow)
        t = self._raised(p)
        for k, c in o._raised(p).items():
            t[k] = t.get(k, Fraction(0)) + c
        return BivarRationalPoly(t, p)

    __radd__ = __add__

    def __neg__(self):
        return BivarRationalPoly({k: -c for k, c in self.terms.items()}, self.npow)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        t = {}
        for (i, j), a in self.terms.items():
            for (k, l), b in o.terms.items():
                key = (i + k, j + l)
                t[key] = t.get(key, Fraction(0)) + a * b
        return BivarRationalPoly(t, self.npow + o.npow)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = BivarRationalPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def div_n(self, k=1):
        """Divide by n^k."""
        return BivarRationalPoly(dict(self.terms), self.npow + k)

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        o = self._lift(other)
        return (self - o).is_zero()

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.npow))

    # ---- structure -------------------------------------------------------
    @property
    def s_degree(self):
        return max((j for _, j in self.terms), default=-1)

    def coeff_s(self, j):
        """Coefficient of s^j as a polynomial in n (same n-offset)."""
        return BivarRationalPoly({(i, 0): c for (i, jj), c in self.terms.items() if jj == j},
                                 self.npow)

    def numerator_in_n(self):
        """(n^npow * self) as a RationalPoly in n, requiring no s dependence."""
        if any(j for _, j in self.terms):
            raise ValueError("polynomial depends on s")
        deg = max((i for i, _ in self.terms), default=-1)
        return RationalPoly([self.terms.get((i, 0), 0) for i in range(deg + 1)])

    def at_n(self, nval):
        """Substitute an exact value of n; returns a RationalPoly in s."""
        nval = _frac(nval)
        if nval == 0 and self.npow:
            raise ZeroDivisionError("n = 0 with a denominator in n")
        deg = self.s_degree
        c = [Fraction(0)] * (deg + 1)
        for (i, j), a in self.terms.items():
            c[j] += a * nval ** i
        scale = nval ** -self.npow if self.npow else Fraction(1)
        return RationalPoly([x * scale for x in c])

    def __call__(self, nval, sval):
        return self.at_n(nval)(sval)

    def to_dict(self):
        return {"n_denominator_power": self.npow,
                "terms": [{"n": i, "s": j, "coeff": str(c)}
                          for (i, j), c in sorted(self.terms.items())]}

    def to_str(self):
        if not self.terms:
            return "0"
        parts = []
        for (i, j), c in sorted(self.terms.items(), key=lambda kv: (-kv[0][1], -kv[0][0])):
            mono = "*".join(x for x in (f"n^{i}" if i else "", f"s^{j}" if j else "") if x)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        body = " + ".join(parts)
        return body if not self.npow else f"[{body}] / n^{self.npow}"

    def __repr__(self):
        return f"BivarRationalPoly({self.to_str()})"


N = BivarRationalPoly.n()
S = BivarRationalPoly.s()


def _np(*coeffs):
    """Polynomial in n from coefficients, highest power first."""
    out = BivarRationalPoly()
    for c in coeffs:
        out = out * N + c
    return out


# ---------------------------------------------------------------------------
# the lemma's polynomials, transcribed term by term

def build_A():
    return ((6 * (N - 1) ** 6 * (N - 2) ** 2 * (N * N + 6 * N - 12)).div_n(3) * S ** 4
            + ((N - 1) ** 2 * _np(24, -116, -88, 1732, -4920, 6744, -4800, 1440)).div_n(2) * S ** 3
            + ((N - 2) * _np(36, -252, 506, 392, -3386, 6504, -6480, 3456, -768)).div_n(2) * S ** 2
            + (N - 2) ** 2 * _np(24, -156, 316, -224, 32, 0) * S
            + 2 * N ** 2 * (N - 2) ** 3 * (3 * N - 4) * (N - 4))


def build_B():
    return ((6 * (N - 1) ** 5 * (N * N + 6 * N - 12) * (N - 2) ** 2).div_n(2) * S ** 3
            + (2 * (N - 1) * (N - 2) * _np(9, -43, -24, 502, -1242, 1424, -816, 192)).div_n(2) * S ** 2
            + 2 * (N - 2) ** 2 * _np(9, -59, 131, -123, 46, -8) * S
            + 2 * N ** 2 * (N - 2) ** 3 * (N - 4) * (3 * N - 4))


def _Q():
    return (N - 1) * (N - 3) * S ** 2 + 2 * N * (N - 1) * S + N * (N + 2)


def build_P(A=None, B=None):
    """P(s) = n((n-3)s + n + 2) A(s) - ((n-1)(n-3)s^2 + 2n(n-1)s + n(n+2)) B(s)."""
    A = build_A() if A is None else A
    B = build_B() if B is None else B
    return N * ((N - 3) * S + N + 2) * A - _Q() * B


def printed_coefficients():
    """The closed forms of a_0 .. a_5 as stated alongside P."""
    zero = BivarRationalPoly()
    a4 = (2 * (N - 1) ** 2 * (N - 2) * (2 * N - 3) * (3 * N - 5) * (N * N + 6 * N - 12)
          * _np(1, -5, 6, -4)).div_n(2)
    a3 = (2 * (N - 2) * _np(18, -135, 485, -1087, 1677, -1926, 1656, -888, 192)).div_n(1)
    a2 = (2 * (N - 2) ** 2 * _np(18, -123, 370, -551, 258, 360, -528, 192)).div_n(1)
    a1 = 2 * N * (N - 2) ** 3 * (N - 4) * _np(6, -1, -5, 2)
    return [zero, a1, a2, a3, a4, zero]


# ---------------------------------------------------------------------------
# certificates

@dataclass
class Certificate:
    lemma: str
    status: str
    witness: dict = field(default_factory=dict)
    difference_poly: dict | None = None

    @property
    def ok(self):
        return self.status == "PASS"

    def to_dict(self):
        d = {"lemma": self.lemma, "status": self.status, "witness": self.witness}
        if self.difference_poly is not None:
            d["difference_poly"] = self.difference_poly
        return d


def verify_coefficients(A=None, B=None):
    """Expand P and compare every coefficient with its printed closed form."""
    P = build_P(A, B)
    printed = printed_coefficients()
    rows, diffs = {}, {}
    for i in range(6):
        d = P.coeff_s(i) - printed[i]
        rows[f"a{i}"] = "match" if d.is_zero() else "MISMATCH"
        if not d.is_zero():
            diffs[f"a{i}"] = {"poly": d.to_str(), **d.to_dict()}
    extra = [j for j in range(6, P.s_degree + 1) if not P.coeff_s(j).is_zero()]
    for j in extra:
        rows[f"a{j}"] = "MISMATCH"
        diffs[f"a{j}"] = {"poly": P.coeff_s(j).to_str(), **P.coeff_s(j).to_dict()}
    ok = not diffs
    return Certificate("coefficients", "PASS" if ok else "FAIL",
                       witness={"coefficients": rows, "s_degree": P.s_degree},
                       difference_poly=diffs or None)


def _cauchy_bound(p):
    """Every real root of p is below this bound."""
    c = p.coeffs
    lead = abs(c[-1])
    return 1 + max((abs(x) / lead for x in c[:-1]), default=Fraction(0))


def certify_nonneg(coef, n_min=4, fallback_span=200):
    """Certify coef(n) >= 0 for every integer n >= n_min.

    First try: clear the n-denominator (positive for n >= 1), substitute
    n = n_min + m, and check all coefficients in m are >= 0.  Otherwise fall
    back on exact evaluation over [n_min, n_min + fallback_span] plus a
    Cauchy root bound beyond.  A negative shifted coefficient is always
    reported in the witness, never hidden.
    """
    if n_min < 1:
        raise ValueError("n_min must be positive so that n^-k keeps its sign")
    if isinstance(coef, BivarRationalPoly):
        p = coef.numerator_in_n()
    else:
        p = coef
    if p.is_zero():
        return Certificate("nonneg", "PASS", witness={"method": "zero polynomial"})
    shifted = p.compose(RationalPoly([n_min, 1]))
    neg = [i for i, c in enumerate(shifted.coeffs) if c < 0]
    witness = {"n_min": n_min, "shifted_coeffs": [str(c) for c in shifted.coeffs],
               "negative_shifted_terms": neg,
               "value_at_n_min": str(p(n_min))}
    if not neg:
        witness["method"] = "shift"
        witness["zero_at_n_min"] = shifted.coeffs[0] == 0
        return Certificate("nonneg", "PASS", witness=witness)
    vals = [p(k) for k in range(n_min, n_min + fallback_span + 1)]
    bad = [n_min + i for i, v in enumerate(vals) if v < 0]
    lead_pos = p.coeffs[-1] > 0
    bound = _cauchy_bound(p)
    covered = lead_pos and bound <= n_min + fallback_span
    witness.update({"method": "evaluation+bound", "negative_at": bad,
                    "cauchy_bound": str(bound), "tail_covered": covered})
    ok = not bad and covered
    return Certificate("nonneg", "PASS" if ok else "FAIL", witness=witness)


def kn_identity(samples=10, seed=0):
    """Clear denominators in K_n'/sinh^(n-1) and compare with 24 s^2 / Q^2.

    cosh^2 is replaced by 1 + s first (s = sinh^2), which makes the
    expression a rational function of (n, s).
    """
    c2 = 1 + S
    Q = _Q()
    u = (N - 3) * S + N + 2
    num1 = (N * c2 + S) * u + 2 * (N - 3) * S * c2
    num2 = 4 * (N - 1) * S * c2 * u * ((N - 3) * S + N)
    lhs_num = Q * Q - num1 * Q + num2          # lhs * Q^2
    diff = lhs_num - 24 * S * S
    rng = random.Random(seed)
    spots = []
    for _ in range(samples):
        nv = Fraction(rng.randint(8, 400), rng.randint(1, 2))
        sv = Fraction(rng.randint(1, 10 ** 6), rng.randint(1, 10 ** 4))
        q = Q(nv, sv)
        direct = (1 - num1(nv, sv) / q + num2(nv, sv) / (q * q))
        closed = 24 * sv * sv / (q * q)
        spots.append({"n": str(nv), "s": str(sv), "agree": direct == closed})
    ok = diff.is_zero() and all(sp["agree"] for sp in spots)
    return Certificate("kn_identity", "PASS" if ok else "FAIL",
                       witness={"numerator": lhs_num.to_str(), "spot_checks": spots},
                       difference_poly=None if diff.is_zero() else diff.to_dict())


def claimkey_check(n, A=None):
    """P(s) > 0 for s > 0 at this integer n, from the signs of a_1 .. a_4."""
    if n < 4:
        raise ValueError("the claim is stated for n >= 4")
    P = build_P(A=A).at_n(n)
    c = list(P.coeffs) + [Fraction(0)] * (6 - len(P.coeffs))
    strict = [i for i in range(1, 5) if c[i] > 0]
    ok = c[0] == 0 and all(x >= 0 for x in c[1:]) and bool(strict)
    return Certificate("claimkey", "PASS" if ok else "FAIL",
                       witness={"n": n, "coefficients": [str(x) for x in c],
                                "strictly_positive": [f"a{i}" for i in strict]})


def certify_all(n_max=64, A=None):
    """Every exact certificate, as a dict of Certificates."""
    out = {"coefficients": verify_coefficients(A=A), "kn_identity": kn_identity()}
    P = build_P(A=A)
    for i in range(1, 5):
        out[f"nonneg_a{i}"] = certify_nonneg(P.coeff_s(i), 4)
        out[f"nonneg_a{i}"].lemma = f"nonneg_a{i}"
    a1_at_4 = P.coeff_s(1).at_n(4)
    out["a1_at_4"] = Certificate("a1_at_4", "PASS" if a1_at_4.is_zero() else "FAIL",
                                 witness={"value": str(a1_at_4(0))})
    for n in range(4, n_max + 1):
        out[f"claimkey_n{n}"] = claimkey_check(n, A=A)
    return out
