"""The default regression corpus: seeded smooth profiles plus the named families."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .extremal import adams_sequence, make_bubble, poincare_spreading, rellich_powerlaw
from .hypgeo import GeometryContext
from .profile import DecayClass, RadialProfile

__all__ = ["DEFAULT_SIZE", "gaussian_mixture", "random_profiles", "named_profiles", "default_corpus"]

DEFAULT_SIZE = 20


def gaussian_mixture(n, coeffs, lengths, name=""):
    """w(r) = sum_k c_k exp(-(r / l_k)^2) in the Euclidean radius r.

    Even in r, so smooth at the origin; Gaussian decay in r is far faster
    than any power of the volume, which keeps every functional finite.
    """
    c = np.asarray(coeffs, dtype=float)
    ell = np.asarray(lengths, dtype=float)
    if c.shape != ell.shape or c.ndim != 1 or c.size == 0:
        raise DomainError("coeffs and lengths must be equal-length 1-d sequences")
    if np.any(ell <= 0):
        raise DomainError("length scales must be positive")
    inv = 1.0 / ell ** 2

    def parts(r):
        r = np.asarray(r, dtype=float)[..., None]
        e = c * np.exp(-(r * r) * inv)
        w = e.sum(-1)
        dw = (-2 * r * inv * e).sum(-1)
        d2w = ((4 * r * r * inv * inv - 2 * inv) * e).sum(-1)
        return w, dw, d2w

    return RadialProfile(GeometryContext(n), lambda r: parts(r)[0], lambda r: parts(r)[1],
                         lambda r: parts(r)[2], r_scale=float(ell.min()),
                         decay=DecayClass("exponential_decay", 1.0), name=name)


def random_profiles(n, size=DEFAULT_SIZE, seed=0):
    """Deterministic pseudo-random mixtures: 1-4 bumps, scales log-uniform in [0.15, 3].

    The first coefficient is positive and dominant so profiles are not all
    near cancellation; the remaining ones have random sign.
    """
    if size < 0:
        raise DomainError("size must be non-negative")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(size):
        k = int(rng.integers(1, 5))
        lengths = np.exp(rng.uniform(math.log(0.15), math.log(3.0), k))
        coeffs = rng.uniform(-1.0, 1.0, k)
        coeffs[0] = 1.0 + abs(coeffs[0])
        out.append(gaussian_mixture(n, coeffs, lengths, name=f"mixture(n={n},seed={seed},i={i})"))
    return out


def named_profiles(n):
    """Representatives of the test families available at dimension n."""
    out = []
    if n >= 5:
        out.append(make_bubble(n, 0.3, cutoff=1.0))
        out.append(rellich_powerlaw(n, 1e-3))
    out.append(poincare_spreading(n, 1.5))
    if n == 4:
        out.append(adams_sequence(1e3))
    return out


def default_corpus(n, size=DEFAULT_SIZE, seed=0, named=True):
    prof = random_profiles(n, size, seed)
    return prof + named_profiles(n) if named else prof
