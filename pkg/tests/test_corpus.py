import numpy as np
import pytest

from hypergap.corpus import DEFAULT_SIZE, default_corpus, gaussian_mixture, named_profiles, random_profiles
from hypergap.errors import DomainError


def test_mixture_derivatives():
    p = gaussian_mixture(5, [1.0, -0.5], [1.0, 0.3])
    r = np.array([0.1, 0.5, 1.2])
    h = 1e-6
    assert np.allclose(p.dw(r), (p.w(r + h) - p.w(r - h)) / (2 * h), rtol=1e-7)
    assert np.allclose(p.d2w(r), (p.dw(r + h) - p.dw(r - h)) / (2 * h), rtol=1e-6)
    with pytest.raises(DomainError):
        gaussian_mixture(5, [1.0], [0.0])
    with pytest.raises(DomainError):
        gaussian_mixture(5, [1.0, 2.0], [1.0])


def test_random_profiles_deterministic():
    a = random_profiles(6, 5, seed=3)
    b = random_profiles(6, 5, seed=3)
    c = random_profiles(6, 5, seed=4)
    r = np.geomspace(0.01, 5, 20)
    assert all(np.array_equal(x.w(r), y.w(r)) for x, y in zip(a, b))
    assert not np.array_equal(a[0].w(r), c[0].w(r))
    assert len(random_profiles(4)) == DEFAULT_SIZE
    with pytest.raises(DomainError):
        random_profiles(4, -1)


def test_named_profiles_by_dimension():
    assert len(named_profiles(4)) == 2
    assert len(named_profiles(5)) == 3
    assert len(default_corpus(5, 3)) == 6
    assert len(default_corpus(5, 3, named=False)) == 3
