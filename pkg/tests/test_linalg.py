import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from subharmonic.errors import ConvergenceError
from subharmonic.linalg import balance, eigvals, hessenberg


def _sorted(v):
    return np.array(sorted(v, key=lambda z: (round(z.real, 8), round(z.imag, 8))))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 6).map(lambda n: (n, n)),
              elements=st.floats(-10.0, 10.0, allow_nan=False)))
def test_eigvals_match_numpy(a):
    ours = eigvals(a)
    ref = np.linalg.eigvals(a)
    scale = max(1.0, np.max(np.abs(a)))
    # match each reference eigenvalue to its nearest computed one
    for lam in ref:
        assert np.min(np.abs(ours - lam)) <= 1e-6 * scale


def test_known_spectra():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(_sorted(eigvals(rot)), _sorted(np.array([-1j, 1j])), atol=1e-14)
    # companion matrix of (x-1)(x-2)(x-3)
    comp = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(np.sort(eigvals(comp).real), [1.0, 2.0, 3.0], atol=1e-12)


def test_conjugate_closure_and_product(rng):
    a = rng.normal(size=(5, 5))
    mu = eigvals(a)
    assert np.allclose(_sorted(mu), _sorted(np.conj(mu)), atol=1e-12)
    assert np.prod(mu) == pytest.approx(np.linalg.det(a), rel=1e-10)


def test_balance_and_hessenberg_are_similarities(rng):
    a = rng.normal(size=(4, 4)) * np.array([1e-3, 1.0, 1e3, 1.0])
    b = balance(a)
    h = hessenberg(b)
    assert np.allclose(np.tril(h, -2), 0.0)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(h)),
                       np.sort_complex(np.linalg.eigvals(a)), rtol=1e-9)


def test_nonfinite_rejected():
    with pytest.raises((ValueError, ConvergenceError)):
        eigvals(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_eigvals_tiny_entries():
    # one unit entry with everything else at the smallest normal double
    a = np.full((4, 4), np.finfo(float).tiny)
    a[0, 0] = 1.0
    lam = eigvals(a)
    assert np.allclose(np.sort(np.abs(lam)), [0.0, 0.0, 0.0, 1.0], atol=1e-12)
