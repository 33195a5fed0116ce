import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from subharmonic.elliptic import check_modulus, complete_K, jacobi_nd, jacobi_sn_cn_dn
from subharmonic.errors import DomainError
from subharmonic.quadrature import gauss_kronrod

moduli = st.floats(min_value=0.0, max_value=0.9999, allow_nan=False)
args = st.floats(min_value=-200.0, max_value=200.0, allow_nan=False)


def test_complete_K_limits():
    assert complete_K(0.0) == pytest.approx(np.pi / 2, rel=1e-15)
    assert complete_K(0.5) == pytest.approx(1.685750354812596, rel=1e-14)


@pytest.mark.parametrize("k", [0.0, 0.1, 0.5, 0.8, 0.99, 0.999999])
def test_complete_K_matches_scipy(k):
    # scipy uses the parameter m = k^2; ellipkm1 avoids cancellation in 1 - m
    assert complete_K(k) == pytest.approx(special.ellipkm1((1 - k) * (1 + k)), rel=1e-14)


@pytest.mark.parametrize("k", [0.2, 0.5, 0.9])
def test_complete_K_matches_quadrature(k):
    val, _ = gauss_kronrod(lambda s: 1.0 / np.sqrt(1.0 - (k * np.sin(s)) ** 2),
                           0.0, np.pi / 2, 1e-14, 1e-14)
    assert abs(complete_K(k) - val) <= 1e-10 * val


@pytest.mark.parametrize("k", [0.0, 0.3, 0.5, 0.9, 0.999])
def test_sn_cn_dn_match_scipy(k):
    u = np.linspace(-60.0, 60.0, 1001)
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    ref = special.ellipj(u, k * k)
    assert np.max(np.abs(sn - ref[0])) < 1e-12
    assert np.max(np.abs(cn - ref[1])) < 1e-12
    assert np.max(np.abs(dn - ref[2])) < 1e-12


def test_identities_on_grid():
    u = np.linspace(-30.0, 30.0, 1000)
    for k in np.linspace(0.0, 0.999, 11):
        sn, cn, dn = jacobi_sn_cn_dn(u, k)
        assert np.max(np.abs(sn ** 2 + cn ** 2 - 1.0)) <= 1e-12
        assert np.max(np.abs(dn ** 2 + k * k * sn ** 2 - 1.0)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(u=args, k=moduli)
def test_identities_property(u, k):
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    assert abs(sn * sn + cn * cn - 1.0) <= 1e-12
    assert abs(dn * dn + k * k * sn * sn - 1.0) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(u=args, k=moduli)
def test_parity(u, k):
    a = jacobi_sn_cn_dn(u, k)
    b = jacobi_sn_cn_dn(-u, k)
    assert abs(a[0] + b[0]) <= 1e-12
    assert abs(a[1] - b[1]) <= 1e-12
    assert abs(a[2] - b[2]) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(u=st.floats(min_value=-20.0, max_value=20.0), k=moduli)
def test_period_4K(u, k):
    K = complete_K(k)
    a = jacobi_sn_cn_dn(u, k)
    b = jacobi_sn_cn_dn(u + 4.0 * K, k)
    assert np.allclose(a, b, rtol=0.0, atol=1e-12)


def test_quarter_period_values():
    k = 0.6
    sn, cn, dn = jacobi_sn_cn_dn(complete_K(k), k)
    assert sn == pytest.approx(1.0, abs=1e-14)
    assert abs(cn) < 1e-14
    assert dn == pytest.approx(np.sqrt(1.0 - k * k), abs=1e-14)


@pytest.mark.parametrize("k", [0.0, 0.4, 0.95])
def test_derivative_of_sn(k):
    u = np.linspace(-10.0, 10.0, 201)
    h = 1e-5
    fd = (jacobi_sn_cn_dn(u + h, k)[0] - jacobi_sn_cn_dn(u - h, k)[0]) / (2 * h)
    _, cn, dn = jacobi_sn_cn_dn(u, k)
    assert np.max(np.abs(fd - cn * dn)) < 1e-6


def test_circular_limit():
    u = np.linspace(-5.0, 5.0, 50)
    sn, cn, dn = jacobi_sn_cn_dn(u, 0.0)
    assert np.allclose(sn, np.sin(u), atol=1e-15)
    assert np.allclose(cn, np.cos(u), atol=1e-15)
    assert np.all(dn == 1.0)


def test_scalar_input_gives_floats():
    sn, cn, dn = jacobi_sn_cn_dn(0.3, 0.5)
    assert all(isinstance(v, float) for v in (sn, cn, dn))
    assert jacobi_nd(0.3, 0.5) == pytest.approx(1.0 / dn)


@pytest.mark.parametrize("k", [1.0, 1.5, -0.1, float("nan")])
def test_bad_modulus_rejected(k):
    with pytest.raises(DomainError):
        check_modulus(k)
    with pytest.raises(DomainError):
        jacobi_sn_cn_dn(0.1, k)
