import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodrift.coeffs import (
    check_hypothesis_poly,
    check_log_convex,
    covariance,
    exp_inverse_rate,
    fbm_kappa,
    make_coeffs,
    make_custom_coeffs,
    make_exp_coeffs,
    make_fbm_coeffs,
    make_poly_coeffs,
    read_coeffs_csv,
    write_coeffs_csv,
)
from ergodrift.errors import DivergentInverseWarning, DomainError, TruncationError

# high-precision references (mpmath, 30 digits)
KAPPA = {
    0.1: 0.35768577342233513571,
    0.3: 0.73028293407992299183,
    0.6: 1.076005184131807291,
    0.9: 0.8112206481433523627,
}
FBM_H03 = {1: -0.1972584382397693179, 2: -0.077961898082535150625, 10: -0.0109977099394757736}


@pytest.mark.parametrize("H,ref", sorted(KAPPA.items()))
def test_fbm_kappa(H, ref):
    assert fbm_kappa(H) == pytest.approx(ref, rel=1e-14)


def test_fbm_kappa_brownian():
    assert fbm_kappa(0.5) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("k,ref", sorted(FBM_H03.items()))
def test_fbm_values(k, ref):
    a = make_fbm_coeffs(0.3, 1.0, 16)
    assert a.values[0] == 1.0
    assert a.values[k] == pytest.approx(ref, rel=1e-13)


def test_fbm_step_changes_only_raw_scale():
    a1 = make_fbm_coeffs(0.3, 1.0, 32)
    a2 = make_fbm_coeffs(0.3, 0.01, 32)
    np.testing.assert_allclose(a1.values, a2.values, rtol=1e-14)
    assert a2.raw_a0 == pytest.approx(a1.raw_a0 * 0.01**0.3, rel=1e-14)


def test_fbm_sign_pattern():
    assert np.all(make_fbm_coeffs(0.3, 1.0, 100).values[1:] < 0)
    assert np.all(make_fbm_coeffs(0.7, 1.0, 100).values[1:] > 0)
    np.testing.assert_array_equal(make_fbm_coeffs(0.5, 1.0, 10).values[1:], 0.0)


def test_poly_values_and_domain():
    a = make_poly_coeffs(1.2, 10)
    assert a.K == 10 and len(a) == 11
    assert a.values[3] == pytest.approx(4**-1.2, rel=1e-15)
    assert a.tail_exponent == 1.2
    with pytest.raises(DomainError):
        make_poly_coeffs(0.5, 10)
    with pytest.raises(DomainError):
        make_poly_coeffs(1.0, 0)


def test_values_read_only():
    a = make_poly_coeffs(1.2, 10)
    with pytest.raises(ValueError):
        a.values[0] = 2.0


def test_exp_values_and_zeta():
    a = make_exp_coeffs(0.5, 0.5, 20)
    assert a.values[0] == 1.0
    assert a.values[4] == pytest.approx(0.5 * math.exp(-2.0), rel=1e-15)
    assert exp_inverse_rate(0.5, 0.5) == pytest.approx(0.5 + math.log(2.0), rel=1e-15)
    assert exp_inverse_rate(1.0, 1.0) == math.inf
    assert exp_inverse_rate(-0.2, 1.0) == pytest.approx(1.0 - math.log(1.2), rel=1e-15)


def test_exp_divergent_warning():
    with pytest.warns(DivergentInverseWarning):
        a = make_exp_coeffs(3.0, 0.5, 10)
    assert "inverse may diverge" in a.flags
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_exp_coeffs(1.0, 1.0, 10)


def test_custom_normalizes():
    a = make_custom_coeffs([2.0, 1.0, 0.5])
    np.testing.assert_array_equal(a.values, [1.0, 0.5, 0.25])
    assert a.raw_a0 == 2.0
    with pytest.raises(DomainError):
        make_custom_coeffs([0.0, 1.0])
    with pytest.raises(DomainError):
        make_custom_coeffs([1.0, np.nan])


def test_make_coeffs_dispatch():
    assert make_coeffs("poly", 5, rho=1.5).family == "polynomial"
    assert make_coeffs("exp", 5, C_a=1.0, lam=1.0).family == "exponential"
    assert make_coeffs("fbm", 5, H=0.3).family == "fbm"
    with pytest.raises(DomainError):
        make_coeffs("nope", 5)


def test_covariance_exp_truncated_and_infinite():
    a = make_exp_coeffs(1.0, 1.0, 64)
    c = covariance(a, 10)
    # infinite-sum value, mpmath
    assert c[1] == pytest.approx(0.42545906411966077257, abs=1e-12)
    ref = sum(a.values[i] * a.values[i + 1] for i in range(64))
    assert c[1] == pytest.approx(ref, rel=1e-14)
    assert 0 < c.truncation_error_bound < 1e-25


def test_covariance_guard():
    with pytest.raises(TruncationError):
        covariance(make_poly_coeffs(1.2, 10), 6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.6, 3.0), st.integers(20, 600), st.integers(0, 10))
def test_covariance_matches_direct_sum(rho, K, k):
    a = make_poly_coeffs(rho, K)
    c = covariance(a, 10)
    v = a.values
    ref = float(np.dot(v[: K + 1 - k], v[k:]))
    assert c[k] == pytest.approx(ref, rel=1e-10, abs=1e-14)
    assert c[0] == pytest.approx(a.sum_squares, rel=1e-14)


def test_covariance_poly_bound_covers_truncation():
    rho = 0.8
    short = covariance(make_poly_coeffs(rho, 400), 5)
    long = covariance(make_poly_coeffs(rho, 200_000), 5)
    err = abs(long[0] - short[0])
    assert err <= short.truncation_error_bound


def test_hypothesis_check():
    r = check_hypothesis_poly(make_poly_coeffs(1.2, 1000), 1.2, 2.2)
    assert r.passed and r.C_rho == pytest.approx(1.0)
    assert not check_hypothesis_poly(make_poly_coeffs(1.2, 1000), 1.2, 1.5).kappa_ok


def test_log_convex():
    assert check_log_convex(make_poly_coeffs(1.2, 100_000))
    assert check_log_convex(make_exp_coeffs(1.0, 1.0, 50).values[1:])
    assert not check_log_convex(make_fbm_coeffs(0.3, 1.0, 50))
    assert not check_log_convex([1.0, 0.1, 0.5, 0.01])


def test_csv_round_trip(tmp_path):
    a = make_fbm_coeffs(0.3, 1.0, 50)
    p = tmp_path / "a.csv"
    write_coeffs_csv(p, a.values, header="fbm H=0.3")
    text = p.read_text().splitlines()
    assert text[0].startswith("#") and text[1] == "k,a_k"
    np.testing.assert_array_equal(read_coeffs_csv(p), a.values)


def test_csv_gap_rejected(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("k,a_k\n0,1\n2,0.5\n")
    with pytest.raises(DomainError):
        read_coeffs_csv(p)
