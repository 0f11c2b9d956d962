import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodrift.errors import DomainError
from ergodrift.rates import (
    convolution_bound_check,
    convolution_sum,
    rate_v,
    rate_v_closed_poly,
    rate_v_fbm,
)


def _objective(alpha, beta, rho):
    return min(1.0, 2.0 * (rho - alpha)) * (min(alpha, beta, alpha + beta - 1.0) - 0.5)


@pytest.mark.parametrize(
    "beta,rho,ref",
    [(1.0, 1.0, 0.125), (1.5, 1.5, 0.5), (2.0, 0.9, 0.08), (0.8, 1.2, 0.125)],
)
def test_rate_v_values(beta, rho, ref):
    v, arg = rate_v(beta, rho)
    assert v == pytest.approx(ref, abs=1e-6)
    assert max(0.5, 1.5 - beta) < arg < rho


@pytest.mark.parametrize("rho", [0.8, 0.9, 1.0, 1.1, 1.3, 1.5])
def test_rate_v_closed_poly(rho):
    assert rate_v(rho, rho)[0] == pytest.approx(rate_v_closed_poly(rho), abs=1e-6)


def test_closed_poly_branch_values():
    assert rate_v_closed_poly(1.0) == pytest.approx(0.125)
    assert rate_v_closed_poly(0.8) == pytest.approx(0.005)
    assert rate_v_closed_poly(2.0) == pytest.approx(1.125)


@pytest.mark.parametrize("rho", [1.6, 2.0, 3.0])
def test_rate_v_diagonal_beyond_three_halves(rho):
    # for rho > 3/2 the objective peaks at the kink alpha = rho - 1/2, value rho - 1,
    # below the quadratic branch of the closed form
    v, arg = rate_v(rho, rho)
    assert v == pytest.approx(rho - 1.0, abs=1e-6)
    assert arg == pytest.approx(rho - 0.5, abs=1e-4)
    assert v < rate_v_closed_poly(rho)


@pytest.mark.parametrize("H", [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45])
def test_rate_v_fbm(H):
    assert rate_v(H + 0.5, 1.5 - H)[0] == pytest.approx(rate_v_fbm(H), abs=1e-6)
    assert rate_v(H + 0.5, 1.5 - H)[0] < rate_v(1.5 - H, 1.5 - H)[0]


def test_closed_form_guards():
    with pytest.raises(DomainError):
        rate_v_closed_poly(0.7)
    with pytest.raises(DomainError):
        rate_v_fbm(0.5)
    with pytest.raises(DomainError):
        rate_v(0.6, 0.6)
    with pytest.raises(DomainError):
        rate_v(0.4, 2.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.55, 3.0), st.floats(0.55, 3.0))
def test_rate_v_is_a_supremum(beta, rho):
    lo = max(0.5, 1.5 - beta)
    if rho <= lo + 1e-3:
        return
    v, arg = rate_v(beta, rho)
    assert v == pytest.approx(_objective(arg, beta, rho), abs=1e-12)
    grid = np.linspace(lo, rho, 2001)[1:-1]
    assert v >= max(_objective(x, beta, rho) for x in grid) - 1e-9
    assert v > 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.8, 2.5), st.floats(0.01, 0.5))
def test_rate_v_monotone_in_rho(beta, d):
    rho = max(0.6, 1.6 - beta)
    assert rate_v(beta, rho + d)[0] >= rate_v(beta, rho)[0] - 1e-9


def test_convolution_sum_exact():
    # S(9) for alpha = beta = 2, exact rational arithmetic
    ref = sum(Fraction(1, (k + 1) ** 2) * Fraction(1, (10 - k) ** 2) for k in range(10))
    assert ref == Fraction(21857, 635040)
    assert convolution_sum(2.0, 2.0, 9) == pytest.approx(float(ref), rel=1e-15)


def test_convolution_sum_argument_order():
    n = 20
    ref = sum((k + 1) ** -0.7 * (n + 1 - k) ** -1.3 for k in range(n + 1))
    assert convolution_sum(1.3, 0.7, n) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("alpha,beta", [(1.5, 2.0), (2.0, 0.6)])
def test_convolution_bound_stabilizes_small(alpha, beta):
    rep = convolution_bound_check(alpha, beta, n_max=1_000_000)
    assert rep.passed and rep.growth_ratio <= 1.05


def test_convolution_bound_flags_log_growth():
    rep = convolution_bound_check(1.0, 0.8, n_max=1_000_000)
    assert not rep.passed and rep.growth_ratio > 1.05


def test_convolution_bound_eps_restores():
    assert convolution_bound_check(1.0, 0.8, n_max=1_000_000, eps=0.05).passed


def test_convolution_guards():
    with pytest.raises(DomainError):
        convolution_bound_check(0.3, 0.4)
    with pytest.raises(DomainError):
        convolution_bound_check(1.5, 2.0, n_max=50)
