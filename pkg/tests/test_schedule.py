import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergodrift.coupling import CouplingConfig, covering_interval, interval_schedule, step3_duration
from ergodrift.errors import DomainError


def poly(**kw):
    base = dict(mode="poly", alpha=0.8, rho=1.2, beta=0.8, theta=1.3)
    base.update(kw)
    return CouplingConfig(**base)


def test_poly_constraints_named():
    with pytest.raises(DomainError, match="alpha > max"):
        poly(alpha=0.6)
    with pytest.raises(DomainError, match="alpha < rho"):
        poly(alpha=1.3)
    with pytest.raises(DomainError, match="theta > 1/"):
        poly(theta=1.0)
    with pytest.raises(DomainError, match="needs rho"):
        CouplingConfig(mode="poly", rho=None, beta=1.0)


def test_exp_constraints_named():
    CouplingConfig(mode="exp", alpha=0.5, lam=1.0)
    with pytest.raises(DomainError, match="alpha < lambda"):
        CouplingConfig(mode="exp", alpha=1.5, lam=1.0)
    with pytest.raises(DomainError, match="alpha != zeta"):
        CouplingConfig(mode="exp", alpha=0.5, lam=1.0, zeta=0.5)
    with pytest.raises(DomainError, match="theta > 0"):
        CouplingConfig(mode="exp", alpha=0.5, lam=1.0, theta=0.0)


def test_misc_validation():
    for kw in (dict(c2=1), dict(varsigma=1.0), dict(t_star=0.0), dict(K=0.0), dict(horizon=-1)):
        with pytest.raises(DomainError):
            poly(**kw)
    with pytest.raises(DomainError):
        CouplingConfig(mode="weird")


def test_alpha_tilde_and_budget():
    c = poly(eps=0.0)
    # min(0.8, 0.8, 0.6) - 1/2
    assert c.alpha_tilde == pytest.approx(0.1)
    assert c.budget(3) == pytest.approx(2 ** -0.3)
    e = CouplingConfig(mode="exp", alpha=0.5, lam=1.0, zeta=2.0)
    assert e.alpha_tilde == 0.5
    assert c.k1 == c.K and poly(K1=2.0).k1 == 2.0


def test_speed():
    c = poly()
    assert c.speed(3) == pytest.approx(4**-0.8)
    e = CouplingConfig(mode="exp", alpha=0.5, lam=1.0)
    assert e.speed(2) == pytest.approx(math.exp(-1.0))


def test_interval_schedule_values():
    assert interval_schedule(0, 4, 100, "poly") == (101, 101)
    assert interval_schedule(1, 4, 100, "poly") == (102, 107)
    assert interval_schedule(2, 4, 100, "poly") == (116, 131)
    assert interval_schedule(3, 4, 100, "poly") == (132, 163)
    assert interval_schedule(2, 4, 100, "exp") == (108, 111)
    with pytest.raises(DomainError):
        interval_schedule(-1, 4, 0, "poly")


@given(st.integers(2, 64), st.integers(0, 10_000), st.sampled_from(["poly", "exp"]))
def test_covering_intervals_tile_time(c2, tau, mode):
    prev_end = interval_schedule(0, c2, tau, mode)[1]
    for ell in range(1, 8):
        s, e = covering_interval(ell, c2, tau, mode)
        assert s == prev_end + 1 and e >= s
        prev_end = e


def test_step3_duration():
    c = poly(t_star=10.0, varsigma=2.0, theta=1.3)
    assert step3_duration(1, 0, c) == 20
    assert step3_duration(2, 1, c) == math.ceil(40 * 2**1.3)
    e = CouplingConfig(mode="exp", alpha=0.5, lam=1.0, t_star=10.0, varsigma=1.2, theta=1.0)
    assert step3_duration(1, 3, e) == math.ceil(10 + 1.2 + 3)
    # floating noise must not add a step
    assert step3_duration(1, 5, poly(rho=1.9, t_star=10.0, varsigma=1.0 + 1e-15, theta=1.0)) == 320
    with pytest.raises(DomainError):
        step3_duration(0, 0, c)


@given(st.integers(1, 30), st.integers(0, 20))
def test_step3_monotone(j, ell):
    c = poly()
    assert step3_duration(j + 1, ell, c) >= step3_duration(j, ell, c)
    assert step3_duration(j, ell + 1, c) >= step3_duration(j, ell, c)


def test_replace_and_fields():
    c = poly()
    assert c.replace(K=3.0).K == 3.0
    assert "varsigma" in CouplingConfig.field_names()
