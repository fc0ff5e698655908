import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntfsep.betafac import EPS, beta_divergence, beta_terms, elementwise_power, mu_step, total_divergence

pos = st.floats(min_value=1e-3, max_value=1e3)
betas = st.floats(min_value=-1.0, max_value=3.0)


def test_closed_forms():
    assert beta_divergence(2.0, 1.0, 1) == pytest.approx(2 * math.log(2) - 1)
    assert beta_divergence(2.0, 1.0, 0) == pytest.approx(2 - math.log(2) - 1)
    assert beta_divergence(3.0, 1.0, 2) == pytest.approx(2.0)  # half squared error


def test_zero_observation():
    assert beta_divergence(0.0, 2.0, 1) == 2.0
    assert beta_divergence(0.0, 2.0, 0.5) == pytest.approx(2.0**0.5 / 0.5)
    with pytest.raises(ValueError, match="infinite"):
        beta_divergence(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        beta_divergence(0.0, 1.0, -0.5)


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (-1.0, 1.0), (1.0, -2.0)])
def test_domain_errors(a, b):
    with pytest.raises(ValueError):
        beta_divergence(a, b, 0.5)


@given(pos, pos, betas)
def test_nonnegative(a, b, beta):
    assert beta_divergence(a, b, beta) >= -1e-9 * max(1.0, a, b) ** max(beta, 1.0)


@given(pos, betas)
def test_zero_on_diagonal(a, beta):
    assert beta_divergence(a, a, beta) == 0.0


@given(pos, pos, st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=0.1, max_value=10.0))
def test_homogeneity(a, b, beta, lam):
    # d(la|lb) = l**beta d(a|b)
    lhs = beta_divergence(lam * a, lam * b, beta)
    rhs = lam**beta * beta_divergence(a, b, beta)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("beta", [0.0, 0.3, 1.0, 1.7, 2.0])
def test_total_matches_scalar(rng, beta):
    A = rng.uniform(0.1, 5, (6, 7))
    B = rng.uniform(0.1, 5, (6, 7))
    ref = sum(beta_divergence(a, b, beta) for a, b in zip(A.ravel(), B.ravel()))
    assert total_divergence(A, B, beta) == pytest.approx(ref, rel=1e-10)


def test_beta_terms_are_gradient_parts(rng):
    V = rng.uniform(0.1, 2, (5, 4))
    X = rng.uniform(0.1, 2, (5, 4))
    beta = 0.6
    neg, pos_ = beta_terms(V, X, beta)
    # d/dx d_beta(v|x) = x**(beta-1) - v x**(beta-2)
    grad = X ** (beta - 1) - V * X ** (beta - 2)
    np.testing.assert_allclose(pos_ - neg, grad, rtol=1e-12)


def test_beta_terms_floor():
    neg, pos_ = beta_terms(np.array([1.0]), np.array([0.0]), 0.5)
    assert np.isfinite(neg).all() and np.isfinite(pos_).all()
    assert pos_[0] == pytest.approx(EPS**-0.5)


def test_mu_step_keeps_sign_and_zeros():
    f = np.array([0.0, 1.0, 2.0])
    out = mu_step(np.array([1.0, 2.0, 0.0]), np.array([0.0, 1.0, 1.0]), f)
    assert out[0] == 0.0 and out[1] == pytest.approx(2.0) and out[2] == 0.0
    assert np.all(out >= 0)


def test_elementwise_power_real_and_complex():
    np.testing.assert_allclose(elementwise_power(np.array([4.0, 9.0]), 0.5), [2.0, 3.0])
    z = elementwise_power(np.array([-4.0 + 0j]), 0.5)
    assert abs(z[0]) == pytest.approx(2.0)


@settings(max_examples=50)
@given(st.floats(min_value=0.1, max_value=10), st.floats(min_value=0.1, max_value=10))
def test_continuity_at_special_betas(a, b):
    for b0 in (0.0, 1.0):
        for h in (1e-6, -1e-6):
            # the generic form loses ~eps / |h| to cancellation near a == b
            assert beta_divergence(a, b, b0 + h) == pytest.approx(beta_divergence(a, b, b0), rel=1e-4, abs=1e-7)
