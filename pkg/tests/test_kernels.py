"""Every backend must agree with the NumPy reference."""

import numpy as np
import pytest

from ntfsep import kernels
from ntfsep._kernels_py import EPS
from ntfsep.localgauss import hanning_window

BACKENDS = sorted(kernels.BACKENDS)


def test_selected_backend_is_known():
    assert kernels.BACKEND in kernels.BACKENDS


@pytest.fixture(params=BACKENDS)
def impl(request):
    return kernels.BACKENDS[request.param]


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.3, 1.0, 1.5, 2.0])
def test_beta_terms(impl, rng, beta):
    obs = rng.gamma(1.0, size=(7, 9))
    model = rng.gamma(1.0, size=(7, 9))
    model[0, 0] = 0.0  # exercises the floor
    neg, pos = impl.beta_terms(obs, model, beta)
    m = np.maximum(model, EPS)
    np.testing.assert_allclose(pos, m ** (beta - 1), rtol=1e-12)
    np.testing.assert_allclose(neg, obs * m ** (beta - 2), rtol=1e-12)
    assert neg.shape == model.shape


@pytest.mark.parametrize("beta", [0.0, 0.3, 1.0, 1.5, 2.0])
def test_beta_div_sum(impl, rng, beta):
    a = rng.gamma(1.0, size=(6, 5))
    b = rng.gamma(1.0, size=(6, 5))
    if beta > 0:
        a[0, 0] = 0.0
    ref = kernels.BACKENDS["python"].beta_div_sum(a, b, beta)
    assert impl.beta_div_sum(a, b, beta) == pytest.approx(ref, rel=1e-10)


def test_beta_div_sum_unbounded(impl):
    assert impl.beta_div_sum(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 0.0) == np.inf
    assert impl.beta_div_sum(np.array([0.0]), np.array([1.0]), -1.0) == np.inf


@pytest.mark.parametrize("M", [1, 2, 3])
def test_local_cov(impl, rng, M):
    x = rng.standard_normal((8, 6, M)) + 1j * rng.standard_normal((8, 6, M))
    win = hanning_window()
    out = impl.local_cov(x, win)
    # brute force at an edge point and an interior point
    for f, l in [(0, 0), (4, 3)]:
        acc = np.zeros((M, M), complex)
        wsum = 0.0
        for a in range(3):
            for b in range(3):
                ff, ll = f + a - 1, l + b - 1
                if 0 <= ff < 8 and 0 <= ll < 6:
                    acc += win[a, b] * np.outer(x[ff, ll], np.conj(x[ff, ll]))
                    wsum += win[a, b]
        np.testing.assert_allclose(out[f, l], acc / wsum, rtol=1e-12)
    np.testing.assert_array_equal(out, np.conj(np.swapaxes(out, -1, -2)))


@pytest.mark.parametrize("M", [1, 2, 3])
def test_smooth_gains_backends_agree(impl, rng, M):
    N = 3
    a = rng.standard_normal((N, 4, 5, M, M)) + 1j * rng.standard_normal((N, 4, 5, M, M))
    sc = a @ np.conj(np.swapaxes(a, -1, -2))
    sx = sc.sum(axis=0)
    ref = kernels.BACKENDS["python"].smooth_gains(sc, sx, 0.3, 1e-9, 1e-30)
    np.testing.assert_allclose(impl.smooth_gains(sc, sx, 0.3, 1e-9, 1e-30), ref, rtol=1e-9, atol=1e-12)
