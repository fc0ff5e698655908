import numpy as np
import pytest

from ntfsep.localgauss import (
    ModelParams,
    apply_gain,
    assemble_field,
    empirical_covariance,
    estep_statistics,
    hanning_window,
    neg_log_likelihood,
    psd_project,
    sigma_x,
    source_covariances,
    tensor_views,
    wiener_gain,
    wiener_gains,
)


def random_params(rng, N=3, F=6, L=5, M=2, K=3):
    bases = [rng.random((F, K)) for _ in range(N)]
    coefs = [rng.random((K, L)) for _ in range(N)]
    a = rng.standard_normal((N, F, M, M)) + 1j * rng.standard_normal((N, F, M, M))
    return ModelParams(bases, coefs, a @ np.conj(np.swapaxes(a, -1, -2)))


def test_hanning_window():
    np.testing.assert_allclose(hanning_window(), np.outer([0.5, 1, 0.5], [0.5, 1, 0.5]))
    with pytest.raises(ValueError):
        hanning_window(4)


def test_model_params_validation(rng):
    p = random_params(rng)
    with pytest.raises(ValueError, match="chain"):
        ModelParams([np.ones((5, 3))] * 3, p.coefs, p.spatial)
    with pytest.raises(ValueError, match="spatial"):
        ModelParams(p.bases, p.coefs, np.ones((3, 6, 2)))


def test_sigma_x_is_sum(rng):
    p = random_params(rng)
    sc = source_covariances(p)
    np.testing.assert_allclose(sigma_x(p), sc.sum(axis=0))
    v = p.bases[1] @ p.coefs[1]
    np.testing.assert_allclose(sc[1, 2, 3], v[2, 3] * p.spatial[1, 2])


@pytest.mark.parametrize("M", [1, 2, 3])
def test_partition_of_identity(rng, M):
    p = random_params(rng, M=M)
    G = wiener_gains(source_covariances(p), 0.0)
    np.testing.assert_allclose(G.sum(axis=0), np.broadcast_to(np.eye(M), G.shape[1:]), atol=1e-10)
    G1 = wiener_gains(source_covariances(p), 1.0)
    np.testing.assert_allclose(G1, np.broadcast_to(np.eye(M), G1.shape), atol=1e-10)


def test_partition_with_rank_one_sources(rng):
    # singular source covariances rely on the diagonal loading
    F, L, M = 4, 3, 2
    h = rng.standard_normal((3, F, M)) + 1j * rng.standard_normal((3, F, M))
    R = h[..., :, None] * np.conj(h[..., None, :])
    p = ModelParams([np.ones((F, 1))] * 3, [np.ones((1, L))] * 3, R)
    G = wiener_gains(source_covariances(p), 0.0)
    np.testing.assert_allclose(G.sum(axis=0), np.broadcast_to(np.eye(M), G.shape[1:]), atol=1e-10)


def test_gain_of_single_source(rng):
    p = random_params(rng)
    G = wiener_gain(p, 1)
    np.testing.assert_allclose(G, wiener_gains(source_covariances(p))[1])


def test_mu_rejects_out_of_range(rng):
    with pytest.raises(ValueError):
        wiener_gains(source_covariances(random_params(rng)), 1.5)


def test_apply_gain_identity(rng):
    X = rng.standard_normal((3, 4, 2)) + 1j * rng.standard_normal((3, 4, 2))
    np.testing.assert_allclose(apply_gain(np.broadcast_to(np.eye(2), (3, 4, 2, 2)), X), X)


def test_empirical_covariance_without_window(rng):
    X = rng.standard_normal((3, 4, 2)) + 1j * rng.standard_normal((3, 4, 2))
    R = empirical_covariance(X, None)
    np.testing.assert_allclose(R, X[..., :, None] * np.conj(X[..., None, :]))


def test_estep_with_identity_gain(rng):
    # G = I means the posterior covariance is the empirical one
    X = rng.standard_normal((3, 4, 2)) + 1j * rng.standard_normal((3, 4, 2))
    eye = np.broadcast_to(np.eye(2, dtype=complex), (3, 4, 2, 2))
    np.testing.assert_allclose(estep_statistics(X, eye, eye), empirical_covariance(X))


def test_tensor_views_round_trip(rng):
    a = rng.standard_normal((3, 4, 3, 3)) + 1j * rng.standard_normal((3, 4, 3, 3))
    R = a @ np.conj(np.swapaxes(a, -1, -2))
    d, off = tensor_views(R, floor=None)
    assert sorted(off) == [(0, 1), (0, 2), (1, 2)]
    np.testing.assert_allclose(assemble_field(d, off), R)


def test_psd_project(rng):
    A = np.diag([1.0, -2.0]).astype(complex)[None]
    np.testing.assert_allclose(psd_project(A), np.diag([1.0, 0.0])[None], atol=1e-15)
    a = rng.standard_normal((5, 2, 2)) + 1j * rng.standard_normal((5, 2, 2))
    B = a @ np.conj(np.swapaxes(a, -1, -2))
    np.testing.assert_allclose(psd_project(B), B)


def test_likelihood_minimised_at_truth(rng):
    # tr(S^-1 R) + log det S is minimal over S at S = R
    a = rng.standard_normal((4, 5, 2, 2)) + 1j * rng.standard_normal((4, 5, 2, 2))
    R = a @ np.conj(np.swapaxes(a, -1, -2)) + np.eye(2)
    best = neg_log_likelihood(R, R)
    for s in (0.5, 0.9, 1.1, 2.0):
        assert neg_log_likelihood(R, s * R) > best
