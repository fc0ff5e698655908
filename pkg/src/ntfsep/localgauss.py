"""Local Gaussian model: covariances, smooth Wiener filtering and E-step statistics.

Array conventions
-----------------
spectrogram      (F, L, M) complex, F bins, L frames, M channels
Hermitian field  (F, L, M, M) complex, one Hermitian matrix per TF point
spatial matrices (N, F, M, M) complex, time-invariant per source
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .betafac import EPS

DELTA = 1e-9
"""Diagonal loading, relative to ``trace(Sigma_x) / M``, used before inversion."""
LOAD_FLOOR = 1e-30
"""Absolute lower bound on the loading, for TF points with zero trace."""

__all__ = [
    "DELTA",
    "ModelParams",
    "hanning_window",
    "hermitize",
    "empirical_covariance",
    "source_variances",
    "source_covariances",
    "sigma_x",
    "wiener_gains",
    "wiener_gain",
    "apply_gain",
    "estep_statistics",
    "psd_project",
    "tensor_views",
    "assemble_field",
    "neg_log_likelihood",
]


@dataclass
class ModelParams:
    """Per-source spectral bases, activations and spatial covariances.

    Attributes
    ----------
    bases : list of ndarray, each (F, K_n), nonnegative
    coefs : list of ndarray, each (K_n, L), nonnegative
    spatial : ndarray, (N, F, M, M) complex Hermitian
    """

    bases: list
    coefs: list
    spatial: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.spatial = np.asarray(self.spatial, dtype=np.complex128)
        if self.spatial.ndim != 4:
            raise ValueError(f"spatial must be (N, F, M, M), got {self.spatial.shape}")
        N, F = self.spatial.shape[:2]
        if len(self.bases) != N or len(self.coefs) != N:
            raise ValueError(
                f"{len(self.bases)} bases / {len(self.coefs)} coefs for {N} spatial matrices"
            )
        L = None
        for n, (U, W) in enumerate(zip(self.bases, self.coefs)):
            if U.shape[0] != F or U.shape[1] != W.shape[0]:
                raise ValueError(f"source {n}: U {U.shape} and W {W.shape} do not chain with F={F}")
            if L is None:
                L = W.shape[1]
            elif W.shape[1] != L:
                raise ValueError(f"source {n}: {W.shape[1]} frames, expected {L}")

    @property
    def n_sources(self):
        return self.spatial.shape[0]

    @property
    def n_channels(self):
        return self.spatial.shape[-1]

    def copy(self):
        return ModelParams(
            [U.copy() for U in self.bases],
            [W.copy() for W in self.coefs],
            self.spatial.copy(),
            list(self.labels),
        )


def hanning_window(size=3):
    """Separable 2-D Hann neighbourhood of odd ``size`` (nonzero taps only).

    ``size=3`` gives the outer product of ``[0.5, 1, 0.5]``.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError("size must be a positive odd integer")
    taps = np.hanning(size + 2)[1:-1]
    return np.outer(taps, taps)


def hermitize(A):
    """Exactly Hermitian part ``(A + A^H) / 2`` over the last two axes."""
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def empirical_covariance(spec, win=None):
    """Per-point empirical covariance of a multichannel spectrogram.

    With ``win=None`` the rank-1 outer products ``x x^H``; otherwise their
    ``win``-weighted local average over neighbouring bins and frames, with
    the weights renormalised at the borders.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    if spec.ndim != 3:
        raise ValueError(f"expected (F, L, M) spectrogram, got {spec.shape}")
    if win is None:
        out = spec[..., :, None] * np.conj(spec[..., None, :])
        return hermitize(out)
    win = np.asarray(win, dtype=np.float64)
    if win.ndim != 2 or win.shape[0] % 2 == 0 or win.shape[1] % 2 == 0:
        raise ValueError(f"window must be 2-D with odd sizes, got {win.shape}")
    if np.any(win < 0) or win.sum() <= 0:
        raise ValueError("window weights must be nonnegative with a positive sum")
    return kernels.local_cov(spec, win)


def source_variances(params):
    """``v_n = U_n W_n`` stacked to shape (N, F, L)."""
    return np.stack([U @ W for U, W in zip(params.bases, params.coefs)])


def source_covariances(params, variances=None):
    """``Sigma_c_n(f, l) = v_n(f, l) R_n(f)``, shape (N, F, L, M, M)."""
    v = source_variances(params) if variances is None else variances
    return v[..., None, None] * params.spatial[:, :, None, :, :]


def sigma_x(params, sigma_c=None):
    """Mixture covariance, the sum of the source covariances, (F, L, M, M)."""
    sc = source_covariances(params) if sigma_c is None else sigma_c
    return sc.sum(axis=0)


def wiener_gains(sigma_c, mu=0.0, sigma_x=None):
    """Smooth multichannel Wiener gains for all sources, (N, F, L, M, M).

    ``G_n = S_n [(1 - mu) S_x + mu S_n]^{-1}`` after diagonal loading of
    ``DELTA * trace(S_x) / M`` split evenly over the sources; ``mu=0`` is
    the plain Wiener filter and ``mu=1`` the identity.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    sigma_c = np.asarray(sigma_c, dtype=np.complex128)
    sx = sigma_c.sum(axis=0) if sigma_x is None else sigma_x
    try:
        return kernels.smooth_gains(sigma_c, sx, float(mu), DELTA, LOAD_FLOOR)
    except np.linalg.LinAlgError:
        tr = np.real(np.trace(sx, axis1=-2, axis2=-1))
        bad = np.argwhere(~np.isfinite(tr) | (tr < 0))
        where = f" near (bin, frame) {tuple(bad[0])}" if len(bad) else ""
        raise np.linalg.LinAlgError(f"singular regularised covariance{where}") from None


def wiener_gain(params, n, sigma_x=None, mu=0.0):
    """Gain of source ``n`` only; see :func:`wiener_gains`."""
    sc = source_covariances(params)
    return wiener_gains(sc, mu, sigma_x)[n]


def apply_gain(gain, spec):
    """``c(f, l) = G(f, l) x(f, l)`` for every TF point."""
    gain = np.asarray(gain)
    spec = np.asarray(spec)
    if gain.shape[:-1] != spec.shape or gain.shape[-1] != spec.shape[-1]:
        raise ValueError(f"gain {gain.shape} does not match spectrogram {spec.shape}")
    return np.einsum("flij,flj->fli", gain, spec)


def estep_statistics(c_hat, gain, sigma_c, win=None):
    """Posterior second-order statistics of one source image.

    ``R~_c = R^_c + (I - G) Sigma_c`` where ``R^_c`` is the (windowed)
    empirical covariance of the current image estimate ``c_hat``.
    """
    r_hat = empirical_covariance(c_hat, win)
    if gain.shape != r_hat.shape or sigma_c.shape != r_hat.shape:
        raise ValueError("c_hat, gain and sigma_c disagree in shape")
    return hermitize(r_hat + sigma_c - gain @ sigma_c)


def psd_project(field):
    """Clamp negative eigenvalues of each Hermitian matrix to zero.

    Matrices that are already PSD are returned untouched, so the
    projection is idempotent.
    """
    field = hermitize(np.asarray(field, dtype=np.complex128))
    w, V = np.linalg.eigh(field)
    neg = w.min(axis=-1) < 0
    if not np.any(neg):
        return field
    out = field.copy()
    wc = np.maximum(w[neg], 0.0)
    Vn = V[neg]
    out[neg] = hermitize((Vn * wc[..., None, :]) @ np.conj(np.swapaxes(Vn, -1, -2)))
    return out


def tensor_views(field, floor=EPS):
    """Split a Hermitian field into its diagonal tensor and off-diagonal planes.

    Returns
    -------
    diag : ndarray (..., M) real, floored at ``floor``
    offdiag : dict mapping ``(m1, m2)`` with ``m1 < m2`` to (...) complex
    """
    field = np.asarray(field)
    M = field.shape[-1]
    d = np.arange(M)
    diag = np.real(field[..., d, d])
    if floor is not None:
        diag = np.maximum(diag, floor)
    off = {(i, j): field[..., i, j].copy() for i in range(M) for j in range(i + 1, M)}
    return diag, off


def assemble_field(diag, offdiag):
    """Inverse of :func:`tensor_views`; lower triangle set by conjugation."""
    diag = np.asarray(diag, dtype=np.float64)
    M = diag.shape[-1]
    out = np.zeros(diag.shape + (M,), dtype=np.complex128)
    d = np.arange(M)
    out[..., d, d] = diag
    for (i, j), val in offdiag.items():
        if not i < j < M:
            raise ValueError(f"off-diagonal key {(i, j)} invalid for M={M}")
        out[..., i, j] = val
        out[..., j, i] = np.conj(val)
    return out


def neg_log_likelihood(rx_tilde, sx):
    """``sum tr(S_x^{-1} R~_x) + log det(pi S_x)`` over all TF points.

    ``S_x`` gets the same diagonal loading as :func:`wiener_gains`.
    """
    M = sx.shape[-1]
    tr = np.real(np.trace(sx, axis1=-2, axis2=-1))
    load = np.maximum(DELTA * tr / M, LOAD_FLOOR)
    s = sx + load[..., None, None] * np.eye(M)
    sol = np.linalg.solve(s, rx_tilde)
    quad = np.real(np.trace(sol, axis1=-2, axis2=-1))
    _, logdet = np.linalg.slogdet(s)
    return float(np.sum(quad + logdet + M * np.log(np.pi)))
