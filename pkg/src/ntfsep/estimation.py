"""M-step: activations and spatial weights by multiplicative updates.

For one source with fixed spectral basis ``U`` (F, K), the diagonal of its
posterior covariance forms an (F, L, M) tensor ``Vc``; slice ``m`` is
modelled as ``diag(vr[m]) @ U @ W`` with ``vr`` of shape (M, F) holding the
diagonal of ``R(f)``. The off-diagonal entries ``R_ij(f)`` are then fitted
to the matching complex off-diagonal observations with ``U`` and ``W``
held fixed.
"""

import numpy as np

from .betafac import EPS, beta_terms, elementwise_power, mu_step, total_divergence
from .localgauss import ModelParams, assemble_field, psd_project, tensor_views

__all__ = [
    "update_w",
    "update_spatial_diag",
    "update_spatial_offdiag",
    "diag_objective",
    "offdiag_objective",
    "init_coefs",
    "normalize_gauge",
    "estimate_source",
    "estimate_parameters",
]


def _check_dims(Vc, U, W, vr):
    F, L, M = Vc.shape
    if U.shape[0] != F or W.shape != (U.shape[1], L) or vr.shape != (M, F):
        raise ValueError(
            f"inconsistent shapes: Vc {Vc.shape}, U {U.shape}, W {W.shape}, vr {vr.shape}"
        )


def update_w(Vc, U, W, vr, beta):
    """One MU step on the activations shared by all channel slices.

    Numerator and denominator are accumulated over the slices (in channel
    order) before the ratio is taken.
    """
    Vc = np.asarray(Vc, dtype=np.float64)
    _check_dims(Vc, U, W, vr)
    P = U @ W
    num = np.zeros_like(W)
    den = np.zeros_like(W)
    for m in range(Vc.shape[2]):
        r = vr[m][:, None]
        neg, pos = beta_terms(Vc[:, :, m], r * P, beta)
        num += U.T @ (r * neg)
        den += U.T @ (r * pos)
    return mu_step(num, den, W)


def update_spatial_diag(Vc_m, U, W, vr_m, beta):
    """One MU step on the diagonal spatial weights of a single channel."""
    Vc_m = np.asarray(Vc_m, dtype=np.float64)
    if Vc_m.shape != (U.shape[0], W.shape[1]) or vr_m.shape != (U.shape[0],):
        raise ValueError(f"inconsistent shapes: slice {Vc_m.shape}, vr {vr_m.shape}")
    P = U @ W
    neg, pos = beta_terms(Vc_m, vr_m[:, None] * P, beta)
    return mu_step(np.sum(neg * P, axis=1), np.sum(pos * P, axis=1), vr_m)


def update_spatial_offdiag(V_off, U, W, r_off, beta):
    """One MU step on a complex off-diagonal spatial weight ``R_ij(f)``.

    The model ``r(f) * (U W)(f, l)`` is complex. Powers of it keep its
    phase (see :func:`~ntfsep.betafac.elementwise_power`) and the
    observation is paired with the conjugate model phase, so the ratio is
    real and positive at an exact fit and real data reproduce the diagonal
    update.
    """
    V_off = np.asarray(V_off)
    r_off = np.asarray(r_off, dtype=np.complex128)
    if V_off.shape != (U.shape[0], W.shape[1]) or r_off.shape != (U.shape[0],):
        raise ValueError(f"inconsistent shapes: obs {V_off.shape}, r {r_off.shape}")
    P = U @ W
    model = r_off[:, None] * P
    neg = V_off * np.conj(elementwise_power(model, beta - 2.0))
    pos = np.abs(elementwise_power(model, beta - 1.0))
    num = np.sum(neg * P, axis=1)
    den = np.maximum(np.sum(pos * P, axis=1), EPS)
    return r_off * (num / den)


def diag_objective(Vc, U, W, vr, beta):
    """Sum over channel slices of ``d_beta(Vc_m | diag(vr_m) U W)``."""
    P = U @ W
    return sum(
        total_divergence(Vc[:, :, m], vr[m][:, None] * P, beta) for m in range(Vc.shape[2])
    )


def offdiag_objective(V_off, U, W, r_off):
    """Squared error of the off-diagonal fit (diagnostic only)."""
    return float(np.sum(np.abs(V_off - r_off[:, None] * (U @ W)) ** 2))


def init_coefs(Vc, U, rng):
    """Random activations in (0.5, 1.5), rescaled to the data's mean level."""
    L = Vc.shape[1]
    W = rng.uniform(0.5, 1.5, size=(U.shape[1], L))
    model = (U @ W).mean()
    if model > 0 and Vc.mean() > 0:
        W *= Vc.mean() / model
    return W


def normalize_gauge(W, vr, r_off=None):
    """Fix the scale split between activations and spatial weights.

    All spatial weights are divided by the mean diagonal weight and the
    activations multiplied by it, which leaves every model product unchanged.
    """
    c = vr.mean()
    if not c > 0:
        return W, vr, r_off
    W = W * c
    vr = vr / c
    if r_off is not None:
        r_off = {k: v / c for k, v in r_off.items()}
    return W, vr, r_off


def estimate_source(Vc, V_off, U, W, vr, r_off, iters, beta, history=None):
    """Run ``iters`` rounds of W / diagonal updates, then the off-diagonal update.

    Parameters
    ----------
    Vc : (F, L, M) nonnegative diagonal observations
    V_off : dict ``(i, j) -> (F, L)`` complex off-diagonal observations
    U : (F, K) fixed spectral basis
    W : (K, L) initial activations
    vr : (M, F) initial diagonal spatial weights
    r_off : dict ``(i, j) -> (F,)`` initial off-diagonal weights
    history : list, optional
        Receives the diagonal objective after every round.

    Returns
    -------
    W, vr, r_off
    """
    Vc = np.maximum(np.asarray(Vc, dtype=np.float64), EPS)
    W = np.array(W, dtype=np.float64)
    vr = np.array(vr, dtype=np.float64)
    for _ in range(iters):
        W = update_w(Vc, U, W, vr, beta)
        for m in range(Vc.shape[2]):
            vr[m] = update_spatial_diag(Vc[:, :, m], U, W, vr[m], beta)
        if history is not None:
            history.append(diag_objective(Vc, U, W, vr, beta))
    W, vr, _ = normalize_gauge(W, vr)
    r_off = {k: update_spatial_offdiag(V_off[k], U, W, r_off[k], beta) for k in sorted(r_off)}
    return W, vr, r_off


def spatial_from_weights(vr, r_off):
    """Assemble ``R(f)`` (F, M, M) from diagonal and off-diagonal weights."""
    return assemble_field(vr.T, r_off)


def estimate_parameters(rtildes, bases, iters, beta, coefs=None, spatial=None, rng=None):
    """Estimate activations and spatial covariances of every source.

    Parameters
    ----------
    rtildes : sequence of (F, L, M, M) posterior covariances, one per source
    bases : sequence of (F, K_n) fixed spectral bases
    iters : number of W / diagonal rounds
    beta : divergence order
    coefs : optional warm-start activations, one per source
    spatial : optional warm-start (N, F, M, M) spatial covariances;
        identity when omitted
    rng : numpy Generator for the random activation init

    Returns
    -------
    ModelParams
        With each ``R_n(f)`` projected onto the PSD cone.
    """
    rng = np.random.default_rng() if rng is None else rng
    N = len(rtildes)
    if len(bases) != N:
        raise ValueError(f"{len(bases)} bases for {N} sources")
    F, L, M = rtildes[0].shape[:3]
    out_W, out_R = [], []
    for n in range(N):
        Vc, V_off = tensor_views(rtildes[n])
        U = bases[n]
        if coefs is not None and coefs[n] is not None and coefs[n].shape == (U.shape[1], L):
            W = coefs[n]
        else:
            W = init_coefs(Vc, U, rng)
        if spatial is None:
            vr = np.ones((M, F))
            r_off = {k: np.ones(F, dtype=np.complex128) for k in V_off}
        else:
            d, r_off = tensor_views(spatial[n], floor=EPS)
            vr = d.T.copy()
        W, vr, r_off = estimate_source(Vc, V_off, U, W, vr, r_off, iters, beta)
        out_W.append(W)
        out_R.append(psd_project(spatial_from_weights(vr, r_off)))
    return ModelParams([np.asarray(U) for U in bases], out_W, np.stack(out_R))
