"""NumPy implementations of the hot kernels.

These are the reference versions. ``_kernels.pyx`` mirrors every function
here with the same signature and is preferred when it has been compiled.
"""

import numpy as np

EPS = 1e-12

__all__ = ["beta_terms", "beta_div_sum", "local_cov", "smooth_gains"]


def beta_terms(obs, model, beta):
    """Return ``obs * model**(beta-2)`` and ``model**(beta-1)``.

    ``model`` is floored at ``EPS`` first. Both arrays keep the input shape.
    """
    obs = np.asarray(obs, dtype=np.float64)
    model = np.maximum(np.asarray(model, dtype=np.float64), EPS)
    if beta == 1:
        return obs / model, np.ones_like(model)
    if beta == 2:
        return obs.copy(), model
    pos = model ** (beta - 1.0)
    return obs * pos / model, pos


def beta_div_sum(a, b, beta):
    """Sum of elementwise beta-divergences ``d(a|b)``; ``b`` floored at EPS.

    Returns ``inf`` where the divergence is unbounded (``a == 0`` with
    ``beta <= 0``); callers decide whether that is an error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.maximum(np.asarray(b, dtype=np.float64), EPS)
    if beta == 0:
        if np.any(a <= 0):
            return np.inf
        r = a / b
        return float(np.sum(r - np.log(r) - 1.0))
    if beta == 1:
        pos = a > 0
        out = b - a
        out[pos] += a[pos] * np.log(a[pos] / b[pos])
        return float(np.sum(out))
    if beta < 0 and np.any(a <= 0):
        return np.inf
    # a == 0 contributes b**beta / beta; elsewhere the generic expression
    # is rearranged around expm1 to stay accurate near beta = 0 and 1
    zero = a <= 0
    bb = b**beta
    total = np.sum(bb[zero]) / beta if zero.any() else 0.0
    a, b, bb = a[~zero], b[~zero], bb[~zero]
    u = np.log(a / b)
    ab = a * b ** (beta - 1.0)
    if beta < 0.5:
        val = (bb * np.expm1(beta * u) / beta - ab + bb) / (beta - 1.0)
    else:
        g = beta - 1.0
        val = (ab * (np.expm1(g * u) / g - 1.0) + bb) / beta
    return float(total + np.sum(val))


def local_cov(x, win):
    """Neighbourhood-weighted outer products of a multichannel spectrogram.

    Parameters
    ----------
    x : ndarray, shape (n_bins, n_frames, n_chan), complex
    win : ndarray, shape (P, Q), nonnegative, odd sizes, centred

    Returns
    -------
    ndarray, shape (n_bins, n_frames, n_chan, n_chan)
        Weighted averages with weights renormalised over the in-bounds part
        of the window.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    win = np.asarray(win, dtype=np.float64)
    F, L, M = x.shape
    P, Q = win.shape
    hp, hq = P // 2, Q // 2
    outer = x[..., :, None] * np.conj(x[..., None, :])
    acc = np.zeros_like(outer)
    wsum = np.zeros((F, L))
    for a in range(P):
        df = a - hp
        f0, f1 = max(0, -df), min(F, F - df)
        for b in range(Q):
            g = win[a, b]
            if g == 0.0:
                continue
            dl = b - hq
            l0, l1 = max(0, -dl), min(L, L - dl)
            if f0 >= f1 or l0 >= l1:
                continue
            acc[f0:f1, l0:l1] += g * outer[f0 + df:f1 + df, l0 + dl:l1 + dl]
            wsum[f0:f1, l0:l1] += g
    acc /= wsum[..., None, None]
    # mirror the upper triangle so the result is Hermitian bit for bit
    iu = np.triu_indices(M, 1)
    acc[..., iu[1], iu[0]] = np.conj(acc[..., iu[0], iu[1]])
    d = np.arange(M)
    acc[..., d, d] = acc[..., d, d].real
    return acc


def smooth_gains(sc, sx, mu, delta, floor):
    """Smoothed multichannel Wiener gains for every source and TF point.

    With ``load = max(delta * tr(sx) / M, floor) / N`` each source
    covariance becomes ``C_n = sc_n + load*I`` and the gain is
    ``C_n [(1-mu) sum_k C_k + mu C_n]^{-1}``. Spreading the load over the
    sources keeps ``sum_n G_n = I`` (mu=0) and ``G_n = I`` (mu=1) exact.

    Parameters
    ----------
    sc : ndarray, shape (N, F, L, M, M), complex
    sx : ndarray, shape (F, L, M, M), complex; must equal ``sc.sum(0)``
    """
    sc = np.asarray(sc, dtype=np.complex128)
    sx = np.asarray(sx, dtype=np.complex128)
    N = sc.shape[0]
    M = sx.shape[-1]
    eye = np.eye(M)
    tr = np.real(np.trace(sx, axis1=-2, axis2=-1))
    load = np.maximum(delta * tr / M, floor) / N
    li = load[..., None, None] * eye
    sx_l = sx + N * li
    gains = np.empty_like(sc)
    for n in range(N):
        c = sc[n] + li
        s = (1.0 - mu) * sx_l + mu * c
        # G = C S^{-1}  <=>  G^H = S^{-1} C  for Hermitian C, S
        gains[n] = np.conj(np.swapaxes(np.linalg.solve(s, c), -1, -2))
    return gains
