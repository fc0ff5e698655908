"""Initial source images from TDOA estimation and binary TF clustering.

Delays refer to the first channel pair: a positive ``tau`` means the
source reaches channel 2 ``tau`` seconds after channel 1, so its
inter-channel phase is ``exp(-1j * omega * tau)``.
"""

import numpy as np

from .betafac import EPS
from .stft import StftConfig

SPEED_OF_SOUND = 343.0
"""Metres per second."""

__all__ = ["SPEED_OF_SOUND", "gcc_phat", "estimate_tdoas", "cluster_tf_points"]


def gcc_phat(spec, cfg=StftConfig(), upsample=8, pair=(0, 1), taper=True):
    """Frame-averaged GCC-PHAT between two channels of a spectrogram.

    With ``taper`` the averaged cross-spectrum is weighted by a cos^2 roll-off
    over frequency, which trades main-lobe width for much lower side lobes
    (a strong source's side lobes otherwise mask weaker sources).

    Returns
    -------
    lags : ndarray
        Lag axis in seconds, ascending, centred on zero.
    cc : ndarray
        Correlation at each lag.
    """
    spec = np.asarray(spec)
    if spec.ndim != 3 or spec.shape[2] < 2:
        raise ValueError(f"need an (F, L, M>=2) spectrogram, got {spec.shape}")
    i, j = pair
    cross = spec[:, :, j] * np.conj(spec[:, :, i])
    mag = np.abs(cross)
    cross = np.where(mag > EPS, cross / np.maximum(mag, EPS), 0.0)
    # a lag of channel j behind channel i gives a peak at a positive lag
    avg = cross.mean(axis=1)
    if taper:
        avg = avg * np.cos(np.linspace(0.0, np.pi / 2, len(avg))) ** 2
    n = cfg.window_len * upsample
    cc = np.fft.fftshift(np.fft.irfft(avg, n=n))
    lags = (np.arange(n) - n // 2) / (cfg.sample_rate * upsample)
    return lags, cc


def estimate_tdoas(spec, n_sources, cfg=StftConfig(), spacing=0.2, c=SPEED_OF_SOUND,
                   upsample=8, min_separation=1.0):
    """Delays of the ``n_sources`` strongest GCC-PHAT peaks.

    Only local maxima within the physical range ``|tau| <= spacing / c`` are
    considered; peaks closer than ``min_separation`` samples to a stronger
    one are suppressed.

    Returns
    -------
    ndarray
        Delays in seconds, sorted ascending.
    """
    if n_sources < 1:
        raise ValueError("n_sources must be positive")
    lags, cc = gcc_phat(spec, cfg, upsample)
    tau_max = spacing / c
    inside = np.abs(lags) <= tau_max + 0.5 / (cfg.sample_rate * upsample)
    idx = np.flatnonzero(inside)
    vals = cc[idx]
    # interior local maxima of the restricted curve, plus its edges if rising
    left = np.concatenate([[-np.inf], vals[:-1]])
    right = np.concatenate([vals[1:], [-np.inf]])
    is_peak = (vals > left) & (vals >= right)
    cand = idx[is_peak]
    cand = cand[np.argsort(-cc[cand], kind="stable")]
    sep = min_separation / cfg.sample_rate
    chosen = []
    for k in cand:
        if all(abs(lags[k] - lags[q]) >= sep for q in chosen):
            chosen.append(k)
        if len(chosen) == n_sources:
            break
    if len(chosen) < n_sources:
        found = ", ".join(f"{lags[k] * 1e3:.4f} ms" for k in chosen) or "none"
        raise ValueError(f"found {len(chosen)} GCC-PHAT peaks ({found}), need {n_sources}")
    return np.sort(lags[chosen])


def cluster_tf_points(spec, taus, cfg=StftConfig(), pair=(0, 1)):
    """Assign every TF point to the delay that best explains its phase.

    Returns
    -------
    masks : ndarray of bool, (N, F, L)
        A partition of the TF plane. Points with an undefined phase (either
        channel below ``EPS`` in magnitude) and exact ties go to the lowest
        source index.
    images : ndarray, (N, F, L, M)
        ``masks[n] * spec``.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    N = len(taus)
    F, L, M = spec.shape
    if N == 1 or M < 2:
        masks = np.zeros((N, F, L), dtype=bool)
        masks[0] = True
    else:
        i, j = pair
        omega = 2 * np.pi * cfg.bin_frequencies()
        steer = np.exp(-1j * omega[:, None] * taus[None, :])  # (F, N)
        cross = spec[:, :, j] * np.conj(spec[:, :, i])
        mag = np.abs(cross)
        valid = (np.abs(spec[:, :, i]) > EPS) & (np.abs(spec[:, :, j]) > EPS)
        phase = np.where(valid, cross / np.where(valid, mag, 1.0), 1.0)
        dist = np.abs(steer[:, None, :] - phase[:, :, None])  # (F, L, N)
        label = np.argmin(dist, axis=2)
        label[~valid] = 0
        masks = label[None] == np.arange(N)[:, None, None]
    images = masks[..., None] * spec[None]
    return masks, images
