"""One-sided STFT analysis and weighted overlap-add synthesis.

Spectrograms are complex arrays of shape ``(n_bins, n_frames, n_channels)``
with ``n_bins = window_len // 2 + 1``. Frame ``l`` covers samples
``[l*hop, l*hop + window_len)``; the tail is zero-padded so that every
sample belongs to at least one frame.

Synthesis divides the overlap-added, re-windowed frames by the summed
squared window, floored at ``NORM_FLOOR`` times its maximum. Where the sum
exceeds the floor, which covers the fully overlapped interior for any hop,
``synthesize(analyze(s))`` reproduces ``s``. The floor only affects the
outermost samples, covered by the tapering edge of a single frame; without
it, modified (e.g. masked) spectrograms would be amplified without bound
there. Analysis applies no scaling: a unit-amplitude cosine at bin ``k``
gives ``|X[k]| = sum(window) / 2``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

NORM_FLOOR = 0.1
"""Lower bound on the synthesis normalisation, relative to its maximum."""

__all__ = ["StftConfig", "analyze", "synthesize", "n_frames", "NORM_FLOOR"]


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters. Defaults: 128 ms Hann window, 64 ms hop at 16 kHz."""

    sample_rate: int = 16000
    window_len: int = 2048
    hop: int = 1024
    window: str = "hann"

    def __post_init__(self):
        if self.window_len <= 0 or self.hop <= 0:
            raise ValueError("window_len and hop must be positive")
        if self.hop > self.window_len:
            raise ValueError(f"hop ({self.hop}) exceeds window_len ({self.window_len})")

    @property
    def n_bins(self):
        return self.window_len // 2 + 1

    def get_window(self):
        # periodic window, as used for spectral analysis
        return get_window(self.window, self.window_len, fftbins=True)

    def bin_frequencies(self):
        """Bin centre frequencies in Hz."""
        return np.arange(self.n_bins) * self.sample_rate / self.window_len


def n_frames(n_samples, cfg):
    if n_samples < cfg.window_len:
        raise ValueError(
            f"signal has {n_samples} samples, needs at least window_len={cfg.window_len}"
        )
    return 1 + -(-(n_samples - cfg.window_len) // cfg.hop)


def _as_2d(signal):
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim == 1:
        return signal[:, None]
    if signal.ndim != 2:
        raise ValueError(f"expected (n_samples,) or (n_samples, n_channels), got {signal.shape}")
    return signal


def analyze(signal, cfg=StftConfig()):
    """STFT of a (n_samples,) or (n_samples, n_channels) signal.

    Returns
    -------
    ndarray, shape (n_bins, n_frames, n_channels), complex128
    """
    x = _as_2d(signal)
    T, M = x.shape
    if T == 0:
        raise ValueError("empty signal")
    L = n_frames(T, cfg)
    N, H = cfg.window_len, cfg.hop
    padded = np.zeros(((L - 1) * H + N, M))
    padded[:T] = x
    idx = np.arange(N)[None, :] + H * np.arange(L)[:, None]
    frames = padded[idx] * cfg.get_window()[None, :, None]  # (L, N, M)
    spec = np.fft.rfft(frames, axis=1)  # (L, n_bins, M)
    return np.ascontiguousarray(spec.transpose(1, 0, 2))


def synthesize(spec, cfg=StftConfig(), length=None):
    """Inverse of :func:`analyze`.

    Parameters
    ----------
    spec : ndarray, shape (n_bins, n_frames, n_channels) or (n_bins, n_frames)
    length : int, optional
        Number of output samples; defaults to the full overlap-add length.

    Returns
    -------
    ndarray, shape (length, n_channels), or (length,) for 2-D input
    """
    spec = np.asarray(spec)
    squeeze = spec.ndim == 2
    if squeeze:
        spec = spec[..., None]
    if spec.ndim != 3:
        raise ValueError(f"expected a 3-D spectrogram, got shape {spec.shape}")
    F, L, M = spec.shape
    if F != cfg.n_bins:
        raise ValueError(f"spectrogram has {F} bins, config expects {cfg.n_bins}")
    N, H = cfg.window_len, cfg.hop
    win = cfg.get_window()
    frames = np.fft.irfft(spec.transpose(1, 0, 2), n=N, axis=1) * win[None, :, None]
    total = (L - 1) * H + N
    out = np.zeros((total, M))
    norm = np.zeros(total)
    w2 = win**2
    for l in range(L):
        out[l * H:l * H + N] += frames[l]
        norm[l * H:l * H + N] += w2
    out /= np.maximum(norm, NORM_FLOOR * norm.max())[:, None]
    if length is not None:
        if length > total:
            out = np.vstack([out, np.zeros((length - total, M))])
        out = out[:length]
    return out[:, 0] if squeeze else out
