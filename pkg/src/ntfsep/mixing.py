"""Synthetic multichannel mixtures.

Each source is convolved per channel with a room impulse response (RIR):
either a supplied one, or a synthetic direct path (fractional delay by a
windowed sinc) followed by an exponentially decaying white-noise tail
whose energy falls by 60 dB over ``t60`` seconds. Mixtures are the sum of
the resulting source images and are truncated to the longest source.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import wavio

SINC_HALF_WIDTH = 32
"""Taps on each side of a fractional-delay kernel."""
TAIL_GAIN = 0.04
"""Initial amplitude of the synthetic reverberant tail, relative to the direct path."""

__all__ = [
    "MixSpec",
    "load_mix_spec",
    "fractional_delay",
    "synthetic_rir",
    "mix_sources",
    "synth_mixture",
]


def fractional_delay(delay, half_width=SINC_HALF_WIDTH):
    """Causal kernel delaying by ``delay`` samples (>= 0).

    Integer delays give an exact unit impulse; otherwise a Blackman-windowed
    sinc centred on ``delay`` (taps before sample 0 are dropped).
    """
    if delay < 0:
        raise ValueError(f"delay must be nonnegative, got {delay}")
    if float(delay).is_integer():
        h = np.zeros(int(delay) + 1)
        h[-1] = 1.0
        return h
    n = np.arange(max(0, math.floor(delay) - half_width + 1), math.floor(delay) + half_width + 1)
    u = (n - delay) / half_width
    win = 0.42 + 0.5 * np.cos(np.pi * u) + 0.08 * np.cos(2 * np.pi * u)
    h = np.zeros(n[-1] + 1)
    h[n] = np.sinc(n - delay) * win
    return h


def synthetic_rir(delay, fs=16000, t60=0.0, tail_gain=TAIL_GAIN, rng=None):
    """Direct path plus an optional exponentially decaying noise tail.

    The tail starts one sample after the direct path and lasts ``t60``
    seconds, with amplitude ``tail_gain * 10**(-3 t / t60)`` times unit
    Gaussian noise.
    """
    h = fractional_delay(delay)
    if t60 <= 0 or tail_gain == 0:
        return h
    rng = np.random.default_rng() if rng is None else rng
    n_tail = int(math.ceil(t60 * fs))
    start = int(math.floor(delay)) + 1
    t = np.arange(n_tail) / fs
    tail = tail_gain * 10.0 ** (-3.0 * t / t60) * rng.standard_normal(n_tail)
    out = np.zeros(max(len(h), start + n_tail))
    out[:len(h)] = h
    out[start:start + n_tail] += tail
    return out


def mix_sources(sources, delays=None, gains=None, rirs=None, fs=16000, t60=0.0,
                tail_gain=TAIL_GAIN, rng=None):
    """Source images and their mixture.

    Parameters
    ----------
    sources : sequence of 1-D arrays
    delays : (N, M) array of per-channel delays in samples
        Used to build synthetic RIRs when ``rirs`` is omitted.
    gains : (N,) source gains, default ones
    rirs : nested sequence ``rirs[n][m]`` of 1-D impulse responses, optional
    rng : numpy Generator for the tail noise, drawn source by source,
        channel by channel

    Returns
    -------
    mixture : (T, M)
    images : (N, T, M)
    """
    N = len(sources)
    T = max(len(s) for s in sources)
    gains = np.ones(N) if gains is None else np.asarray(gains, dtype=np.float64)
    if gains.shape != (N,):
        raise ValueError(f"{gains.size} gains for {N} sources")
    if rirs is None:
        if delays is None:
            raise ValueError("need either delays or RIRs")
        delays = np.asarray(delays, dtype=np.float64)
        if delays.ndim != 2 or delays.shape[0] != N:
            raise ValueError(f"delays must be (N={N}, M), got {delays.shape}")
        rng = np.random.default_rng() if rng is None else rng
        rirs = [[synthetic_rir(d, fs, t60, tail_gain, rng) for d in row] for row in delays]
    if len(rirs) != N:
        raise ValueError(f"{len(rirs)} RIR sets for {N} sources")
    M = len(rirs[0])
    images = np.zeros((N, T, M))
    for n, s in enumerate(sources):
        s = np.asarray(s, dtype=np.float64)
        if len(rirs[n]) != M:
            raise ValueError(f"source {n} has {len(rirs[n])} RIRs, expected {M}")
        for m, h in enumerate(rirs[n]):
            h = np.asarray(h, dtype=np.float64)
            nz = np.flatnonzero(h)
            if len(nz) == 1:
                # pure delay: shift instead of convolving, so it stays sample-exact
                k = nz[0]
                y = np.zeros(min(T, len(s) + k))
                y[k:] = h[k] * s[:len(y) - k]
            else:
                y = fftconvolve(s, h)[:T]
            images[n, :len(y), m] = gains[n] * y
    return images.sum(axis=0), images


@dataclass
class MixSpec:
    """Description of a mixture, usually read from a JSON file.

    ``delays[n][m]`` (samples) or ``rirs[n][m]`` (WAV paths) give the
    propagation of source ``n`` to channel ``m``. Relative paths are
    resolved against ``base_dir``.
    """

    sources: list
    output: str
    gains: list = None
    delays: list = None
    rirs: list = None
    t60: float = 0.0
    tail_gain: float = TAIL_GAIN
    reference_dir: str = None
    seed: int = 0
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        if len(self.sources) < 2:
            raise ValueError("a mixture needs at least two sources")
        if (self.delays is None) == (self.rirs is None):
            raise ValueError("give exactly one of 'delays' or 'rirs'")
        per_source = self.delays if self.delays is not None else self.rirs
        if len(per_source) != len(self.sources):
            raise ValueError(f"{len(per_source)} propagation entries for {len(self.sources)} sources")
        if len({len(p) for p in per_source}) != 1 or len(per_source[0]) < 2:
            raise ValueError("every source needs the same number (>= 2) of channels")

    def path(self, p):
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)


def load_mix_spec(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a JSON object")
    unknown = set(raw) - (set(MixSpec.__dataclass_fields__) - {"base_dir"})
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("sources", "output"):
        if key not in raw:
            raise ValueError(f"{path}: missing key {key!r}")
    return MixSpec(**raw, base_dir=os.path.dirname(os.path.abspath(path)))


def _read_mono(path):
    data, rate = wavio.read_wav(path)
    if data.shape[1] != 1:
        raise ValueError(f"{path}: expected a mono file, got {data.shape[1]} channels")
    return data[:, 0], rate


def synth_mixture(spec):
    """Render a :class:`MixSpec` to WAV files.

    Writes the mixture to ``spec.output`` and, when ``reference_dir`` is
    set, each source image to ``<reference_dir>/ref<n>.wav`` (1-based).

    Returns
    -------
    mixture : (T, M)
    images : (N, T, M)
    rate : int
    """
    sources, rates = zip(*(_read_mono(spec.path(p)) for p in spec.sources))
    rate = rates[0]
    if any(r != rate for r in rates):
        raise ValueError(f"sample rates differ between sources: {sorted(set(rates))}")
    rirs = None
    if spec.rirs is not None:
        rirs = []
        for row in spec.rirs:
            chans = []
            for p in row:
                h, r = _read_mono(spec.path(p))
                if r != rate:
                    raise ValueError(f"{p}: sample rate {r}, sources use {rate}")
                chans.append(h)
            rirs.append(chans)
    rng = np.random.default_rng(spec.seed)
    mixture, images = mix_sources(
        sources, spec.delays, spec.gains, rirs, rate, spec.t60, spec.tail_gain, rng
    )
    wavio.write_wav(spec.path(spec.output), mixture, rate)
    if spec.reference_dir is not None:
        ref_dir = spec.path(spec.reference_dir)
        os.makedirs(ref_dir, exist_ok=True)
        for n, img in enumerate(images):
            wavio.write_wav(os.path.join(ref_dir, f"ref{n + 1}.wav"), img, rate)
    return mixture, images, rate
