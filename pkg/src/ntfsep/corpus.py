"""Synthetic speech-like voices with distinct spectral envelopes.

A voice is a pitch range, a set of vowel formant patterns, a spectral
tilt and a fricative noise band. Utterances are sequences of syllables
(harmonic glides through two vowels, or short noise bursts) separated by
pauses, so the signals are sparse in time-frequency like speech.
"""

from dataclasses import dataclass

import numpy as np

# rough F1..F4 (Hz) of five vowels for a mid-sized vocal tract
_VOWELS = np.array([
    [730, 1090, 2440, 3400],
    [530, 1840, 2480, 3500],
    [270, 2290, 3010, 3700],
    [570, 840, 2410, 3300],
    [300, 870, 2240, 3200],
], dtype=np.float64)
_BANDWIDTHS = np.array([80.0, 110.0, 160.0, 220.0])

__all__ = ["Voice", "make_voices", "utterance"]


@dataclass
class Voice:
    name: str
    f0_range: tuple
    formants: np.ndarray  # (n_vowels, 4) Hz
    tilt_db: float  # spectral roll-off per octave
    noise_band: tuple  # (centre, width) Hz of fricatives

    def envelope(self, freqs, vowel):
        """Amplitude envelope of one vowel at ``freqs`` (Hz)."""
        f = np.asarray(freqs, dtype=np.float64)
        env = np.zeros_like(f)
        for k, (c, bw) in enumerate(zip(self.formants[vowel], _BANDWIDTHS)):
            env += 0.7**k / (1.0 + ((f - c) / bw) ** 2)
        octaves = np.log2(np.maximum(f, 100.0) / 100.0)
        return (env + 0.02) * 10.0 ** (-self.tilt_db * octaves / 20.0)


def make_voices(n=6, seed=0):
    """``n`` voices with disjoint pitch ranges and distinct vocal-tract scalings.

    Pitch centres are log-spaced over 95-290 Hz with +-8 % ranges, which do
    not overlap for ``n <= 6``.
    """
    rng = np.random.default_rng(seed)
    centres = np.geomspace(95.0, 290.0, n)
    scales = np.linspace(1.18, 0.82, n)
    order = rng.permutation(n)
    voices = []
    for i in range(n):
        f0 = centres[order[i]]
        formants = _VOWELS * scales[order[i]] * rng.uniform(0.85, 1.15, size=_VOWELS.shape)
        voices.append(Voice(
            name=f"voice{i + 1}",
            f0_range=(0.92 * f0, 1.08 * f0),
            formants=np.sort(formants, axis=1),
            tilt_db=float(rng.uniform(4.0, 10.0)),
            noise_band=(float(rng.uniform(2500, 6000)), float(rng.uniform(800, 2000))),
        ))
    return voices


def _fade(n, fs, ramp=0.02):
    env = np.ones(n)
    r = min(int(ramp * fs), n // 2)
    if r > 0:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
        env[:r] = w
        env[n - r:] = w[::-1]
    return env


def _voiced(voice, n, fs, rng):
    lo, hi = voice.f0_range
    f_start = rng.uniform(lo, hi)
    f_end = np.clip(f_start * rng.uniform(0.85, 1.15), lo, hi)
    f0 = np.linspace(f_start, f_end, n)
    phase = 2 * np.pi * np.cumsum(f0) / fs
    va, vb = rng.choice(len(voice.formants), size=2)
    alpha = np.linspace(0.0, 1.0, n)
    out = np.zeros(n)
    for h in range(1, int(0.45 * fs / f0.max()) + 1):
        fh = h * f0
        amp = (1 - alpha) * voice.envelope(fh, va) + alpha * voice.envelope(fh, vb)
        out += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    return out


def _fricative(voice, n, fs, rng):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    c, w = voice.noise_band
    spec *= np.exp(-0.5 * ((f - c) / w) ** 2)
    return 0.3 * np.fft.irfft(spec, n=n)


def utterance(voice, duration, fs=16000, rng=None, rms=0.1):
    """A ``duration``-second utterance of ``voice`` scaled to ``rms``."""
    rng = np.random.default_rng() if rng is None else rng
    total = int(round(duration * fs))
    out = np.zeros(total)
    pos = int(rng.uniform(0.0, 0.1) * fs)
    while pos < total:
        if rng.random() < 0.85:
            n = int(rng.uniform(0.12, 0.3) * fs)
            seg = _voiced(voice, n, fs, rng)
        else:
            n = int(rng.uniform(0.06, 0.12) * fs)
            seg = _fricative(voice, n, fs, rng)
        seg = seg / (np.sqrt(np.mean(seg**2)) + 1e-12) * rng.uniform(0.5, 1.0) * _fade(n, fs)
        end = min(total, pos + n)
        out[pos:end] += seg[:end - pos]
        long_pause = rng.random() < 0.15
        pos = end + int((rng.uniform(0.3, 0.5) if long_pause else rng.uniform(0.02, 0.2)) * fs)
    level = np.sqrt(np.mean(out**2))
    return out * (rms / level) if level > 0 else out
