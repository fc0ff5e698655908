"""Spectral-basis priors: training, blind extraction and library detection.

* :func:`train_basis` factorizes concatenated power spectra of one speaker
  as ``V ~ U W`` and keeps ``U``.
* :func:`extract_basis` factorizes the channel slices of a diagonal tensor
  with one shared basis and per-slice activations.
* :func:`detect_contributions` explains the slices with a fixed library
  ``U_lib`` scaled per column by a diagonal contribution ``D^m``; the
  column-averaged contributions ``d`` tell which library block is present.

Objectives can be recorded per iteration via the ``history`` argument.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .betafac import EPS, beta_terms, mu_step, total_divergence
from .stft import StftConfig, analyze

logger = logging.getLogger(__name__)

SILENCE_DB = -60.0
"""Frames quieter than this (relative to the utterance peak) are dropped from training data."""

__all__ = [
    "SpectralBasis",
    "BasisLibrary",
    "training_matrix",
    "train_basis",
    "build_library",
    "extract_basis",
    "detect_contributions",
    "block_scores",
    "block_likelihoods",
    "select_bases",
]


@dataclass
class SpectralBasis:
    """A nonnegative (F, K) basis with the label of the source it models."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError(f"basis must be 2-D, got {self.matrix.shape}")
        if np.any(self.matrix < 0):
            raise ValueError(f"basis {self.label!r} has negative entries")

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class BasisLibrary:
    """Ordered blocks of spectral bases sharing the frequency axis."""

    blocks: list = field(default_factory=list)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("library needs at least one block")
        F = self.blocks[0].shape[0]
        for z, b in enumerate(self.blocks):
            if b.shape[0] != F:
                raise ValueError(f"block {z} ({b.label!r}) has {b.shape[0]} bins, expected {F}")

    def __len__(self):
        return len(self.blocks)

    @property
    def labels(self):
        return [b.label for b in self.blocks]

    @property
    def n_bins(self):
        return self.blocks[0].shape[0]

    @property
    def offsets(self):
        """Column offsets of the blocks, length ``Z + 1``."""
        return np.concatenate([[0], np.cumsum([b.shape[1] for b in self.blocks])])

    @property
    def matrix(self):
        return np.hstack([b.matrix for b in self.blocks])

    def locate(self, column):
        """Map a concatenated column index to ``(block, column within block)``."""
        off = self.offsets
        if not 0 <= column < off[-1]:
            raise IndexError(f"column {column} outside library width {off[-1]}")
        z = int(np.searchsorted(off, column, side="right") - 1)
        return z, int(column - off[z])


def training_matrix(signals, cfg=StftConfig(), silence_db=SILENCE_DB):
    """Concatenate power spectra of single-channel utterances along time.

    Frames whose energy falls more than ``silence_db`` below the loudest
    frame of their utterance are dropped.
    """
    parts = []
    for s in signals:
        s = np.asarray(s, dtype=np.float64)
        if s.ndim == 2:
            s = s.mean(axis=1)
        P = np.abs(analyze(s, cfg)[:, :, 0]) ** 2
        energy = P.sum(axis=0)
        if energy.max() <= 0:
            continue
        keep = energy >= energy.max() * 10.0 ** (silence_db / 10.0)
        parts.append(P[:, keep])
    if not parts:
        raise ValueError("training signals are silent")
    return np.hstack(parts)


def _normalize_columns(U, Ws):
    s = U.sum(axis=0)
    s = np.where(s > 0, s, 1.0)
    return U / s, [W * s[:, None] for W in Ws]


def _shared_basis_nmf(V, K, beta, iters, rng, U0=None, history=None):
    """NTF ``V[m] ~ U W[m]`` with a shared column-stochastic ``U``.

    ``V`` has shape (M, F, L). All slices start from the same activation
    draw, so ``M = 1`` is plain NMF and identical slices stay identical.
    """
    M, F, L = V.shape
    if K > L or K > F:
        raise ValueError(f"K={K} exceeds data dimensions (F={F}, L={L})")
    if np.any(V < 0):
        raise ValueError("observations must be nonnegative")
    V = np.maximum(V, EPS)
    if U0 is None:
        U = rng.uniform(0.5, 1.5, size=(F, K))
    else:
        U = np.array(U0, dtype=np.float64)
        if U.shape != (F, K):
            raise ValueError(f"initial basis {U.shape} does not match ({F}, {K})")
    U = U / U.sum(axis=0)
    W0 = rng.uniform(0.5, 1.5, size=(K, L))
    W0 *= V.mean() / (U @ W0).mean()
    Ws = [W0.copy() for _ in range(M)]
    for _ in range(iters):
        num = np.zeros_like(U)
        den = np.zeros_like(U)
        for m in range(M):
            neg, pos = beta_terms(V[m], U @ Ws[m], beta)
            num += neg @ Ws[m].T
            den += pos @ Ws[m].T
        U = mu_step(num, den, U)
        for m in range(M):
            neg, pos = beta_terms(V[m], U @ Ws[m], beta)
            Ws[m] = mu_step(U.T @ neg, U.T @ pos, Ws[m])
        U, Ws = _normalize_columns(U, Ws)
        if history is not None:
            history.append(sum(total_divergence(V[m], U @ Ws[m], beta) for m in range(M)))
    return U


def train_basis(Vt, K, beta=0.9, iters=200, rng=None, label="", history=None):
    """Learn a K-column basis from an (F, T) matrix of power spectra.

    Returns
    -------
    SpectralBasis
        Columns sum to one; the activations are discarded.
    """
    rng = np.random.default_rng() if rng is None else rng
    Vt = np.asarray(Vt, dtype=np.float64)
    if Vt.ndim != 2:
        raise ValueError(f"training matrix must be 2-D, got {Vt.shape}")
    U = _shared_basis_nmf(Vt[None], K, beta, iters, rng, history=history)
    return SpectralBasis(U, label)


def build_library(bases):
    """Concatenate bases into a library; block ``z`` keeps its position."""
    return BasisLibrary(list(bases))


def extract_basis(Vc, K, beta=0.6, iters=100, rng=None, init=None, history=None):
    """Blind basis from an (F, L, M) diagonal tensor, shared across channels.

    ``init`` warm-starts the basis (e.g. from a previous outer iteration).
    """
    rng = np.random.default_rng() if rng is None else rng
    Vc = np.asarray(Vc, dtype=np.float64)
    if Vc.ndim != 3:
        raise ValueError(f"expected an (F, L, M) tensor, got {Vc.shape}")
    if K > Vc.shape[1]:
        raise ValueError(f"K={K} exceeds the number of frames ({Vc.shape[1]})")
    V = np.moveaxis(Vc, 2, 0)
    return _shared_basis_nmf(V, K, beta, iters, rng, U0=init, history=history)


def _detection_objective(V, U, D, W, beta):
    return sum(total_divergence(V[m], U @ (D[m][:, None] * W), beta) for m in range(len(V)))


def detect_contributions(Vc, lib, beta=0.3, iters=100, rng=None, history=None):
    """Contribution of every library column to an (F, L, M) tensor.

    Fits ``V^m ~ U_lib D^m W`` with diagonal ``D^m`` per channel and shared
    activations ``W``, then averages the diagonals over channels.

    Returns
    -------
    ndarray, shape (library width,)
        Nonnegative, normalised to a maximum of one.
    """
    rng = np.random.default_rng() if rng is None else rng
    Vc = np.asarray(Vc, dtype=np.float64)
    if Vc.ndim != 3:
        raise ValueError(f"expected an (F, L, M) tensor, got {Vc.shape}")
    U = lib.matrix
    if Vc.shape[0] != U.shape[0]:
        raise ValueError(f"tensor has {Vc.shape[0]} bins, library has {U.shape[0]}")
    if np.any(Vc < 0):
        raise ValueError("observations must be nonnegative")
    M = Vc.shape[2]
    J = U.shape[1]
    if not Vc.max() > EPS:
        warnings.warn("all-zero observations: contributions are uninformative", RuntimeWarning)
        return np.ones(J)
    V = np.maximum(np.moveaxis(Vc, 2, 0), EPS)
    W = rng.uniform(0.5, 1.5, size=(J, Vc.shape[1]))
    base = (U @ W).mean()
    D = [np.full(J, V[m].mean() / base) for m in range(M)]
    for _ in range(iters):
        for m in range(M):
            neg, pos = beta_terms(V[m], U @ (D[m][:, None] * W), beta)
            D[m] = mu_step(np.sum((U.T @ neg) * W, axis=1), np.sum((U.T @ pos) * W, axis=1), D[m])
        num = np.zeros_like(W)
        den = np.zeros_like(W)
        for m in range(M):
            neg, pos = beta_terms(V[m], U @ (D[m][:, None] * W), beta)
            num += D[m][:, None] * (U.T @ neg)
            den += D[m][:, None] * (U.T @ pos)
        W = mu_step(num, den, W)
        if history is not None:
            history.append(_detection_objective(V, U, D, W, beta))
    d = np.mean(D, axis=0)
    top = d.max()
    return d / top if top > 0 else np.ones(J)


def block_scores(d, lib):
    """Sum of the contributions within each library block, shape (Z,)."""
    d = np.asarray(d, dtype=np.float64)
    off = lib.offsets
    if d.shape != (off[-1],):
        raise ValueError(f"contribution vector has length {d.size}, library width is {off[-1]}")
    return np.add.reduceat(d, off[:-1])


def block_likelihoods(d, lib):
    """Block scores normalised to sum to one."""
    s = block_scores(d, lib)
    total = s.sum()
    return s / total if total > 0 else np.full(len(s), 1.0 / len(s))


def select_bases(contributions, lib, n_sources=None):
    """Pick the best library block for each source's contribution vector.

    Parameters
    ----------
    contributions : sequence of 1-D arrays
        One contribution vector per source tensor.
    n_sources : int, optional
        Must not exceed the number of blocks.

    Returns
    -------
    list of int
        ``argmax`` of the block sums, lowest index on ties. Duplicates
        across sources are allowed and logged.
    """
    n = len(contributions) if n_sources is None else n_sources
    if n > len(lib):
        raise ValueError(f"cannot select {n} sources from a library of {len(lib)} blocks")
    picks = [int(np.argmax(block_scores(d, lib))) for d in contributions[:n]]
    if len(set(picks)) < len(picks):
        logger.info("duplicate library blocks selected: %s", picks)
    return picks
