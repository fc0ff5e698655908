"""The separation loop: E-step statistics, priors, M-step, Wiener filtering.

Each outer iteration

1. turns the current image estimates into posterior covariances,
2. extracts (blind mode) or detects (library mode) a spectral basis per
   source, or keeps the supplied one (informed mode),
3. estimates activations and spatial covariances with the basis fixed,
4. rebuilds the model covariances and re-filters the mixture.

The first iteration starts from TDOA clustering with unit gains and unit
source covariances. All random draws come from one generator seeded by
``SeparationConfig.seed``, in the order: basis extraction or detection,
then activation init, per source and per iteration.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .estimation import estimate_parameters
from .localgauss import (
    apply_gain,
    empirical_covariance,
    estep_statistics,
    hanning_window,
    neg_log_likelihood,
    source_covariances,
    tensor_views,
    wiener_gains,
)
from .priors import BasisLibrary, block_likelihoods, detect_contributions, extract_basis, select_bases
from .stft import StftConfig, analyze, synthesize
from .tdoa import cluster_tf_points, estimate_tdoas

logger = logging.getLogger(__name__)

MODES = ("informed", "detect", "blind")

__all__ = ["MODES", "SeparationConfig", "SeparationResult", "separate", "convergence_check"]


@dataclass
class SeparationConfig:
    """Settings of :func:`separate`. Defaults follow the reference protocol."""

    mode: str = "informed"
    n_sources: int = 3
    n_basis: int = 15
    beta_s: float = 0.6
    beta_e: float = 0.6
    beta_d: float = 0.3
    mu: float = 0.1
    outer_iters: int = 100
    inner_first: int = 100
    inner_iters: int = 10
    extract_iters: int = 100
    detect_iters: int = 100
    redetect_every: int = 1
    convergence_tol: float = 1e-4
    patience: int = 3
    stft: StftConfig = field(default_factory=StftConfig)
    neighborhood: np.ndarray = field(default_factory=hanning_window)
    spacing: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_sources < 1:
            raise ValueError("n_sources must be positive")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if self.outer_iters < 1 or self.redetect_every < 1:
            raise ValueError("outer_iters and redetect_every must be positive")


@dataclass
class SeparationResult:
    """Output of :func:`separate`.

    Attributes
    ----------
    images : (N, T, M) separated source images
    spectrograms : (N, F, L, M) their STFTs
    params : final ModelParams
    objective : negative log-likelihood after every outer iteration
    detections : per outer iteration, the selected library blocks (detect mode)
    likelihoods : per outer iteration, (N, Z) normalised block scores (detect mode)
    taus : delays used for the initial clustering, seconds
    converged : whether the objective settled before ``outer_iters``
    """

    images: np.ndarray
    spectrograms: np.ndarray
    params: object
    objective: list
    detections: list
    likelihoods: list
    taus: np.ndarray
    converged: bool

    @property
    def n_iter(self):
        return len(self.objective)


def convergence_check(trace, tol=1e-4, patience=3, max_iters=None):
    """True once the relative change stayed below ``tol`` ``patience`` times in a row.

    Also true when ``max_iters`` entries have been recorded.
    """
    if max_iters is not None and len(trace) >= max_iters:
        return True
    if len(trace) < patience + 1:
        return False
    t = np.asarray(trace[-(patience + 1):], dtype=np.float64)
    prev = np.abs(t[:-1])
    change = np.abs(np.diff(t))
    rel = np.where(prev > 0, change / np.where(prev > 0, prev, 1.0), np.where(change > 0, np.inf, 0.0))
    return bool(np.all(rel < tol))


def _check_priors(cfg, bases, library):
    if cfg.mode == "informed":
        if bases is None:
            raise ValueError("informed mode needs one basis per source")
        if len(bases) != cfg.n_sources:
            raise ValueError(f"{len(bases)} bases supplied for {cfg.n_sources} sources")
        bases = [np.asarray(getattr(b, "matrix", b), dtype=np.float64) for b in bases]
        for n, U in enumerate(bases):
            if U.shape[0] != cfg.stft.n_bins:
                raise ValueError(f"basis {n} has {U.shape[0]} bins, STFT has {cfg.stft.n_bins}")
        return bases
    if cfg.mode == "detect":
        if not isinstance(library, BasisLibrary):
            raise ValueError("detect mode needs a BasisLibrary")
        if library.n_bins != cfg.stft.n_bins:
            raise ValueError(f"library has {library.n_bins} bins, STFT has {cfg.stft.n_bins}")
        if cfg.n_sources > len(library):
            raise ValueError(f"{cfg.n_sources} sources but only {len(library)} library blocks")
    return [None] * cfg.n_sources


def separate(x, cfg=None, bases=None, library=None, taus=None, callback=None, init_images=None):
    """Separate a multichannel mixture.

    Parameters
    ----------
    x : ndarray, (T, M)
        Mixture with ``M >= 2`` channels.
    cfg : SeparationConfig
    bases : sequence of (F, K) arrays or SpectralBasis, informed mode
        Listed in the order of the sources' delays (ascending) unless
        ``taus`` is given.
    library : BasisLibrary, detect mode
    taus : sequence of float, optional
        Source delays in seconds; skips the GCC-PHAT estimate and fixes
        the source order.
    init_images : ndarray (N, F, L, M), optional
        Initial image spectrograms replacing the TDOA clustering.
    callback : callable, optional
        Called as ``callback(iteration, images)`` after every outer
        iteration with the current (N, F, L, M) image spectrograms.

    Returns
    -------
    SeparationResult
    """
    cfg = SeparationConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"need a (T, M>=2) mixture, got shape {x.shape}")
    U = _check_priors(cfg, bases, library)
    N = cfg.n_sources
    rng = np.random.default_rng(cfg.seed)
    X = analyze(x, cfg.stft)
    F, L, M = X.shape
    win = cfg.neighborhood

    if init_images is not None:
        c_hat = np.asarray(init_images, dtype=np.complex128)
        if c_hat.shape != (N, F, L, M):
            raise ValueError(f"init_images must be {(N, F, L, M)}, got {c_hat.shape}")
        taus = np.full(N, np.nan) if taus is None else np.asarray(taus, dtype=np.float64)
    else:
        if taus is None:
            taus = estimate_tdoas(X, N, cfg.stft, cfg.spacing) if N > 1 else np.zeros(1)
        taus = np.asarray(taus, dtype=np.float64)
        if taus.shape != (N,):
            raise ValueError(f"expected {N} delays, got {taus.shape}")
        _, c_hat = cluster_tf_points(X, taus, cfg.stft)

    eye = np.broadcast_to(np.eye(M, dtype=np.complex128), (N, F, L, M, M))
    gains, sigma_c = eye, eye
    rx = empirical_covariance(X, win)
    coefs = [None] * N
    spatial = None
    params = None
    objective, detections, likelihoods = [], [], []
    picks = None
    converged = False
    for it in range(cfg.outer_iters):
        rt = [estep_statistics(c_hat[n], gains[n], sigma_c[n], win) for n in range(N)]
        if cfg.mode == "blind":
            for n in range(N):
                Vc, _ = tensor_views(rt[n])
                U[n] = extract_basis(Vc, cfg.n_basis, cfg.beta_e, cfg.extract_iters, rng, init=U[n])
        elif cfg.mode == "detect":
            worsened = len(objective) >= 2 and objective[-1] > objective[-2]
            if picks is None or it % cfg.redetect_every == 0 or worsened:
                ds = [
                    detect_contributions(tensor_views(r)[0], library, cfg.beta_d, cfg.detect_iters, rng)
                    for r in rt
                ]
                new = select_bases(ds, library, N)
                for n in range(N):
                    if picks is not None and new[n] != picks[n]:
                        coefs[n] = None
                picks = new
                likelihoods.append(np.stack([block_likelihoods(d, library) for d in ds]))
                U = [library.blocks[z].matrix for z in picks]
            detections.append(list(picks))
        iters = cfg.inner_first if it == 0 else cfg.inner_iters
        params = estimate_parameters(rt, U, iters, cfg.beta_s, coefs, spatial, rng)
        if cfg.mode == "detect":
            params.labels = [library.blocks[z].label for z in picks]
        coefs, spatial = params.coefs, params.spatial
        sigma_c = source_covariances(params)
        sx = sigma_c.sum(axis=0)
        gains = wiener_gains(sigma_c, cfg.mu, sx)
        c_hat = np.stack([apply_gain(gains[n], X) for n in range(N)])
        objective.append(neg_log_likelihood(rx, sx))
        logger.debug("iteration %d: objective %.6e", it + 1, objective[-1])
        if callback is not None:
            callback(it, c_hat)
        if convergence_check(objective, cfg.convergence_tol, cfg.patience):
            converged = True
            break

    images = np.stack([synthesize(c_hat[n], cfg.stft, length=x.shape[0]) for n in range(N)])
    return SeparationResult(images, c_hat, params, objective, detections, likelihoods, taus, converged)
