"""Image-based separation metrics: SDR, ISR, SIR and SAR.

For each channel ``c`` an estimate is split by nested least-squares
projections into

* target: its projection onto the reference image of source ``j``
  (channel ``c``, no shift),
* spatial distortion: the additional part explained by ``filter_len``
  time shifts of that reference,
* interference: the additional part explained by shifts of all references,
* artifacts: the remainder.

The target therefore absorbs any scalar gain, so every metric is invariant
to scaling the estimate. Components are mutually orthogonal and sum to the
estimate zero-padded by ``filter_len - 1`` samples. Ratios are capped at
+-250 dB.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz
from scipy.signal import fftconvolve

CAP_DB = 250.0
FILTER_LEN = 512
DEPENDENCE_TOL = 1e-10
"""Residual energy fraction below which a reference counts as a combination of earlier ones."""
RIDGE = 1e-10
"""Ridge added to the shifted-reference Gram matrices, relative to their mean diagonal.

Band-limited references make those matrices numerically singular even when
the references themselves are independent."""

__all__ = ["CAP_DB", "MetricReport", "decompose", "score", "evaluate"]


def _db(num, den):
    if num <= 0:
        return -CAP_DB
    if den <= 0:
        return CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -CAP_DB, CAP_DB))


class _ChannelProjector:
    """Shifted-reference projections for one channel."""

    def __init__(self, refs, filter_len):
        self.refs = refs  # (N, T)
        N, T = refs.shape
        self.L = filter_len
        self.n_out = T + filter_len - 1
        self.nfft = 1 << int(np.ceil(np.log2(self.n_out + filter_len)))
        self.spec = np.fft.rfft(refs, self.nfft)
        L = filter_len
        G = np.empty((N * L, N * L))
        for a in range(N):
            for b in range(N):
                c = np.fft.irfft(np.conj(self.spec[a]) * self.spec[b], self.nfft)
                # block[tau, sigma] = sum_u s_a(u) s_b(u + tau - sigma)
                col = c[:L]
                row = np.concatenate([[c[0]], c[-1:-L:-1]])
                G[a * L:(a + 1) * L, b * L:(b + 1) * L] = toeplitz(col, row)
        self.energy = np.array([G[a * L, a * L] for a in range(N)])
        for a in range(N):
            if not self.energy[a] > 0:
                raise ValueError(f"reference of source {a} is silent")
        self._check_independent(G[::L, ::L])
        self.own = [self._factor(G[a * L:(a + 1) * L, a * L:(a + 1) * L]) for a in range(N)]
        self.all = self._factor(G)

    @staticmethod
    def _check_independent(C):
        """Raise if a reference is (nearly) a combination of the earlier ones."""
        d = np.sqrt(np.diag(C))
        C = C / np.outer(d, d)
        for k in range(1, len(C)):
            sol = np.linalg.lstsq(C[:k, :k], C[:k, k], rcond=None)[0]
            if 1.0 - C[k, :k] @ sol < DEPENDENCE_TOL:
                raise ValueError(
                    f"reference of source {k} is linearly dependent on the others; "
                    "the projection basis is rank-deficient"
                )

    @staticmethod
    def _factor(G):
        ridge = RIDGE * np.mean(np.diag(G))
        return cho_factor(G + ridge * np.eye(len(G)), lower=True, check_finite=False)

    def _corr(self, x):
        """``sum_u s_n(u) x(u + tau)`` for tau < L, stacked over sources."""
        xf = np.fft.rfft(x, self.nfft)
        c = np.fft.irfft(np.conj(self.spec) * xf, self.nfft)
        return c[:, :self.L]

    def _synth(self, coef):
        """``sum_n (coef_n * s_n)`` truncated to the output length."""
        out = np.zeros(self.n_out)
        for a, h in enumerate(coef):
            y = fftconvolve(self.refs[a], h)
            out[:len(y)] += y[:self.n_out]
        return out

    def components(self, est, j):
        e = np.zeros(self.n_out)
        e[:len(est)] = est
        g = self._corr(est)[j, 0] / self.energy[j]
        target = np.zeros(self.n_out)
        target[:self.refs.shape[1]] = g * self.refs[j]
        r1 = e - target
        coef = np.zeros((len(self.refs), self.L))
        coef[j] = cho_solve(self.own[j], self._corr(r1)[j], check_finite=False)
        spatial = self._synth(coef)
        r2 = r1 - spatial
        coef = cho_solve(self.all, self._corr(r2).ravel(), check_finite=False)
        interf = self._synth(coef.reshape(len(self.refs), self.L))
        artif = r2 - interf
        return target, spatial, interf, artif


def _projectors(references, filter_len):
    refs = np.asarray(references, dtype=np.float64)
    if refs.ndim == 2:
        refs = refs[..., None]
    if refs.ndim != 3:
        raise ValueError(f"references must be (N, T, M), got {refs.shape}")
    out = []
    for c in range(refs.shape[2]):
        try:
            out.append(_ChannelProjector(refs[:, :, c], filter_len))
        except ValueError as exc:
            raise ValueError(f"channel {c}: {exc}") from None
    return out


def _check_estimate(est, refs):
    est = np.asarray(est, dtype=np.float64)
    if est.ndim == 1:
        est = est[:, None]
    if est.shape != refs.shape[1:]:
        raise ValueError(f"estimate shape {est.shape} differs from reference {refs.shape[1:]}")
    return est


def decompose(estimate, references, j, filter_len=FILTER_LEN):
    """Split ``estimate`` into target, spatial, interference and artifact parts.

    Parameters
    ----------
    estimate : (T, M) or (T,)
    references : (N, T, M) reference images
    j : index of the target source

    Returns
    -------
    dict of (T + filter_len - 1, M) arrays with keys
    ``target``, ``spatial``, ``interference``, ``artifact``
    """
    refs = np.asarray(references, dtype=np.float64)
    if refs.ndim == 2:
        refs = refs[..., None]
    est = _check_estimate(estimate, refs)
    return _decompose(est, _projectors(refs, filter_len), j)


def _decompose(est, projectors, j):
    parts = [p.components(est[:, c], j) for c, p in enumerate(projectors)]
    names = ("target", "spatial", "interference", "artifact")
    return {k: np.stack([p[i] for p in parts], axis=1) for i, k in enumerate(names)}


def _ratios(comp):
    e = {k: float(np.sum(v**2)) for k, v in comp.items()}
    t, s, i, a = e["target"], e["spatial"], e["interference"], e["artifact"]
    ts = float(np.sum((comp["target"] + comp["spatial"]) ** 2))
    tsi = float(np.sum((comp["target"] + comp["spatial"] + comp["interference"]) ** 2))
    return (
        _db(t, s + i + a),
        _db(t, s),
        _db(ts, i),
        _db(tsi, a),
    )


@dataclass
class MetricReport:
    """Per-source metrics in dB; ``permutation[n]`` is the reference matched to estimate ``n``."""

    sdr: np.ndarray
    isr: np.ndarray
    sir: np.ndarray
    sar: np.ndarray
    permutation: tuple

    @property
    def means(self):
        return {k: float(np.mean(getattr(self, k))) for k in ("sdr", "isr", "sir", "sar")}

    def table(self, title=None):
        lines = [] if title is None else [title]
        lines.append(f"{'source':>8} {'ref':>4} {'SDR':>9} {'ISR':>9} {'SIR':>9} {'SAR':>9}")
        for n, p in enumerate(self.permutation):
            lines.append(
                f"{n + 1:>8} {p + 1:>4} {self.sdr[n]:9.2f} {self.isr[n]:9.2f} "
                f"{self.sir[n]:9.2f} {self.sar[n]:9.2f}"
            )
        m = self.means
        lines.append(
            f"{'mean':>8} {'':>4} {m['sdr']:9.2f} {m['isr']:9.2f} {m['sir']:9.2f} {m['sar']:9.2f}"
        )
        return "\n".join(lines)

    def keyvalues(self, prefix=""):
        out = []
        for n, p in enumerate(self.permutation):
            for k in ("sdr", "isr", "sir", "sar"):
                out.append(f"{prefix}{k}_{n + 1}={getattr(self, k)[n]:.2f}")
            out.append(f"{prefix}ref_{n + 1}={p + 1}")
        for k, v in self.means.items():
            out.append(f"{prefix}mean_{k}={v:.2f}")
        return "\n".join(out)


def _all_pairs(estimates, references, filter_len, pairs):
    refs = np.asarray(references, dtype=np.float64)
    if refs.ndim == 2:
        refs = refs[..., None]
    ests = [_check_estimate(e, refs) for e in estimates]
    proj = _projectors(refs, filter_len)
    return {(n, j): _ratios(_decompose(ests[n], proj, j)) for n, j in pairs}


def _report(table, perm):
    vals = np.array([table[(n, j)] for n, j in enumerate(perm)])
    return MetricReport(vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3], tuple(perm))


def evaluate(estimates, references, filter_len=FILTER_LEN):
    """Fixed-order and best-permutation reports.

    The best permutation maximises the mean SDR over all assignments of
    estimates to references (ties keep the lexicographically first).

    Returns
    -------
    fixed, best : MetricReport
    """
    N = len(estimates)
    if len(references) != N:
        raise ValueError(f"{N} estimates but {len(references)} references")
    table = _all_pairs(estimates, references, filter_len, itertools.product(range(N), range(N)))
    fixed = _report(table, range(N))
    best = max(
        itertools.permutations(range(N)),
        key=lambda p: np.mean([table[(n, j)][0] for n, j in enumerate(p)]),
    )
    return fixed, _report(table, best)


def score(estimates, references, filter_len=FILTER_LEN, best_permutation=False):
    """Metrics for ``estimates[n]`` against ``references[n]``, or the best matching."""
    N = len(estimates)
    if len(references) != N:
        raise ValueError(f"{N} estimates but {len(references)} references")
    if best_permutation:
        return evaluate(estimates, references, filter_len)[1]
    table = _all_pairs(estimates, references, filter_len, [(n, n) for n in range(N)])
    return _report(table, range(N))
