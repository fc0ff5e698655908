import numpy as np
import pytest

from ntfsep.corpus import make_voices, utterance
from ntfsep.mixing import mix_sources
from ntfsep.priors import build_library, train_basis, training_matrix

FS = 16000


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def voices():
    return make_voices(6, seed=0)


@pytest.fixture(scope="session")
def library(voices):
    """Six trained bases (K=15, beta=0.9), one per synthetic voice."""
    blocks = []
    for i, v in enumerate(voices):
        sigs = [utterance(v, 4.0, FS, np.random.default_rng(100 + 10 * i + k)) for k in range(3)]
        blocks.append(train_basis(training_matrix(sigs), 15, 0.9, 200, np.random.default_rng(i), label=v.name))
    return build_library(blocks)


def corpus_mixture(voices, seed, t60, duration=3.0):
    """A seeded 3-voice, 2-mic mixture.

    Returns the mixture, the reference images sorted by inter-channel delay
    (the order the separator reports sources in), and the library indices of
    the voices in that order.
    """
    rng = np.random.default_rng(1000 + seed)
    idx = list(rng.choice(len(voices), 3, replace=False))
    srcs = [utterance(voices[i], duration, FS, rng) for i in idx]
    rel = np.array([-6, 0, 6])[rng.permutation(3)]
    d = np.stack([np.zeros(3), rel], 1)
    d -= d.min()
    mix, imgs = mix_sources(srcs, d, rng=rng, t60=t60)
    order = np.argsort(rel)
    return mix, imgs[order], [int(idx[o]) for o in order]


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line for the summary."""

    def record(n, ok, detail):
        _CRITERIA[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(_CRITERIA[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
