"""Time the compiled and pure-Python kernels on separation-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--frames 94] [--pipeline]

Also checks that both backends agree on every input before timing. With
``--pipeline`` a short informed separation is timed end to end under each
backend (each in a fresh interpreter, since the backend is fixed at import).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ntfsep.kernels import BACKENDS
from ntfsep.localgauss import hanning_window


def make_inputs(F, L, M, N, seed=0):
    rng = np.random.default_rng(seed)
    obs = rng.gamma(1.0, size=(F, L))
    model = rng.gamma(1.0, size=(F, L))
    x = rng.standard_normal((F, L, M)) + 1j * rng.standard_normal((F, L, M))
    a = rng.standard_normal((N, F, L, M, 2)) + 1j * rng.standard_normal((N, F, L, M, 2))
    sc = a @ np.conj(np.swapaxes(a, -1, -2))
    return {
        "beta_terms": (obs, model, 0.6),
        "beta_div_sum": (obs, model, 0.6),
        "local_cov": (x, hanning_window()),
        "smooth_gains": (sc, sc.sum(axis=0), 0.1, 1e-9, 1e-30),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


_PIPELINE = """
import time
import numpy as np
from ntfsep import kernels
from ntfsep.pipeline import SeparationConfig, separate
rng = np.random.default_rng(0)
fs, T = 16000, 3 * 16000
src = rng.standard_normal((3, T)) * (rng.random((3, T // 1024 + 1)).repeat(1024, 1)[:, :T] > 0.5)
x = np.zeros((T, 2))
for n, d in enumerate((-6, 0, 6)):
    x[:, 0] += src[n]
    x[:, 1] += np.roll(src[n], d)
bases = [rng.random((1025, 15)) for _ in range(3)]
cfg = SeparationConfig(mode="informed", outer_iters=OUTER, inner_first=20)
t0 = time.perf_counter()
separate(x, cfg, bases=bases, taus=np.array([-6, 0, 6]) / fs)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def time_pipeline(outer):
    """Seconds for one informed separation under each available backend."""
    out = {}
    for name in sorted(BACKENDS):
        env = dict(os.environ)
        env.pop("NTFSEP_PURE_PYTHON", None)
        if name == "python":
            env["NTFSEP_PURE_PYTHON"] = "1"
        res = subprocess.run(
            [sys.executable, "-c", _PIPELINE.replace("OUTER", str(outer))],
            env=env, capture_output=True, text=True, check=True,
        )
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--bins", type=int, default=1025)
    ap.add_argument("--frames", type=int, default=94)
    ap.add_argument("--channels", type=int, default=2)
    ap.add_argument("--sources", type=int, default=3)
    ap.add_argument("--pipeline", action="store_true", help="also time a full separation")
    ap.add_argument("--outer", type=int, default=5, help="outer iterations for --pipeline")
    args = ap.parse_args(argv)

    inputs = make_inputs(args.bins, args.frames, args.channels, args.sources)
    names = sorted(BACKENDS)
    if "compiled" not in BACKENDS:
        print("compiled extension not built; timing the python backend only")
    print(f"F={args.bins} L={args.frames} M={args.channels} N={args.sources}, best of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for kernel, call_args in inputs.items():
        outs = [getattr(BACKENDS[n], kernel)(*call_args) for n in names]
        if len(outs) == 2 and not _same(*outs):
            raise SystemExit(f"{kernel}: backends disagree")
        times = [
            min(timeit.repeat(lambda f=getattr(BACKENDS[n], kernel): f(*call_args), number=1, repeat=args.repeat))
            for n in names
        ]
        row = f"{kernel:<14}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[names.index('python')] / times[names.index('compiled')]:9.1f}x"
        print(row)
    if args.pipeline:
        t = time_pipeline(args.outer)
        row = f"{'separate':<14}" + "".join(f"{t[n]:11.2f}s" for n in names)
        if len(t) == 2:
            row += f"{t['python'] / t['compiled']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
