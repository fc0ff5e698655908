"""Command-line interface: ``ntfsep {train,mix,detect,separate,eval}``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
The ``NTF_THREADS`` environment variable caps the threads used by the
linear-algebra backend.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import library_io, mixing, wavio
from .localgauss import empirical_covariance, tensor_views
from .metrics import FILTER_LEN, evaluate
from .pipeline import MODES, SeparationConfig, separate
from .priors import (
    BasisLibrary,
    block_likelihoods,
    build_library,
    detect_contributions,
    select_bases,
    train_basis,
    training_matrix,
)
from .stft import StftConfig, analyze
from .tdoa import cluster_tf_points, estimate_tdoas

logger = logging.getLogger("ntfsep")


class UsageError(Exception):
    """Raised for invalid argument combinations found after parsing."""


def _read(path, rate=None):
    data, r = wavio.read_wav(path)
    if rate is not None and r != rate:
        raise ValueError(f"{path}: sample rate {r} Hz, expected {rate} Hz")
    return data, r


def _stft_config(args, rate):
    return StftConfig(sample_rate=rate, window_len=args.window, hop=args.hop)


def cmd_train(args):
    rng = np.random.default_rng(args.seed)
    groups = [[p] for p in args.inputs] if args.per_file else [args.inputs]
    blocks = []
    rate = None
    for group in groups:
        signals = []
        for p in group:
            data, rate = _read(p, rate)
            signals.append(data.mean(axis=1))
        cfg = _stft_config(args, rate)
        Vt = training_matrix(signals, cfg)
        label = Path(group[0]).stem if (args.per_file or args.label is None) else args.label
        blocks.append(train_basis(Vt, args.k, args.beta, args.iters, rng, label=label))
        print(f"trained {label!r}: {Vt.shape[1]} frames, K={args.k}, beta={args.beta}")
    if args.append and os.path.exists(args.out):
        blocks = library_io.load_library(args.out).blocks + blocks
    library_io.save_library(args.out, build_library(blocks))
    print(f"wrote {args.out} ({len(blocks)} blocks) seed={args.seed}")
    return 0


def cmd_mix(args):
    spec = mixing.load_mix_spec(args.spec)
    mix, images, rate = mixing.synth_mixture(spec)
    print(
        f"wrote {spec.path(spec.output)}: {mix.shape[0]} samples, {mix.shape[1]} channels, "
        f"{len(images)} sources at {rate} Hz, seed={spec.seed}"
    )
    return 0


def cmd_detect(args):
    lib = library_io.load_library(args.lib)
    x, rate = _read(args.mix)
    cfg = _stft_config(args, rate)
    X = analyze(x, cfg)
    if lib.n_bins != cfg.n_bins:
        raise ValueError(f"library has {lib.n_bins} bins, STFT gives {cfg.n_bins}")
    if args.n_sources > 1:
        if X.shape[2] < 2:
            raise ValueError("detecting several sources needs a multichannel mixture")
        taus = estimate_tdoas(X, args.n_sources, cfg, args.spacing)
        _, images = cluster_tf_points(X, taus, cfg)
    else:
        images = X[None]
    rng = np.random.default_rng(args.seed)
    ds = [
        detect_contributions(tensor_views(empirical_covariance(img))[0], lib, args.beta_d, args.iters, rng)
        for img in images
    ]
    picks = select_bases(ds, lib, args.n_sources)
    for n, (z, d) in enumerate(zip(picks, ds)):
        lik = block_likelihoods(d, lib)
        print(f"source {n + 1}: block {z + 1} ({lib.blocks[z].label}) likelihood {lik[z]:.3f}")
    for n, z in enumerate(picks):
        print(f"block_{n + 1}={z + 1}")
    print(f"seed={args.seed}")
    return 0


def _informed_bases(args):
    if args.bases:
        blocks = []
        for p in args.bases:
            blocks.extend(library_io.load_library(p).blocks)
        return blocks
    if args.lib and args.blocks:
        lib = library_io.load_library(args.lib)
        try:
            idx = [int(b) - 1 for b in args.blocks.split(",")]
        except ValueError:
            raise UsageError(f"--blocks must be comma-separated integers, got {args.blocks!r}") from None
        for i in idx:
            if not 0 <= i < len(lib):
                raise UsageError(f"--blocks index {i + 1} outside 1..{len(lib)}")
        return [lib.blocks[i] for i in idx]
    raise UsageError("informed mode needs --bases FILE... or --lib FILE --blocks i,j,...")


def cmd_separate(args):
    x, rate = _read(args.mix)
    library, bases = None, None
    if args.mode == "informed":
        bases = _informed_bases(args)
        n_sources = len(bases)
    elif args.mode == "detect":
        if not args.lib:
            raise UsageError("detect mode needs --lib")
        library = library_io.load_library(args.lib)
        n_sources = args.n_sources
    else:
        n_sources = args.n_sources
    cfg = SeparationConfig(
        mode=args.mode,
        n_sources=n_sources,
        n_basis=args.k,
        beta_s=args.beta_s,
        beta_e=args.beta_e,
        beta_d=args.beta_d,
        mu=args.mu,
        outer_iters=args.outer_iters,
        inner_first=args.inner_first,
        inner_iters=args.inner_iters,
        redetect_every=args.redetect_every,
        stft=_stft_config(args, rate),
        spacing=args.spacing,
        seed=args.seed,
    )
    res = separate(x, cfg, bases=bases, library=library)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for n, img in enumerate(res.images):
        wavio.write_wav(out / f"source{n + 1}.wav", img, rate)
    lines = [
        f"mode={cfg.mode}",
        f"seed={cfg.seed}",
        f"n_sources={cfg.n_sources}",
        f"beta_s={cfg.beta_s}",
        f"mu={cfg.mu}",
        f"iterations={res.n_iter}",
        f"converged={int(res.converged)}",
        "taus_ms=" + ",".join(f"{t * 1e3:.4f}" for t in res.taus),
        "objective=" + ",".join(f"{v:.6e}" for v in res.objective),
    ]
    if res.detections:
        lines.append("detections=" + ";".join(",".join(str(z + 1) for z in d) for d in res.detections))
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print(f"separated {cfg.n_sources} sources in {res.n_iter} iterations -> {out}/")
    return 0


def cmd_eval(args):
    if len(args.est) != len(args.ref):
        raise UsageError(f"{len(args.est)} estimates but {len(args.ref)} references")
    rate = None
    ests, refs = [], []
    for p in args.est:
        d, rate = _read(p, rate)
        ests.append(d)
    for p in args.ref:
        d, rate = _read(p, rate)
        refs.append(d)
    T = min(len(a) for a in ests + refs)
    if any(len(a) != T for a in ests + refs):
        logger.warning("lengths differ; truncating all signals to %d samples", T)
    fixed, best = evaluate([e[:T] for e in ests], np.stack([r[:T] for r in refs]), args.filter_len)
    text = fixed.table("fixed order") + "\n\n" + best.table("best permutation")
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    if args.kv:
        Path(args.kv).write_text(fixed.keyvalues() + "\n" + best.keyvalues("best_") + "\n")
    return 0


def _add_stft(p):
    p.add_argument("--window", type=int, default=2048, help="STFT window length (samples)")
    p.add_argument("--hop", type=int, default=1024, help="STFT hop (samples)")


def build_parser():
    parser = argparse.ArgumentParser(prog="ntfsep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train spectral bases into a library file")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="WAV")
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--label", help="block label (default: first file name)")
    p.add_argument("--per-file", action="store_true", help="one block per input file")
    p.add_argument("--append", action="store_true", help="append to an existing library")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_stft(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mix", help="render a mixture from a JSON spec")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("detect", help="detect library blocks present in a mixture")
    p.add_argument("--mix", required=True)
    p.add_argument("--lib", required=True)
    p.add_argument("--beta-d", type=float, default=0.3)
    p.add_argument("--n-sources", type=int, default=1)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--spacing", type=float, default=0.2, help="microphone spacing (m)")
    p.add_argument("--seed", type=int, default=0)
    _add_stft(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("separate", help="separate a multichannel mixture")
    p.add_argument("--mix", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--lib")
    p.add_argument("--blocks", help="1-based library blocks for informed mode, e.g. 2,4,6")
    p.add_argument("--bases", nargs="+", metavar="NTFL")
    p.add_argument("--n-sources", type=int, default=3)
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--beta-s", type=float, default=0.6)
    p.add_argument("--beta-e", type=float, default=0.6)
    p.add_argument("--beta-d", type=float, default=0.3)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--outer-iters", type=int, default=100)
    p.add_argument("--inner-first", type=int, default=100)
    p.add_argument("--inner-iters", type=int, default=10)
    p.add_argument("--redetect-every", type=int, default=1)
    p.add_argument("--spacing", type=float, default=0.2, help="microphone spacing (m)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_stft(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("eval", help="score estimated images against references")
    p.add_argument("--est", nargs="+", required=True)
    p.add_argument("--ref", nargs="+", required=True)
    p.add_argument("--filter-len", type=int, default=FILTER_LEN)
    p.add_argument("--report", help="write the tables to this file")
    p.add_argument("--kv", help="write key=value metrics to this file")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    threads = os.environ.get("NTF_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            try:
                n = int(threads)
            except ValueError:
                raise UsageError(f"NTF_THREADS must be an integer, got {threads!r}") from None
            with threadpool_limits(limits=n):
                return args.func(args)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ntfsep {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"ntfsep {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
