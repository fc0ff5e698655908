import json
import subprocess
import sys

import numpy as np
import pytest

from ntfsep.cli import main
from ntfsep.corpus import make_voices, utterance
from ntfsep.library_io import load_library
from ntfsep.wavio import read_wav, write_wav

FS = 16000


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Voice recordings, a trained 3-block library and a 2-source mixture."""
    d = tmp_path_factory.mktemp("cli")
    voices = make_voices(3, seed=0)
    for i, v in enumerate(voices):
        for k in range(2):
            write_wav(d / f"v{i}_{k}.wav", utterance(v, 2.0, FS, np.random.default_rng(10 * i + k)), FS)
    spec = {"sources": ["v0_1.wav", "v2_1.wav"], "delays": [[0, 5], [5, 0]], "output": "mix.wav",
            "reference_dir": "refs", "seed": 1}
    (d / "spec.json").write_text(json.dumps(spec))
    return d


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run([], capsys)[0] == 2
    code, _, err = run(["separate", "--bogus"], capsys)
    assert code == 2 and "usage" in err
    code, _, err = run(["separate", "--mix", "x.wav", "--mode", "nope", "--out-dir", "o"], capsys)
    assert code == 2


def test_runtime_errors_exit_1(capsys, tmp_path):
    code, _, err = run(["eval", "--est", str(tmp_path / "missing.wav"), "--ref", str(tmp_path / "r.wav")], capsys)
    assert code == 1 and "error" in err
    (tmp_path / "junk.wav").write_bytes(b"RIFF\0\0")
    code, _, err = run(["detect", "--mix", str(tmp_path / "junk.wav"), "--lib", "x"], capsys)
    assert code == 1


def test_train_mix_detect_separate_eval(workdir, capsys, monkeypatch):
    monkeypatch.chdir(workdir)
    lib = "lib.ntfl"
    for i in range(3):
        args = ["train", "--in", f"v{i}_0.wav", "--k", "8", "--iters", "60", "--label", f"voice{i}", "--out", lib]
        if i:
            args.append("--append")
        code, out, _ = run(args, capsys)
        assert code == 0, out
    assert load_library(lib).labels == ["voice0", "voice1", "voice2"]

    # a clean training-set source is detected as its own block
    code, out, _ = run(["detect", "--mix", "v1_0.wav", "--lib", lib, "--iters", "60"], capsys)
    assert code == 0 and "block_1=2" in out

    code, out, _ = run(["mix", "--spec", "spec.json"], capsys)
    assert code == 0 and "seed=1" in out
    assert read_wav("mix.wav")[0].shape[1] == 2

    # sources come out in ascending-delay order: v2 (tau = -5) first, then v0
    code, out, err = run(["separate", "--mix", "mix.wav", "--mode", "informed", "--lib", lib, "--blocks", "3,1",
                          "--k", "8", "--outer-iters", "3", "--inner-first", "20", "--out-dir", "sep"], capsys)
    assert code == 0, err
    report = (workdir / "sep" / "report.txt").read_text()
    assert "seed=0" in report and "objective=" in report
    assert read_wav("sep/source2.wav")[0].shape[1] == 2

    code, out, _ = run(["eval", "--est", "sep/source1.wav", "sep/source2.wav",
                        "--ref", "refs/ref2.wav", "refs/ref1.wav", "--filter-len", "64", "--kv", "m.txt"], capsys)
    assert code == 0 and "best permutation" in out
    kv = dict(line.split("=") for line in (workdir / "m.txt").read_text().split())
    assert float(kv["mean_sdr"]) > 10
    assert kv["best_ref_1"] == "1"


def test_separate_informed_needs_bases(workdir, capsys, monkeypatch):
    monkeypatch.chdir(workdir)
    code, _, err = run(["separate", "--mix", "mix.wav", "--mode", "informed", "--out-dir", "o"], capsys)
    assert code == 2 and "--bases" in err


def test_eval_identical_is_capped(workdir, capsys, monkeypatch):
    monkeypatch.chdir(workdir)
    run(["mix", "--spec", "spec.json"], capsys)
    code, out, _ = run(["eval", "--est", "refs/ref1.wav", "refs/ref2.wav",
                        "--ref", "refs/ref1.wav", "refs/ref2.wav", "--filter-len", "32"], capsys)
    assert code == 0 and "250.00" in out


def test_threads_env(workdir, capsys, monkeypatch):
    monkeypatch.chdir(workdir)
    run(["mix", "--spec", "spec.json"], capsys)
    monkeypatch.setenv("NTF_THREADS", "1")
    assert run(["eval", "--est", "refs/ref1.wav", "refs/ref2.wav", "--ref", "refs/ref1.wav", "refs/ref2.wav",
                "--filter-len", "16"], capsys)[0] == 0
    monkeypatch.setenv("NTF_THREADS", "many")
    assert run(["eval", "--est", "refs/ref1.wav", "--ref", "refs/ref1.wav"], capsys)[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ntfsep.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "separate" in res.stdout
    res = subprocess.run([sys.executable, "-m", "ntfsep.cli", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr
