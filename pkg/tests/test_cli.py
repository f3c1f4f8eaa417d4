import os

import joblib
import numpy as np
import pandas as pd

from cli import main
from conftest import random_factors
from tensors.reports import read_summary
from tensors.tensor_io import read_factors, read_tensor, write_factors


def test_unknown_flag_exits_with_2(capsys):
    assert main(["decompose", "--no-such-flag"]) == 2


def test_missing_subcommand_exits_with_2():
    assert main([]) == 2


def test_score_of_identical_directories(tmp_path, capsys, rng):
    write_factors(str(tmp_path / "a"), random_factors(rng, (3, 4, 5), 2))
    assert main(["score", str(tmp_path / "a"), str(tmp_path / "a")]) == 0
    assert "score=1.0" in capsys.readouterr().out


def test_synth_then_decompose_and_path(tmp_path):
    out = str(tmp_path / "synth")
    assert main(["synth", "--shape", "6", "6", "6", "--rank", "2", "--seed", "7", "-o", out]) == 0
    z = read_tensor(os.path.join(out, "tensor.txt"))
    assert z.shape == (6, 6, 6)
    truth = read_factors(os.path.join(out, "truth"))
    assert truth.rank == 2

    single = str(tmp_path / "single")
    rc = main([
        "decompose", "--tensor", os.path.join(out, "tensor.txt"), "--rank", "2", "--lam", "1e-6",
        "--seed", "1", "--max-iters", "30", "--truth", os.path.join(out, "truth"), "-o", single,
    ])
    assert rc == 0
    summary = read_summary(os.path.join(single, "summary.txt"))
    assert summary["rank"] is not None and summary["score"] is not None
    assert read_factors(os.path.join(single, "factors")).rank == 2

    run = str(tmp_path / "path")
    rc = main([
        "path", "--tensor", os.path.join(out, "tensor.txt"), "--rank", "3", "--alpha", "0.2",
        "--lambda-grid", "1e-6", "1e2", "1e10", "--max-iters", "30", "--refine-max-iters", "10",
        "--seed", "3", "--truth", os.path.join(out, "truth"), "-o", run,
    ])
    assert rc == 0
    frame = pd.read_csv(os.path.join(run, "path.csv"))
    assert frame["lambda"].iloc[0] == 1e-6
    entries = joblib.load(os.path.join(run, "path_entries.joblib"))
    assert len(entries) == 3 and entries[-1].detected_rank == 0
    assert os.path.exists(os.path.join(run, "selected", "manifest.txt"))
    assert read_summary(os.path.join(run, "summary.txt"))["nzt"] is not None


def test_runs_are_reproducible_with_a_seed(tmp_path):
    out = str(tmp_path / "synth")
    main(["synth", "--shape", "5", "5", "5", "--rank", "2", "--seed", "11", "-o", out])
    tensor = os.path.join(out, "tensor.txt")
    args = ["decompose", "--tensor", tensor, "--rank", "2", "--lam", "0.1", "--seed", "5", "--max-iters", "10"]
    assert main(args + ["-o", str(tmp_path / "a")]) == 0
    assert main(args + ["-o", str(tmp_path / "b")]) == 0
    a = read_factors(str(tmp_path / "a" / "factors"))
    b = read_factors(str(tmp_path / "b" / "factors"))
    for x, y in zip(a.factors, b.factors):
        np.testing.assert_array_equal(x, y)


def test_replicates_get_their_own_directories(tmp_path):
    out = str(tmp_path / "reps")
    rc = main([
        "synth", "--shape", "4", "4", "4", "--rank", "2", "--cov", "unit", "--snr-db", "20",
        "--missing", "0.2", "--replicates", "2", "--seed", "1", "-o", out,
    ])
    assert rc == 0
    a = read_tensor(os.path.join(out, "rep_000", "tensor.txt"))
    b = read_tensor(os.path.join(out, "rep_001", "tensor.txt"))
    assert not np.array_equal(a.values, b.values)
    assert os.path.exists(os.path.join(out, "rep_000", "tensor.txt.mask"))


def test_als_rejects_masked_tensor(tmp_path, capsys):
    out = str(tmp_path / "synth")
    main(["synth", "--shape", "4", "4", "4", "--rank", "1", "--cov", "unit", "--missing", "0.5", "--seed", "2", "-o", out])
    rc = main(["als", "--tensor", os.path.join(out, "tensor.txt"), "--rank", "1", "-o", str(tmp_path / "als")])
    assert rc == 2
    assert "fully observed" in capsys.readouterr().err


def test_als_baseline_runs(tmp_path):
    out = str(tmp_path / "synth")
    main(["synth", "--shape", "5", "5", "5", "--rank", "2", "--seed", "4", "-o", out])
    rc = main([
        "als", "--tensor", os.path.join(out, "tensor.txt"), "--rank", "2", "--init", "nvecs",
        "--truth", os.path.join(out, "truth"), "-o", str(tmp_path / "als"),
    ])
    assert rc == 0
    assert read_summary(str(tmp_path / "als" / "summary.txt"))["iterations"] >= 1


def test_bad_values_exit_with_2(tmp_path):
    assert main(["synth", "--shape", "4", "4", "--rank", "1", "--cov", "simulation", "-o", str(tmp_path)]) == 2
    assert main(["decompose", "--tensor", str(tmp_path / "nope.txt"), "--rank", "1", "-o", str(tmp_path)]) == 2
    assert main(["synth", "--shape", "4", "4", "4", "--rank", "0", "-o", str(tmp_path)]) == 2
