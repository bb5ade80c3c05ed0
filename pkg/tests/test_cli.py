import json

import numpy as np
import pandas as pd
import pytest

from app import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main

SMALL = [
    "--set", "height=4", "--set", "width=4", "--set", "in_channels=2", "--set", "embed_dim=4",
    "--set", "num_ids=4", "--set", "per_id=8", "--set", "batch_p=2", "--set", "batch_k=2",
    "--set", "epochs=1", "--set", "warmup_iters=0", "--set", "depth=2"
]


def run_dir(root, command):
    found = sorted(root.glob(f"{command}-*"))
    assert len(found) == 1
    return found[0]


def test_bench_graphgen(tmp_path):
    status = main(["bench-graphgen", "--out", str(tmp_path), "--set", "bench_sizes=8, 16", "--set", "bench_modes=four"])
    assert status == EXIT_OK
    out = run_dir(tmp_path, "bench-graphgen")
    bench = pd.read_csv(out / "bench_graphgen.csv")
    assert bench["n"].tolist() == [8, 16]
    for line in (out / "bench_graphgen.csv").read_text().splitlines()[1:]:
        fast, oracle = line.split(",")[2:4]
        assert "e" not in fast + oracle
        assert len(fast.split(".")[1]) == len(oracle.split(".")[1]) == 6
    for name in ("bench_graphgen.html", "report.md", "manifest.json", "config.txt"):
        assert (out / name).is_file()


def test_train_writes_artifacts(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path)] + SMALL) == EXIT_OK
    out = run_dir(tmp_path, "train")
    log = pd.read_csv(out / "training_log.csv")
    assert log["epoch"].tolist() == [0, 1]
    assert ["alpha_0", "alpha_1"] == [c for c in log.columns if c.startswith("alpha")]
    metrics = pd.read_csv(out / "metrics.csv")
    assert metrics["metric"].tolist() == ["mAP", "rank1", "rank5", "rank10"]
    assert (out / "checkpoint.npz").is_file()

    manifest = json.loads((out / "manifest.json").read_text())
    assert "training_log.csv" in json.dumps(manifest)
    assert f"Artifacts in {out}" in capsys.readouterr().out


def test_dump_attention_after_train(tmp_path):
    assert main(["train", "--out", str(tmp_path / "train")] + SMALL) == EXIT_OK
    checkpoint = run_dir(tmp_path / "train", "train") / "checkpoint.npz"

    status = main(["dump-attention", "--out", str(tmp_path / "dump"), "--checkpoint", str(checkpoint),
                   "--sample", "3"] + SMALL)
    assert status == EXIT_OK
    out = run_dir(tmp_path / "dump", "dump-attention")
    for layer in range(2):
        frame = pd.read_csv(out / f"attention_layer{layer}.csv")
        assert list(frame.columns) == ["row", "col", "weight"]
        np.testing.assert_allclose(frame.groupby("row")["weight"].sum(), 1.0, atol=1e-6)
        assert (out / f"attention_layer{layer}.html").is_file()


def test_dump_attention_sample_out_of_range(tmp_path):
    assert main(["train", "--out", str(tmp_path / "train")] + SMALL) == EXIT_OK
    checkpoint = run_dir(tmp_path / "train", "train") / "checkpoint.npz"
    status = main(["dump-attention", "--out", str(tmp_path / "dump"), "--checkpoint", str(checkpoint),
                   "--sample", "999"] + SMALL)
    assert status == EXIT_CONFIG


def test_dump_attention_with_mismatched_checkpoint(tmp_path):
    assert main(["train", "--out", str(tmp_path / "train")] + SMALL) == EXIT_OK
    checkpoint = run_dir(tmp_path / "train", "train") / "checkpoint.npz"
    status = main(["dump-attention", "--out", str(tmp_path / "dump"), "--checkpoint", str(checkpoint)]
                  + SMALL + ["--set", "depth=1"])
    assert status == EXIT_CONFIG


def test_sweep_layers(tmp_path):
    status = main(["sweep", "--axis", "layers", "--out", str(tmp_path), "--set", "sweep_layers=0, 1",
                   "--set", "seeds=0"] + SMALL)
    assert status == EXIT_OK
    out = run_dir(tmp_path, "sweep")
    assert pd.read_csv(out / "sweep_layers.csv")["setting"].tolist() == [0, 1]
    assert len(pd.read_csv(out / "sweep_layers_summary.csv")) == 2


def test_verify_passes(tmp_path):
    assert main(["verify", "--out", str(tmp_path), "--set", "verify_seeds=1"]) == EXIT_OK
    frame = pd.read_csv(run_dir(tmp_path, "verify") / "verify.csv")
    assert frame["suite"].tolist() == ["oracle", "attention", "gradient", "locality"]
    assert (frame["status"] == "pass").all()


def test_verify_with_corrupted_grid_fails(tmp_path, capsys):
    status = main(["verify", "--out", str(tmp_path), "--set", "verify_seeds=1", "--set", "verify_corrupt_grid=3x4"])
    assert status == EXIT_FAILURE
    frame = pd.read_csv(run_dir(tmp_path, "verify") / "verify.csv")
    oracle = frame.set_index("suite").loc["oracle"]
    assert oracle["status"] == "fail"
    assert "3x4/four" in oracle["failed"]
    assert "FAIL oracle: 3x4/four" in capsys.readouterr().out


@pytest.mark.parametrize("extra", [
    ["--set", "colour=blue"],
    ["--set", "depth"],
    ["--set", "depth=-1"],
    ["--config", "missing.cfg"],
])
def test_configuration_errors(tmp_path, extra):
    assert main(["train", "--out", str(tmp_path)] + extra) == EXIT_CONFIG
    assert not list(tmp_path.glob("train-*"))


def test_config_file_and_seed_flag(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("bench_sizes = 8\nbench_modes = eight  # diagonals\n")
    assert main(["bench-graphgen", "--config", str(config), "--seed", "5", "--out", str(tmp_path)]) == EXIT_OK
    saved = (run_dir(tmp_path, "bench-graphgen") / "config.txt").read_text()
    assert "seed = 5" in saved
    assert "bench_modes = eight" in saved


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    assert main(["bench-graphgen", "--out", str(blocker), "--set", "bench_sizes=8"]) == EXIT_FAILURE


def test_unknown_command():
    with pytest.raises(SystemExit) as excinfo:
        main(["fly"])
    assert excinfo.value.code == 2
