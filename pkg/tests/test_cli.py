import hashlib
import json
import subprocess
import sys

import pytest

from cae.cli import main
from cae.config import load_run_config, loads

SMALL = ["--set", "train.n_explore=3", "--set", "train.n_episodes=4", "--set", "train.n_train=2",
         "--set", "train.batch_size=16", "--set", "eval.trials=2"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_oracle_line_world(tmp_path, capsys):
    code, out, _ = run(capsys, "oracle", "--env", "line-world", "--h-max", 5, "--out", tmp_path)
    assert code == 0
    assert "rows: 108" in out and "violations: 0" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["min_horizon_from_start"]["2"] == 2


@pytest.mark.parametrize("variant", ["a", "d", "q"])
def test_oracle_other_variants(tmp_path, capsys, variant):
    code, out, _ = run(capsys, "oracle", "--env", "line-world", "--variant", variant, "--out", tmp_path)
    assert code == 0 and (tmp_path / "table.csv").exists()


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["oracle", "--env", "line-world", "--bogus"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "oracle", "--env", "line-world", "--set", "train.nonsense=3", "--out", tmp_path)
    assert code == 1 and "error" in err
    code, _, err = run(capsys, "oracle", "--env", "no-such-env", "--out", tmp_path)
    assert code == 1
    code, _, err = run(capsys, "oracle", "--env", "dubins", "--out", tmp_path)
    assert code == 1 and "--discretize" in err
    code, _, _ = run(capsys, "eval", "--env", "line-world", "--out", tmp_path)
    assert code == 1
    code, _, _ = run(capsys, "oracle", "--env", "line-world", "--threads", 0)
    assert code == 1


def test_discretized_oracle(tmp_path, capsys):
    code, out, _ = run(capsys, "oracle", "--env", "dubins-small", "--discretize", "--resolution", 1.0,
                       "--h-max", 2, "--out", tmp_path)
    assert code == 0 and "violations: 0" in out


def test_train_deterministic_and_manifest(tmp_path, capsys):
    for d in ("a", "b"):
        code, out, _ = run(capsys, "train", "--env", "line-world", "--seed", 5, *SMALL, "--out", tmp_path / d)
        assert code == 0 and "batches: 8" in out
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "checkpoint.json").read_bytes() == (b / "checkpoint.json").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    names = {f["name"] for f in manifest["files"]}
    assert {"config.cfg", "metrics.jsonl", "checkpoint.json", "episodes.jsonl"} <= names
    for f in manifest["files"]:
        data = (a / f["name"]).read_bytes()
        assert f["bytes"] == len(data) > 0
        assert f["sha256"] == hashlib.sha256(data).hexdigest()
    assert manifest["seed"] == 5
    cfg = loads((a / "config.cfg").read_text())
    assert loads(cfg.dumps()) == cfg
    assert manifest["config"] == cfg.dumps()
    assert cfg == load_run_config("line-world", None, 5, None, SMALL[1::2])


def test_replay_in_eval_and_plot(tmp_path, capsys):
    assert run(capsys, "train", "--env", "line-world", *SMALL, "--out", tmp_path / "t")[0] == 0
    code, out, _ = run(capsys, "train", "--env", "line-world", *SMALL, "--replay-in",
                       tmp_path / "t" / "episodes.jsonl", "--out", tmp_path / "r")
    assert code == 0
    assert (tmp_path / "t" / "episodes.jsonl").read_text() == (tmp_path / "r" / "episodes.jsonl").read_text()
    ckpt = tmp_path / "t" / "checkpoint.json"
    code, out, _ = run(capsys, "eval", "--checkpoint", ckpt, "--out", tmp_path / "e")
    assert code == 0 and "success rate:" in out
    assert json.loads((tmp_path / "e" / "eval.json").read_text())["trials"] == 2
    code, _, _ = run(capsys, "plot", "--checkpoint", ckpt, "--horizons", "1,3", "--out", tmp_path / "p")
    assert code == 0
    assert {"heatmap_h1.svg", "heatmap_h3.csv", "trajectories.svg", "loss_curve.svg"} <= {
        p.name for p in (tmp_path / "p").iterdir()}


def test_plot_oracle(tmp_path, capsys):
    code, _, _ = run(capsys, "plot", "--env", "frozen-lake", "--horizons", "6,24", "--out", tmp_path)
    assert code == 0 and (tmp_path / "trajectory_h24.csv").exists()


def test_compare(tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--env", "line-world", "--variants", "c,a", *SMALL, "--out", tmp_path)
    assert code == 0 and "ordering:" in out
    assert len((tmp_path / "compare.csv").read_text().splitlines()) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cae", "oracle", "--env", "line-world", "--h-max", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "violations: 0" in proc.stdout
