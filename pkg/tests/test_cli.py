import json
import subprocess
import sys

import pytest

from segalign.cli import build_parser, main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("command", ["synth", "train", "decode", "eval"])
def test_help_documents_every_flag(command, capsys):
    with pytest.raises(SystemExit) as exc:
        run(command, "--help")
    assert exc.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text


def test_invalid_prior_lists_choices(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("train", "--features", tmp_path, "--transcripts", tmp_path / "t", "--out", tmp_path,
            "--length-prior", "gaussian-ish")
    assert exc.value.code != 0
    err = capsys.readouterr().err
    assert "half-gaussian" in err and "box" in err


def test_invalid_prior_in_config_lists_choices(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"length_prior": "wide"}))
    code = run("train", "--config", tmp_path / "c.json", "--features", tmp_path, "--transcripts",
               tmp_path / "t", "--out", tmp_path / "o")
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert "half-poisson" in err["message"]


def test_missing_feature_dir_is_structured_error(tmp_path, capsys):
    code = run("decode", "--model", tmp_path / "nope.json", "--features", tmp_path, "--out", tmp_path / "p.json")
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "CliError"


def test_end_to_end(tmp_path, monkeypatch):
    spec = {"num_videos": 9, "mean_duration": 6.0, "seed": 2}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    cfg = {"max_iterations": 3, "seed": 1}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    data, out = tmp_path / "data", tmp_path / "model"
    assert run("synth", "--spec", tmp_path / "spec.json", "--out", data, "--label-fraction", 0.05) == 0
    assert (data / "features" / "manifest.tsv").exists() and (data / "sparse_labels.txt").exists()

    monkeypatch.setenv("SEGALIGN_SEED", "4")
    assert run("train", "--config", tmp_path / "cfg.json", "--features", data / "features",
               "--transcripts", data / "transcripts.txt", "--report-ground-truth", data / "groundtruth.txt",
               "--jobs", 1, "--out", out) == 0
    record = json.loads((out / "run.json").read_text())
    assert record["config"]["seed"] == 4 and record["config"]["max_iterations"] == 3
    reports = json.loads((out / "reports.json").read_text())
    assert reports["final_mof"] > reports["initial_mof"]
    assert (out / "checkpoint_01.json").exists() and (out / "model.json").exists()
    assert "wall_time" not in json.loads((out / "report_01.json").read_text())

    for mode in ("segment", "align"):
        pred = tmp_path / f"{mode}.json"
        assert run("decode", "--mode", mode, "--model", out / "model.json", "--features", data / "features",
                   "--transcripts", data / "transcripts.txt", "--jobs", 1, "--out", pred) == 0
        assert (tmp_path / f"{mode}.run.json").exists()
        scores = tmp_path / f"{mode}_eval.json"
        assert run("eval", "--pred", pred, "--gt", data / "groundtruth.txt", "--out", scores) == 0
        result = json.loads(scores.read_text())
        assert 0.5 < result["mof"] <= 1.0 and result["iou"] <= result["iod"]
    assert json.loads((tmp_path / "align_eval.json").read_text())["jaccard_matching"] == "transcript"


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "segalign.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "segalign" in proc.stdout
