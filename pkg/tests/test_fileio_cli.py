import json

import numpy as np
import pytest

from spoofcm import fileio
from spoofcm.cli import run_subcommand
from spoofcm.audio_io import read_feature_cache
from spoofcm.fileio import (DuplicateTrial, MalformedLine, NonNumericScore, ToolkitConfig,
                            TrialRecord, load_params, parse_protocol_lines, read_scores,
                            save_params, write_protocol, write_scores)
from spoofcm.metrics import ScoreRecord

GOOD = ["LA_0079 LA_T_1138215 - - bonafide", "LA_0079 LA_T_1271820 - A01 spoof", ""]


def test_protocol_accepts_documented_shape():
    recs = parse_protocol_lines(GOOD)
    assert recs == [TrialRecord("LA_0079", "LA_T_1138215", "-", "bonafide"),
                    TrialRecord("LA_0079", "LA_T_1271820", "A01", "spoof")]


def test_protocol_tolerates_tabs_and_repeated_spaces():
    assert len(parse_protocol_lines(["S1\tT1  -  A07\tspoof"])) == 1


@pytest.mark.parametrize("line", [
    "LA_0079 LA_T_1 - bonafide",            # four columns
    "LA_0079 LA_T_1 - - bonafide extra",    # six columns
    "LA_0079 LA_T_1 - - genuine",           # unknown key
    "LA_0079 LA_T_1 - A01 bonafide",        # bonafide with an attack
    "LA_0079 LA_T_1 - - spoof",             # spoof without an attack
])
def test_protocol_rejects_malformed(line):
    with pytest.raises(MalformedLine) as info:
        parse_protocol_lines(GOOD[:2] + [line])
    assert info.value.line_no == 3


def test_protocol_rejects_duplicates():
    with pytest.raises(DuplicateTrial):
        parse_protocol_lines([GOOD[0], GOOD[0]])


def test_protocol_round_trip(tmp_path):
    recs = parse_protocol_lines(GOOD)
    write_protocol(tmp_path / "p.txt", recs)
    assert fileio.parse_protocol(tmp_path / "p.txt") == recs


def test_score_round_trip(tmp_path):
    recs = [ScoreRecord("T1", "-", "bonafide", 0.123456789),
            ScoreRecord("T2", "A09", "spoof", -3.14159e-7),
            ScoreRecord("T3", "A10", "spoof", 12345678.0)]
    write_scores(tmp_path / "s.txt", recs)
    text = (tmp_path / "s.txt").read_text()
    assert text.splitlines()[0] == "T1 - bonafide 0.123457"
    back = read_scores(tmp_path / "s.txt")
    assert [r[:3] for r in back] == [r[:3] for r in recs]
    for a, b in zip(back, recs):
        assert a.score == pytest.approx(b.score, rel=5e-6)
    write_scores(tmp_path / "t.txt", back)
    assert (tmp_path / "t.txt").read_text() == text


def test_score_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("T1 - bonafide abc\n")
    with pytest.raises(NonNumericScore):
        read_scores(path)
    path.write_text("T1 bonafide 0.5\n")
    with pytest.raises(MalformedLine):
        read_scores(path)


def test_params_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    params = {"a.w": rng.standard_normal((3, 4)), "a.b": rng.standard_normal(4),
              "s": np.array(1.5), "t": rng.standard_normal((2, 3, 2))}
    save_params(params, tmp_path)
    back = load_params(tmp_path)
    assert list(back) == list(params)
    for k in params:
        assert back[k].shape == params[k].shape
        np.testing.assert_array_equal(back[k], params[k].astype(np.float32))


def test_config_round_trip_and_presets(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"loss": {"preset": "am", "alpha": 10.0},
                                "backend": {"strategy": "pool_attention"}}))
    cfg = fileio.load_config(path)
    assert cfg.loss.kind == "am_softmax" and cfg.loss.alpha == 10.0 and cfg.loss.m3 == (0.9, 0.9)
    assert ToolkitConfig.from_dict(cfg.to_dict()) == cfg
    assert ToolkitConfig.from_dict({"loss": "sigmoid"}).loss.kind == "ce_sigmoid"
    with pytest.raises(ValueError):
        ToolkitConfig.from_dict({"optimizer": {}})


# CLI


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = {"backend": {"conv_widths": [4, 4], "embed_dim": 4},
           "train": {"epochs": 2, "batch_size": 4}, "loss": "p2sgrad"}
    (root / "cfg.json").write_text(json.dumps(cfg))
    assert run_subcommand(["synth", "--out", str(root / "data"), "--seed", "3",
                           "--n-per-class", "6", "--n-test", "3"]) == 0
    return root


def cli(workspace, *args):
    return run_subcommand([args[0], "--config", str(workspace / "cfg.json"), *args[1:]])


def test_cli_extract(workspace):
    data = workspace / "data"
    assert cli(workspace, "extract", "--protocol", str(data / "eval.txt"),
               "--wav-dir", str(data / "wav"), "--out", str(workspace / "feats")) == 0
    files = sorted((workspace / "feats").glob("*.fmat"))
    assert len(files) == 6
    assert read_feature_cache(files[0]).shape[1] == 60


@pytest.mark.filterwarnings("ignore:EER")
def test_cli_train_score_eval_fuse(workspace, capsys):
    data = workspace / "data"
    out = workspace / "model"
    assert cli(workspace, "train", "--protocol", str(data / "train.txt"), "--wav-dir",
               str(data / "wav"), "--out", str(out), "--runs", "2",
               "--eval-protocol", str(data / "eval.txt")) == 0
    for k in (1, 2):
        run = out / f"run{k}"
        assert {p.name for p in run.iterdir()} == {"params.bin", "manifest.json",
                                                   "train_log.csv", "report.json", "scores.txt"}
        report = json.loads((run / "report.json").read_text())
        assert report["seed"] == 10 ** (k - 1)
        assert report["parameter_counts"]["total"] > 0

    scores = workspace / "scored.txt"
    assert cli(workspace, "score", "--protocol", str(data / "eval.txt"), "--wav-dir",
               str(data / "wav"), "--params", str(out / "run1"), "--out", str(scores)) == 0
    assert len(read_scores(scores)) == 6

    capsys.readouterr()
    assert cli(workspace, "eval", str(scores), "--out", str(workspace / "eval.json")) == 0
    assert "EER" in capsys.readouterr().out
    assert "per_attack" in json.loads((workspace / "eval.json").read_text())

    fused = workspace / "fused.txt"
    assert cli(workspace, "fuse", str(out / "run1" / "scores.txt"),
               str(out / "run2" / "scores.txt"), "--out", str(fused)) == 0
    assert len(read_scores(fused)) == 6

    assert cli(workspace, "compare", str(out / "run1" / "scores.txt"),
               str(out / "run2" / "scores.txt"), "--out", str(workspace / "cmp")) == 0
    doc = json.loads((workspace / "cmp.json").read_text())
    assert doc["labels"] == ["model/I", "model/II"]
    assert (workspace / "cmp.pgm").read_bytes().startswith(b"P5\n16 16\n255\n")


def test_cli_usage_errors(workspace, capsys):
    assert run_subcommand(["train"]) == 2
    assert run_subcommand(["nonsense"]) == 2
    assert run_subcommand(["compare", str(workspace / "x.txt")]) == 2
    capsys.readouterr()


def test_cli_operation_failure(workspace, capsys):
    assert run_subcommand(["eval", str(workspace / "missing.txt")]) == 1
    assert "missing.txt" in capsys.readouterr().err


def test_cli_selftest(capsys):
    assert run_subcommand(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(line.startswith("PASS") for line in lines)


def test_empty_score_file_chain(tmp_path):
    from spoofcm.metrics import SingleClass, compute_eer
    path = tmp_path / "empty.txt"
    path.write_text("")
    assert read_scores(path) == []
    with pytest.raises(SingleClass):
        compute_eer(read_scores(path))


def test_cli_eval_separable_and_fuse_copies(tmp_path):
    recs = [ScoreRecord("T1", "-", "bonafide", 0.9), ScoreRecord("T2", "A01", "spoof", 0.1)]
    write_scores(tmp_path / "s.txt", recs)
    assert run_subcommand(["eval", str(tmp_path / "s.txt"), "--out",
                           str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["eer"] == 0.0
    assert run_subcommand(["fuse", str(tmp_path / "s.txt"), str(tmp_path / "s.txt"),
                           "--out", str(tmp_path / "f.txt")]) == 0
    assert (tmp_path / "f.txt").read_bytes() == (tmp_path / "s.txt").read_bytes()


def test_cli_outputs_are_byte_identical_on_rerun(tmp_path):
    recs = [ScoreRecord(f"T{i}", "-" if i % 2 else "A02", "bonafide" if i % 2 else "spoof",
                        i / 7) for i in range(12)]
    write_scores(tmp_path / "a.txt", recs)
    write_scores(tmp_path / "b.txt", [r._replace(score=1 - r.score) for r in recs])
    args = ["compare", str(tmp_path / "a.txt"), str(tmp_path / "b.txt")]
    assert run_subcommand(args + ["--out", str(tmp_path / "x")]) == 0
    assert run_subcommand(args + ["--out", str(tmp_path / "y")]) == 0
    assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()
    assert (tmp_path / "x.pgm").read_bytes() == (tmp_path / "y.pgm").read_bytes()
