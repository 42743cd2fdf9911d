import json
import re

import numpy as np
import pytest

from fetril.cli import main
from fetril.metrics import read_states_csv


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main(["synth", "--classes", "8", "--dim", "12", "--samples", "30",
                 "--sigma", "4.0", "--seed", "5", "--out", str(out)])
    assert code == 0
    return out


def run_dir_fixture(tmp_path, synth_dir, *extra):
    out = tmp_path / "run"
    code = main(["run", "--manifest", str(synth_dir / "train.json"),
                 "--test-manifest", str(synth_dir / "test.json"),
                 "--initial", "4", "--states", "2", "--repeats", "2",
                 "--seed", "3", "--out", str(out), *extra])
    assert code == 0
    return out


def test_synth_writes_manifests(synth_dir):
    assert (synth_dir / "train.json").exists()
    assert (synth_dir / "test.json").exists()
    doc = json.loads((synth_dir / "train.json").read_text())
    assert len(doc["classes"]) == 8
    assert doc["dim"] == 12


def test_run_missing_manifest_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["run", "--manifest", str(missing),
                 "--test-manifest", str(missing),
                 "--out", str(tmp_path / "out")])
    captured = capsys.readouterr()
    assert code == 1
    assert str(missing) in captured.err


def test_unknown_flag_is_usage_error(synth_dir):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus-flag", "1"])
    assert exc.value.code == 2


def test_run_end_to_end_outputs(tmp_path, synth_dir):
    out = run_dir_fixture(tmp_path, synth_dir)
    config = json.loads((out / "config.json").read_text())
    assert config["method"] == "fetril"
    assert config["states"] == 2
    rows = read_states_csv(out / "states.csv")
    assert len(rows) == 3  # initial + T
    assert rows[0]["past_top1"] is None
    summary = json.loads((out / "summary.json").read_text())
    assert summary["repeats"] == 2
    assert 0.0 <= summary["average_incremental_accuracy"] <= 1.0
    assert (out / "repeat_00" / "states.csv").exists()
    assert (out / "repeat_01" / "schedule.json").exists()
    # mean csv equals the mean of the per-repeat csvs
    per_repeat = [read_states_csv(out / f"repeat_{i:02d}" / "states.csv")
                  for i in range(2)]
    for idx, row in enumerate(rows):
        mean_top1 = np.mean([r[idx]["top1"] for r in per_repeat])
        assert row["top1"] == pytest.approx(mean_top1)


def test_run_is_reproducible_from_echoed_config(tmp_path, synth_dir):
    first = run_dir_fixture(tmp_path, synth_dir)
    config_path = first / "config.json"
    doc = json.loads(config_path.read_text())
    doc["out"] = str(tmp_path / "rerun")
    rerun_cfg = tmp_path / "rerun.json"
    rerun_cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(rerun_cfg)]) == 0
    a = read_states_csv(first / "states.csv")
    b = read_states_csv(tmp_path / "rerun" / "states.csv")
    assert a == b


def test_run_flag_overrides_config_file(tmp_path, synth_dir):
    cfg = {"manifest": str(synth_dir / "train.json"),
           "test_manifest": str(synth_dir / "test.json"),
           "initial": 4, "states": 2, "repeats": 1, "method": "fetril"}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "ncm-run"
    code = main(["run", "--config", str(cfg_path), "--method", "ncm",
                 "--out", str(out)])
    assert code == 0
    assert json.loads((out / "config.json").read_text())["method"] == "ncm"


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"manifest": "x", "bogus": 1}))
    assert main(["run", "--config", str(cfg_path)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_summarize_means_match_hand_average(tmp_path, synth_dir, capsys):
    out = run_dir_fixture(tmp_path, synth_dir)
    capsys.readouterr()
    code = main(["summarize", str(out / "repeat_00"), str(out / "repeat_01")])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    values = [float(re.split(r"\s+", line)[2]) for line in lines[1:3]]
    hand = []
    for i in range(2):
        rows = read_states_csv(out / f"repeat_{i:02d}" / "states.csv")
        hand.append(sum(r["top1"] for r in rows) / len(rows))
    assert values == pytest.approx(hand)
    mean_line = float(lines[3].split()[1])
    assert mean_line == pytest.approx(np.mean(hand), abs=1e-4)


def test_summarize_run_dir_uses_summary(tmp_path, synth_dir, capsys):
    out = run_dir_fixture(tmp_path, synth_dir)
    capsys.readouterr()
    assert main(["summarize", str(out)]) == 0
    line = capsys.readouterr().out.strip().splitlines()[1]
    assert line.startswith("fetril")


def test_extract_check_accepts_valid(synth_dir, capsys):
    assert main(["extract-check", "--manifest", str(synth_dir / "train.json")]) == 0
    assert "ok:" in capsys.readouterr().out


def test_extract_check_rejects_corrupt(tmp_path, synth_dir, capsys):
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    for p in synth_dir.iterdir():
        (corrupt / p.name).write_bytes(p.read_bytes())
    victim = corrupt / "class_0003_train.bin"
    raw = bytearray(victim.read_bytes())
    raw[0:5] = b"JUNK!"
    victim.write_bytes(bytes(raw))
    assert main(["extract-check", "--manifest", str(corrupt / "train.json")]) == 1
    assert "magic" in capsys.readouterr().err


def test_strategy_and_ratio_flags(tmp_path, synth_dir):
    out = tmp_path / "flags"
    code = main(["run", "--manifest", str(synth_dir / "train.json"),
                 "--test-manifest", str(synth_dir / "test.json"),
                 "--initial", "4", "--states", "2", "--repeats", "1",
                 "--strategy", "herding", "--neg-ratio", "5",
                 "--classifier", "hinge", "--samples-per-class", "20",
                 "--out", str(out)])
    assert code == 0
    config = json.loads((out / "config.json").read_text())
    assert config["strategy"] == "herding"
    assert config["neg_ratio"] == "5"
    assert config["samples_per_class"] == 20
