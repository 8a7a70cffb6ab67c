import csv
import json

import pytest

from malbench.cli import main


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 2


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--n-samples", "10", "--out", "x", "--bogus"])
    assert exc.value.code == 2


def test_operational_error_exits_1(tmp_path, capsys):
    rc = main(["index", "--fragments", str(tmp_path / "missing"),
               "--out", str(tmp_path / "i.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_full_pipeline_via_cli(tmp_path, capsys):
    corpus = str(tmp_path / "c.jsonl")
    frags = str(tmp_path / "frags")
    index = str(tmp_path / "index.csv")
    assert main(["synth", "--n-samples", "1500", "--separability", "2.0",
                 "--seed", "3", "--out", corpus]) == 0
    assert main(["vectorize", "--input", corpus, "--out-dir", frags,
                 "--fragment-size", "600"]) == 0
    assert main(["index", "--fragments", frags, "--out", index]) == 0

    dataset_dir = str(tmp_path / "datasets")
    assert main(["sample", "--fragments", frags, "--index", index,
                 "--role", "train", "--n-malware", "40", "--seed", "1337",
                 "--out-dir", dataset_dir]) == 0
    train_csv = f"{dataset_dir}/train_40_malware_x1_benign_combined_s1337.csv"
    model = str(tmp_path / "dt.model")
    assert main(["train", "--algorithm", "DT", "--dataset", train_csv,
                 "--seed", "1337", "--out", model]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--model", model, "--dataset", train_csv,
                 "--measure", "accuracy"]) == 0
    result = json.loads(capsys.readouterr().out.strip())
    assert result["performance"] == 1.0  # tree memorizes its training set

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "train_sizes": [40, 80], "q3_ratios": [1, 2], "seeds": [1337],
        "algorithms": ["DT"], "feature_sets": ["combined"],
        "test_n_malware": 50, "q2_ratio": 2}))
    results = str(tmp_path / "results.csv")
    assert main(["run", "--config", str(cfg), "--fragments", frags,
                 "--index", index, "--out", results, "--workers", "2"]) == 0
    with open(results, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6

    capsys.readouterr()
    assert main(["analyze", "--results", results, "--question", "1"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "algorithm,correlation"

    svg = str(tmp_path / "plot.svg")
    assert main(["plot", "--results", results, "--kind", "line",
                 "--x", "train_set_size", "--y", "performance",
                 "--group-by", "algorithm", "--question", "1",
                 "--out", svg]) == 0
    assert open(svg).read().startswith("<?xml")
