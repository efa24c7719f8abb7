import csv
import json

import pytest

from sofafl.cli import main
from sofafl.config import RunConfig

TINY = RunConfig(num_clients=5, rounds=2, local_epochs=1, warmup_epochs=1, hidden_dims=(8,))


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(TINY.dumps())
    return path


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert main(["run", "--synthetic", "--nope"]) == 2


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_bad_config_exit_names_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"lr": -0.5}')
    assert main(["run", "--synthetic", "--config", str(bad)]) == 3
    assert "lr" in capsys.readouterr().err


def test_missing_data_source(capsys, config_file):
    assert main(["run", "--config", str(config_file)]) == 4
    assert "--synthetic" in capsys.readouterr().err


def test_missing_mnist_dir(tmp_path, config_file):
    assert main(["run", "--config", str(config_file), "--mnist-dir", str(tmp_path / "nowhere")]) == 4


def test_run_twice_gives_identical_report(tmp_path, config_file):
    for name in ("a", "b"):
        assert main(["run", "--synthetic", "--config", str(config_file), "--out", str(tmp_path / name)]) == 0
    a, b = (tmp_path / "a" / "report.json").read_bytes(), (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert doc["schema_version"] == 1 and doc["config"]["num_clients"] == 5
    for name in ("config.json", "rounds.csv", "nodes.csv", "sharing.csv", "shape_log.jsonl", "tree_round_2.json"):
        assert (tmp_path / "a" / name).exists()


def test_seed_flag_overrides_config(tmp_path, config_file):
    assert main(["run", "--synthetic", "--config", str(config_file), "--seed", "9", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 9


def test_ablate_emits_four_labelled_rows(tmp_path, config_file):
    assert main(["ablate", "--synthetic", "--config", str(config_file), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "ablation.csv") as fh:
        labels = [row["label"] for row in csv.DictReader(fh)]
    assert labels == ["without partial data sharing", "partial data sharing ratio 0.1",
                      "partial data sharing ratio 0.1 fixed", "partial data sharing ratio 0.2 fixed"]


def test_baseline_compare_and_plotdata(tmp_path, config_file):
    assert main(["baseline", "--k", "2", "--synthetic", "--config", str(config_file), "--out", str(tmp_path)]) == 0
    assert main(["run", "--synthetic", "--config", str(config_file), "--out", str(tmp_path / "sofa")]) == 0
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(tmp_path / "sofa" / "report.json"), str(tmp_path / "hypcluster_k2"),
                 "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and set(rows[0]) == {"client", "sofa", "hypcluster_k2"}
    assert main(["plotdata", str(tmp_path / "sofa")]) == 0
    with open(tmp_path / "sofa" / "loss_curves.csv") as fh:
        curve = list(csv.DictReader(fh))
    assert len(curve) == 5 * 3


def test_baseline_k_must_be_positive(config_file):
    assert main(["baseline", "--k", "0", "--synthetic", "--config", str(config_file)]) == 3


def test_compare_missing_report_is_data_error(tmp_path):
    assert main(["compare", str(tmp_path / "x.json"), str(tmp_path / "y.json"), "--out",
                 str(tmp_path / "c.csv")]) == 4
