import json
import logging
import os

import pytest

from app.main import create_cli, main
from app.modules.synthdata.repository import load_dataset
from app.shared.run_manifest import load_run_manifest

MINI_CONFIG = """\
# miniature network for command tests
input_size=32
embed_dim=32
num_layers=2
num_heads=4
stem_channels=8,16,32
batch_size=4
val_fraction=0.0
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "mini.env"
    path.write_text(MINI_CONFIG, encoding="utf-8")
    return str(path)


def test_parser_requires_a_subcommand():
    with pytest.raises(SystemExit):
        create_cli().parse_args([])


def test_parser_subcommands():
    parser = create_cli()
    args = parser.parse_args(["train", "--data", "d", "--w-hard", "4", "--no-deep-supervision", "--seed", "7"])
    assert args.command == "train"
    assert args.w_hard == 4.0 and args.deep_supervision is False and args.seed == 7
    args = parser.parse_args(["ablate", "--data", "d", "--ratios", "1,12"])
    assert args.ratios == "1,12" and args.runs_per_ratio == 1
    assert parser.parse_args(["compare", "--data", "d"]).runs == 3
    for command in ("gen-data", "hard-mask", "evaluate", "compare", "report", "info"):
        assert command in parser.format_help()


def test_info_prints_parameter_counts(capsys):
    assert main(["info"]) == 0
    presets = json.loads(capsys.readouterr().out)
    assert set(presets) == {"paper", "tiny"}
    assert presets["tiny"]["num_tokens"] == 196
    assert presets["paper"]["parameter_count"] > presets["tiny"]["parameter_count"]


def test_pipeline_end_to_end(tmp_path, config_file):
    data, run = str(tmp_path / "data"), str(tmp_path / "run")
    assert main(["gen-data", "--cases", "4", "--slices", "2", "--image-size", "64", "--test-cases", "1",
                 "--seed", "5", "--out", data]) == 0
    assert main(["hard-mask", "--dataset", data, "--out", run]) == 0
    assert all(r.hard_mask is not None for r in load_dataset(data))

    assert main(["train", "--data", data, "--config", config_file, "--epochs", "1", "--out", run]) == 0
    for name in ("checkpoint.pt", "train_log.csv", "epoch_log.csv", "loss_curve.png"):
        assert os.path.isfile(os.path.join(run, name))

    assert main(["evaluate", "--checkpoint", os.path.join(run, "checkpoint.pt"), "--data", data,
                 "--overlays", "1", "--out", run]) == 0
    assert main(["report", "--out", run]) == 0

    with open(os.path.join(run, "report.md"), encoding="utf-8") as handle:
        text = handle.read()
    assert "## Evaluation" in text and "| mean |" in text
    manifest = load_run_manifest(run)
    assert set(manifest) == {"hard-mask", "train", "evaluate", "report"}
    assert "metrics_patients.csv" in manifest["evaluate"]


def test_command_errors_become_exit_codes(tmp_path):
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "run")]) == 1
    assert main(["ablate", "--data", str(tmp_path), "--ratios", "1,x"]) == 1


def test_report_on_empty_run_directory(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 0
    assert "_no data_" in (tmp_path / "report.md").read_text(encoding="utf-8")


def test_evaluate_checks_config_against_checkpoint(tmp_path, config_file, caplog):
    data, run = str(tmp_path / "data"), str(tmp_path / "run")
    assert main(["gen-data", "--cases", "3", "--slices", "1", "--image-size", "64", "--test-cases", "1",
                 "--seed", "2", "--out", data]) == 0
    assert main(["train", "--data", data, "--config", config_file, "--epochs", "1", "--out", run]) == 0
    checkpoint = os.path.join(run, "checkpoint.pt")

    wider = tmp_path / "wider.env"
    wider.write_text(MINI_CONFIG.replace("embed_dim=32", "embed_dim=64"), encoding="utf-8")
    with caplog.at_level(logging.ERROR):
        code = main(["evaluate", "--checkpoint", checkpoint, "--data", data, "--config", str(wider),
                     "--overlays", "0", "--out", run])
    assert code == 1
    assert "differs from expected" in caplog.text

    assert main(["evaluate", "--checkpoint", checkpoint, "--data", data, "--config", config_file,
                 "--overlays", "0", "--out", run]) == 0


def test_train_help_names_the_checkpoint_path(capsys):
    with pytest.raises(SystemExit):
        create_cli().parse_args(["train", "--help"])
    assert "<out>/checkpoint.pt" in capsys.readouterr().out
