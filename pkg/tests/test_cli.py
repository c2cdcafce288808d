"""Tests for the command-line entry point and its exit codes."""

import pytest

from src.crosslabel_vad import cli
from src.crosslabel_vad.cli import build_parser, main

SYNTH_CONFIG = """\
num_videos = 6
dim = 4
num_categories = 3
min_length = 24
max_length = 32
min_segment = 4
max_segment = 6
"""

TRAIN_CONFIG = """\
# tiny model for command tests
levels = 2
n = 16
hidden_dim = 4
epochs = 1
batch_size = 3
"""


class TestParser:
    """Tests for argument parsing and usage errors."""

    def test_unknown_subcommand(self, capsys):
        """Test an unknown subcommand exits 1 with usage on stderr."""
        assert main(["bogus"]) == 1
        assert "usage:" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        """Test --help prints usage and succeeds."""
        assert main(["--help"]) == 0
        assert "synth" in capsys.readouterr().out

    def test_missing_required_flag(self, capsys):
        """Test a subcommand without its required flags is a usage error."""
        assert main(["synth"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_flags_map_to_config_keys(self):
        """Test dotted destinations collect the refinement overrides."""
        args = build_parser().parse_args(
            ["run", "--manifest", "m.tsv", "--out", "o", "--theta", "0.4", "--no-car"]
        )
        assert getattr(args, "refine.theta") == 0.4
        assert args.car is False

    def test_invalid_value_names_key(self, tmp_path, capsys):
        """Test a config value out of range exits 1 naming the key."""
        code = main(["synth", "--out", str(tmp_path / "d"), "--num-categories", "1"])
        assert code == 1
        assert "num_categories" in capsys.readouterr().err


class TestCommands:
    """Tests for the subcommands on a tiny synthetic dataset."""

    @pytest.fixture
    def configs(self, tmp_path):
        """Synthetic and training config files."""
        synth = tmp_path / "synth.cfg"
        synth.write_text(SYNTH_CONFIG)
        train = tmp_path / "train.cfg"
        train.write_text(TRAIN_CONFIG)
        return synth, train

    @pytest.fixture
    def manifest(self, configs, tmp_path):
        """A synthetic dataset written through the synth command."""
        out = tmp_path / "data"
        assert main(["synth", "--config", str(configs[0]), "--out", str(out)]) == 0
        return out / "manifest.tsv"

    def test_synth_is_reproducible(self, configs, tmp_path, capsys):
        """Test two synth runs with one seed write identical files."""
        for name in ("a", "b"):
            args = ["synth", "--config", str(configs[0]), "--out", str(tmp_path / name)]
            assert main(args) == 0
        out = capsys.readouterr().out
        assert "manifest.tsv" in out

        a, b = tmp_path / "a", tmp_path / "b"
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_stage_two_without_pseudo_dir(self, configs, manifest, tmp_path, capsys):
        """Test stage 2 without --pseudo-dir exits 1 and names the flag."""
        code = main(
            [
                "train",
                "--manifest",
                str(manifest),
                "--config",
                str(configs[1]),
                "--stage",
                "2",
                "--out",
                str(tmp_path / "run"),
            ]
        )

        assert code == 1
        assert "--pseudo-dir" in capsys.readouterr().err

    def test_train_then_eval(self, configs, manifest, tmp_path, capsys):
        """Test eval on a stage-1 checkpoint prints the stored report."""
        run_dir = tmp_path / "run"
        common = ["--manifest", str(manifest), "--config", str(configs[1])]
        assert main(["train", *common, "--out", str(run_dir)]) == 0
        capsys.readouterr()

        code = main(["eval", *common, "--checkpoint", str(run_dir / "stage1.ckpt")])

        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("metric\tvalue\n")
        assert out == (run_dir / "report_stage1.tsv").read_text()

    def test_missing_manifest_is_data_error(self, configs, tmp_path, capsys):
        """Test a manifest that does not exist exits 2."""
        code = main(
            [
                "run",
                "--manifest",
                str(tmp_path / "absent.tsv"),
                "--config",
                str(configs[1]),
                "--out",
                str(tmp_path / "run"),
            ]
        )
        assert code == 2
        assert "absent.tsv" in capsys.readouterr().err

    def test_run_dispatch(self, configs, manifest, tmp_path, mocker):
        """Test the run command passes flag overrides to the pipeline."""
        fake = mocker.patch.object(cli, "run_pipeline")
        fake.return_value.report.to_tsv.return_value = "metric\tvalue\n"

        code = main(
            [
                "run",
                "--manifest",
                str(manifest),
                "--config",
                str(configs[1]),
                "--epochs",
                "3",
                "--direction",
                "B→C",
                "--out",
                str(tmp_path / "run"),
            ]
        )

        assert code == 0
        _, cfg, run_dir, eval_dataset = fake.call_args.args
        assert cfg.epochs == 3
        assert cfg.levels == 2
        assert cfg.direction.value == "b2c"
        assert run_dir == tmp_path / "run"
        assert len(eval_dataset) == 6

    def test_unexpected_error_is_wrapped(self, mocker, capsys):
        """Test a stray exception inside a command exits with the data code."""
        mocker.patch.dict(
            cli.COMMANDS, {"synth": mocker.Mock(side_effect=RuntimeError("boom"))}
        )

        code = main(["synth", "--out", "unused"])

        assert code == 2
        assert "boom" in capsys.readouterr().err
