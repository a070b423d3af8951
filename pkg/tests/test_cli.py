import subprocess
import sys

import pytest

from terafet.cli import build_parser, main


def test_help_lists_subcommands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for cmd in ("iv", "sweep", "profile", "compare", "check"):
        assert cmd in out


def test_missing_source_is_usage_error(capsys):
    assert main(["sweep"]) == 2


def test_unknown_preset_is_usage_error(capsys):
    assert main(["sweep", "--preset", "fig9"]) == 2


def test_config_and_preset_are_exclusive(tmp_path, capsys):
    assert main(["sweep", "--preset", "fig5a", "--config", str(tmp_path / "x.toml")]) == 2


def test_unknown_method_rejected(capsys):
    assert main(["sweep", "--preset", "fig5a", "--method", "tcad"]) == 2


def test_missing_config_file(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_preset_choices_match_harness():
    from terafet.harness import PRESETS

    sub = build_parser()._subparsers._group_actions[0].choices["sweep"]
    preset = next(a for a in sub._actions if a.dest == "preset")
    assert tuple(preset.choices) == PRESETS


def test_analytic_sweep_via_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "terafet", "sweep", "--preset", "fig5b",
                          "--method", "analytic", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "fig5b_analytic.csv").exists()


def test_config_file_run(tmp_path):
    cfg = tmp_path / "mini.toml"
    cfg.write_text(
        '[scenario]\nname = "mini"\nmethods = ["analytic", "hydro"]\n'
        "[device]\nchannel_length_m = 45e-9\n"
        "[excitation]\nfrequencies_hz = [1.5e12, 2.0e12]\n",
        encoding="utf-8")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "mini_report.json").exists()


def test_iv_command(tmp_path):
    cfg = tmp_path / "iv.toml"
    cfg.write_text('[scenario]\nname = "iv"\n[device]\nsegments = 4\n'
                   "[iv]\ngate_voltages_v = [0.4, 0.5]\ndrain_voltages_v = [0.0, 0.1]\n",
                   encoding="utf-8")
    assert main(["iv", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "iv_iv.csv").read_text().splitlines()
    assert lines[0] == "v_gs,v_ds,i_d" and len(lines) == 5


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = tmp_path / "nc.toml"
    cfg.write_text('[scenario]\nname = "nc"\n[device]\nsegments = 4\n'
                   "[solver]\nnewton_max_iter = 1\n"
                   "[iv]\ngate_voltages_v = [0.5]\ndrain_voltages_v = [0.0, 0.3]\n",
                   encoding="utf-8")
    assert main(["iv", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "solver error" in capsys.readouterr().err


def test_failed_gate_exit_code(monkeypatch, tmp_path):
    from terafet import acceptance
    from terafet.acceptance import CriterionResult

    monkeypatch.setattr(acceptance, "run_all",
                        lambda out_dir=None: [CriterionResult(1, "x", False, "forced")])
    assert main(["check", "--out", str(tmp_path)]) == 4
    monkeypatch.setattr(acceptance, "run_all",
                        lambda out_dir=None: [CriterionResult(1, "x", True, "forced")])
    assert main(["check", "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("cmd", ["sweep", "profile", "compare", "iv"])
def test_subcommand_help(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    assert "--preset" in capsys.readouterr().out
