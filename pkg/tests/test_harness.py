import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from terafet import harness
from terafet.harness import (
    ConfigError,
    IVTable,
    compare_methods,
    csv_text,
    emit_csv,
    frequency_sweep,
    load_preset,
    read_csv,
    rms_log_error,
    run_scenario,
    scenario_from_dict,
)
from terafet.results import ChannelProfile, ResponseCurve

GOLDEN = Path(__file__).parent / "golden"


def small_tree(**over):
    tree = {
        "scenario": {"name": "small", "methods": ["analytic", "hydro", "circuit_varying",
                                                  "circuit_uniform"]},
        "device": {"channel_length_m": 90e-9, "mobility_m2_per_vs": 0.4, "segments": 6},
        "bias": {"gate_voltage_swing_v": 0.15},
        "excitation": {"amplitude_ratio": 0.01, "frequencies_hz": [0.6e12, 1.0e12]},
    }
    for k, v in over.items():
        tree.setdefault(k, {}).update(v)
    return tree


def write_toml(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- presets and config --------------------------------------------------------

@pytest.mark.parametrize("name", harness.PRESETS)
def test_presets_load(name):
    s = load_preset(name)
    assert s.name == name
    assert s.bias.V_gt == pytest.approx(0.15)
    assert s.V_a == pytest.approx(0.0015)
    assert len(s.frequencies) >= 25
    assert not s.parasitics
    assert s.circuit_params.R_s == 0 and s.circuit_params.C_gd_ext == 0


def test_preset_geometries():
    table = {"fig5a": (90e-9, 0.4), "fig5b": (45e-9, 0.4), "fig5c": (20e-9, 0.4),
             "fig5d": (20e-9, 0.1), "fig8a": (45e-9, 0.1), "fig8b": (90e-9, 0.1)}
    for name, (L, mu) in table.items():
        p = load_preset(name).params
        assert (p.L, p.mu) == (L, mu)


def test_sweep_grid_covers_band():
    f = load_preset("fig5a").frequencies
    assert f[0] == pytest.approx(0.2e12) and f[-1] == pytest.approx(3e12)


def test_parasitics_flag():
    s = scenario_from_dict(small_tree(scenario={"parasitics": True}))
    assert s.circuit_params.R_s > 0


@pytest.mark.parametrize("section,key,value", [
    ("device", "mobility_m2_per_vs", -0.4),
    ("device", "segments", 0),
    ("device", "channel_length_m", "long"),
    ("solver", "steps_per_cycle", 10),
    ("solver", "inductor_law", "spice"),
    ("solver", "uniform_inductor_law", "spice"),
    ("hydro", "grid_points", 20),
    ("boundary", "open_resistance_ohm", 10.0),
    ("excitation", "frequency_points", 0),
    ("device", "colour", 3.0),
])
def test_config_errors_name_the_key(section, key, value):
    tree = small_tree()
    tree.setdefault(section, {})[key] = value
    if section == "excitation":
        del tree["excitation"]["frequencies_hz"]
    with pytest.raises(ConfigError) as info:
        scenario_from_dict(tree)
    assert info.value.key == f"{section}.{key}"


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        scenario_from_dict({"plot": {}})


def test_malformed_config_exit_code_and_no_artifacts(tmp_path, capsys):
    cfg = write_toml(tmp_path / "bad.toml",
                     "[device]\nmobility_m2_per_vs = -0.4\n")
    out = tmp_path / "out"
    assert run_scenario(str(cfg), "sweep", out_dir=out) == 2
    assert "device.mobility_m2_per_vs" in capsys.readouterr().err
    assert not out.exists()


def test_unparsable_config(tmp_path):
    cfg = write_toml(tmp_path / "bad.toml", "[device\n")
    assert run_scenario(str(cfg), "sweep", out_dir=tmp_path / "o") == 2


# -- sweeps ------------------------------------------------------------------

def test_analytic_three_points():
    s = scenario_from_dict(small_tree(excitation={"frequencies_hz": [0.5e12, 1e12, 2e12]}))
    c = frequency_sweep(s, "analytic")
    assert len(c) == 3 and np.all(np.isfinite(c.delta_u))
    assert c.meta["scenario"] == "small"


def test_circuit_zero_amplitude_is_zero():
    tree = small_tree(excitation={"amplitude_v": 0.0})
    del tree["excitation"]["amplitude_ratio"]
    s = scenario_from_dict(tree)
    c = frequency_sweep(s, "circuit_varying")
    np.testing.assert_array_equal(c.delta_u, 0.0)


def test_unknown_method():
    s = scenario_from_dict(small_tree())
    with pytest.raises(ValueError):
        frequency_sweep(s, "tcad")


def test_worker_pool_is_order_independent():
    s = scenario_from_dict(small_tree())
    a = frequency_sweep(s, "circuit_varying")
    b = frequency_sweep(replace(s, workers=2), "circuit_varying")
    np.testing.assert_array_equal(a.delta_u, b.delta_u)
    assert a.flags == b.flags


def test_varying_and_uniform_differ_near_resonance():
    s = load_preset("fig5a")
    s = replace(s, frequencies=np.array([s.resonance]))
    v = frequency_sweep(s, "circuit_varying").delta_u[0]
    u = frequency_sweep(s, "circuit_uniform").delta_u[0]
    assert max(v / u, u / v) > 1.2


def test_nonconvergence_point_is_marked(monkeypatch):
    from terafet import engine

    def boom(*a, **k):
        raise engine.NonConvergence("forced", 1.0, [1.0], 3)

    monkeypatch.setattr(harness, "circuit_point", boom)
    s = scenario_from_dict(small_tree())
    c = frequency_sweep(s, "circuit_varying")
    assert np.all(np.isnan(c.delta_u)) and c.flags == ["nonconvergence"] * 2


# -- end to end -----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    s = replace(load_preset("fig5a"), frequencies=np.array([0.7e12, 1.0e12, 1.3e12]),
                params=replace(load_preset("fig5a").params, N_seg=8), out_dir=out)
    assert run_scenario(s, "sweep") == 0
    return s, out


def test_end_to_end_writes_curves_and_report(small_run):
    s, out = small_run
    for m in s.methods:
        assert (out / f"fig5a_{m}.csv").exists()
        meta = json.loads((out / f"fig5a_{m}.csv.meta.json").read_text())
        assert meta["scenario"] == "fig5a" and meta["method"] == m
        assert len(meta["config_sha256"]) == 64
    report = json.loads((out / "fig5a_report.json").read_text())
    assert report["resonance_regime"] == "strong_resonant"
    assert (out / "fig5a_report.txt").read_text().startswith("scenario fig5a")


def test_rerun_is_byte_identical(small_run, tmp_path):
    s, out = small_run
    assert run_scenario(replace(s, out_dir=tmp_path), "sweep") == 0
    for m in s.methods:
        assert (tmp_path / f"fig5a_{m}.csv").read_bytes() == (out / f"fig5a_{m}.csv").read_bytes()


def test_report_is_recomputable_from_csvs(small_run):
    s, out = small_run
    curves = [read_csv(out / f"fig5a_{m}.csv") for m in s.methods]
    rebuilt = compare_methods(curves)
    stored = json.loads((out / "fig5a_report.json").read_text())
    assert json.loads(rebuilt.to_json()) == stored


def test_compare_command_reuses_csvs(small_run, capsys):
    s, out = small_run
    assert run_scenario(s, "compare") == 0
    assert "varying beats uniform" in capsys.readouterr().out


def test_profile_command(tmp_path):
    s = scenario_from_dict(small_tree(), out_dir=tmp_path)
    assert run_scenario(s, "profile", methods=["hydro", "circuit_varying"]) == 0
    prof = read_csv(tmp_path / "small_circuit_varying_profile.csv")
    assert isinstance(prof, ChannelProfile) and prof.v.shape[1] == 6
    drude = read_csv(tmp_path / "small_circuit_varying_drude.csv")
    assert set(drude) == {"x", "mean", "ptp"}
    assert (tmp_path / "small_hydro_profile.csv").exists()


def test_iv_golden(tmp_path):
    s = replace(load_preset("fig5a"), out_dir=tmp_path)
    assert run_scenario(s, "iv") == 0
    got = (tmp_path / "fig5a_iv.csv").read_text()
    assert got == (GOLDEN / "fig5a_iv.csv").read_text()
    table = read_csv(tmp_path / "fig5a_iv.csv")
    assert np.all(table.I_d[:, 0] == 0)


def test_analytic_golden(tmp_path):
    s = replace(load_preset("fig5a"), out_dir=tmp_path)
    assert run_scenario(s, "sweep", methods=["analytic"]) == 0
    got = (tmp_path / "fig5a_analytic.csv").read_text()
    assert got == (GOLDEN / "fig5a_analytic.csv").read_text()


# -- comparison and CSV ----------------------------------------------------------

def curve(values, method="analytic", freqs=None):
    freqs = np.arange(1, len(values) + 1) * 1e11 if freqs is None else freqs
    return ResponseCurve(freqs, np.asarray(values, float), method)


def test_identical_curves_have_zero_error():
    a = curve([1e-5, 3e-5, 2e-5])
    b = curve([1e-5, 3e-5, 2e-5], "hydro")
    assert rms_log_error(a, b) == (0.0, 0, 3)
    rep = compare_methods([a, b])
    assert rep.rms_log10 == {"analytic|hydro": 0.0}
    assert rep.varying_beats_uniform is None


def test_rms_skips_missing_points():
    a = curve([1e-5, np.nan, 2e-5])
    b = curve([1e-4, 3e-5, 2e-5], "hydro")
    err, signs, n = rms_log_error(a, b)
    assert n == 2 and err == pytest.approx(np.sqrt(0.5))


def test_grid_mismatch_is_an_error():
    with pytest.raises(ValueError, match="grid mismatch"):
        compare_methods([curve([1, 2]), curve([1, 2], "hydro", np.array([1e11, 3e11]))])
    with pytest.raises(ValueError):
        compare_methods([curve([1, 2])])


def test_non_resonant_report_is_exempt():
    s = load_preset("fig8b")
    s = replace(s, frequencies=s.frequencies[:3])
    a = frequency_sweep(s, "analytic")
    b = ResponseCurve(a.frequencies, a.delta_u * 2, "circuit_varying", meta=a.meta)
    c = ResponseCurve(a.frequencies, a.delta_u * 3, "circuit_uniform", meta=a.meta)
    rep = compare_methods([a, b, c])
    assert rep.resonance_regime == "non_resonant" and rep.verdict_exempt
    assert rep.varying_beats_uniform is True
    assert any("non-resonant" in n for n in rep.notes)


def test_empty_curve_is_header_only(tmp_path):
    c = ResponseCurve(np.array([]), np.array([]), "hydro")
    path = emit_csv(c, tmp_path / "e.csv")
    assert path.read_text() == "frequency_hz,delta_u_v,method,flag\n"


def test_csv_round_trip_nine_digits(tmp_path):
    rng = np.random.default_rng(1)
    vals = rng.uniform(1e-7, 1e-4, 7)
    c = curve(vals, "circuit_varying")
    back = read_csv(emit_csv(c, tmp_path / "c.csv"))
    np.testing.assert_allclose(back.delta_u, vals, rtol=5e-9)
    assert back.method == "circuit_varying"
    iv = IVTable(np.array([0.4, 0.5]), np.array([0.0, 0.1]), rng.uniform(size=(2, 2)))
    back = read_csv(emit_csv(iv, tmp_path / "iv.csv"))
    np.testing.assert_allclose(back.I_d, iv.I_d, rtol=5e-9)
    prof = ChannelProfile(np.array([1e-9, 2e-9]), np.array([0.0, 1e-13, 2e-13]),
                          rng.normal(size=(3, 2)), rng.uniform(1, 2, (3, 2)) * 1e16, "hydro")
    back = read_csv(emit_csv(prof, tmp_path / "p.csv"))
    np.testing.assert_allclose(back.v, prof.v, rtol=5e-9)


def test_csv_uses_unix_newlines():
    assert "\r" not in csv_text(curve([1e-5, 2e-5]))


def test_emit_surfaces_path_on_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_csv(curve([1.0]), blocker / "sub" / "c.csv")
