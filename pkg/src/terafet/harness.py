"""Scenario loading, method dispatch, comparison metrics and CSV artifacts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import analytic, engine, hydro
from .circuit import BoundaryCondition, build_segmented
from .device import M_E, BiasPoint, DeviceParams, Excitation
from .results import METHODS, ChannelProfile, ResponseCurve

log = logging.getLogger(__name__)

PRESETS = ("fig5a", "fig5b", "fig5c", "fig5d", "fig8a", "fig8b", "fig2")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GATE = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# -- scenario -------------------------------------------------------------

@dataclass(frozen=True)
class IVGrid:
    gate_voltages: tuple[float, ...] = (0.35, 0.4, 0.45, 0.5, 0.55, 0.6)
    drain_voltages: tuple[float, ...] = tuple(np.round(np.linspace(0.0, 0.5, 11), 6))


@dataclass(frozen=True)
class Scenario:
    name: str
    params: DeviceParams
    bias: BiasPoint
    V_a: float
    frequencies: np.ndarray
    boundary: BoundaryCondition = field(default_factory=BoundaryCondition)
    methods: tuple[str, ...] = METHODS
    solver: engine.SolverConfig = field(default_factory=engine.SolverConfig)
    hydro: hydro.HydroConfig = field(default_factory=hydro.HydroConfig)
    out_dir: Path = Path("out")
    parasitics: bool = False
    conductance_rule: str = "symmetric"
    profile_frequency: float | None = None
    iv: IVGrid = field(default_factory=IVGrid)
    workers: int = 1
    config_hash: str = ""

    def __post_init__(self):
        if not len(self.frequencies):
            raise ConfigError("excitation.frequency_points", "frequency grid is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError("scenario.methods", f"unknown method {m!r}")

    @property
    def circuit_params(self) -> DeviceParams:
        """Device used by the circuit methods; intrinsic unless parasitics are on."""
        return self.params if self.parasitics else self.params.intrinsic()

    @property
    def resonance(self) -> float:
        return analytic.resonance_frequency(self.params, self.bias)

    def meta(self) -> dict:
        p = self.params
        return {
            "scenario": self.name,
            "config_sha256": self.config_hash,
            "device": {k: getattr(p, k) for k in
                       ("L", "W", "mu", "m_eff", "c_ox", "V_T0", "eta", "T", "N_seg")},
            "V_gt": self.bias.V_gt,
            "V_a": self.V_a,
            "parasitics": self.parasitics,
            "inductor_law": self.solver.inductor_law,
            "uniform_inductor_law": self.solver.uniform_inductor_law,
            "conductance_rule": self.conductance_rule,
        }


# key -> (section, field, type); types: float, int, str, bool, list
_SCHEMA = {
    "scenario": {
        "name": str, "methods": list, "parasitics": bool, "workers": int,
    },
    "device": {
        "channel_length_m": float, "channel_width_m": float,
        "mobility_m2_per_vs": float, "effective_mass_ratio": float,
        "oxide_capacitance_f_per_m2": float, "threshold_voltage_v": float,
        "ideality_factor": float, "temperature_k": float, "segments": int,
        "source_resistance_ohm": float, "drain_resistance_ohm": float,
        "gate_source_capacitance_f": float, "gate_drain_capacitance_f": float,
    },
    "bias": {"gate_voltage_swing_v": float, "drain_source_voltage_v": float},
    "excitation": {
        "amplitude_v": float, "amplitude_ratio": float,
        "frequency_start_hz": float, "frequency_stop_hz": float,
        "frequency_points": int, "frequencies_hz": list,
        "profile_frequency_hz": float,
    },
    "boundary": {"mode": str, "load_resistance_ohm": float, "open_resistance_ohm": float},
    "solver": {
        "steps_per_cycle": int, "max_cycles": int, "settle_tol": float,
        "newton_tol_v": float, "newton_tol_i": float, "newton_max_iter": int,
        "integrator": str, "inductor_law": str, "uniform_inductor_law": str,
        "conductance_rule": str,
    },
    "hydro": {
        "grid_points": int, "cfl": float, "max_cycles": int, "scheme": str,
        "settle_tol": float,
    },
    "iv": {"gate_voltages_v": list, "drain_voltages_v": list},
}

_DEVICE_FIELDS = {
    "channel_length_m": "L", "channel_width_m": "W", "mobility_m2_per_vs": "mu",
    "oxide_capacitance_f_per_m2": "c_ox", "threshold_voltage_v": "V_T0",
    "ideality_factor": "eta", "temperature_k": "T", "segments": "N_seg",
    "source_resistance_ohm": "R_s", "drain_resistance_ohm": "R_d",
    "gate_source_capacitance_f": "C_gs_ext", "gate_drain_capacitance_f": "C_gd_ext",
}
_SOLVER_FIELDS = ("steps_per_cycle", "max_cycles", "settle_tol", "newton_tol_v",
                  "newton_tol_i", "newton_max_iter", "integrator", "inductor_law",
                  "uniform_inductor_law")
_HYDRO_FIELDS = {"grid_points": "M", "cfl": "cfl", "max_cycles": "max_cycles",
                 "scheme": "scheme", "settle_tol": "settle_tol"}


def _check_types(tree: dict):
    for section, body in tree.items():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key, value in body.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            want = _SCHEMA[section][key]
            ok = {
                float: isinstance(value, (int, float)) and not isinstance(value, bool),
                int: isinstance(value, int) and not isinstance(value, bool),
                str: isinstance(value, str),
                bool: isinstance(value, bool),
                list: isinstance(value, list),
            }[want]
            if not ok:
                raise ConfigError(f"{section}.{key}", f"expected {want.__name__}")


def scenario_from_dict(tree: dict, out_dir=None, config_hash="") -> Scenario:
    """Validate a parsed config tree and build the Scenario."""
    _check_types(tree)
    sc = tree.get("scenario", {})
    dev = tree.get("device", {})
    kwargs = {_DEVICE_FIELDS[k]: v for k, v in dev.items() if k in _DEVICE_FIELDS}
    if "effective_mass_ratio" in dev:
        kwargs["m_eff"] = dev["effective_mass_ratio"] * M_E
    try:
        params = DeviceParams(**kwargs)
    except ValueError as exc:
        key = _blame(str(exc), dev, "device")
        raise ConfigError(key, str(exc)) from exc

    b = tree.get("bias", {})
    V_gt = b.get("gate_voltage_swing_v", 0.15)
    if V_gt <= 0:
        raise ConfigError("bias.gate_voltage_swing_v", "must be positive (above threshold)")
    bias = BiasPoint.from_swing(params, V_gt, b.get("drain_source_voltage_v", 0.0))

    ex = tree.get("excitation", {})
    if "amplitude_v" in ex and "amplitude_ratio" in ex:
        raise ConfigError("excitation.amplitude_v", "give amplitude_v or amplitude_ratio, not both")
    V_a = ex.get("amplitude_v", ex.get("amplitude_ratio", 0.01) * V_gt)
    if V_a < 0:
        raise ConfigError("excitation.amplitude_v" if "amplitude_v" in ex
                          else "excitation.amplitude_ratio", "must be non-negative")
    if "frequencies_hz" in ex:
        freqs = np.asarray(ex["frequencies_hz"], float)
    else:
        scale = 90e-9 / params.L
        n = ex.get("frequency_points", 29)
        if n < 1:
            raise ConfigError("excitation.frequency_points", "must be >= 1")
        freqs = np.linspace(ex.get("frequency_start_hz", 0.2e12 * scale),
                            ex.get("frequency_stop_hz", 3e12 * scale), n)
    if np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
        raise ConfigError("excitation.frequencies_hz", "must be positive and increasing")

    bd = tree.get("boundary", {})
    try:
        boundary = BoundaryCondition(bd.get("mode", "open_drain"),
                                     bd.get("load_resistance_ohm"),
                                     bd.get("open_resistance_ohm", 1e8))
    except ValueError as exc:
        raise ConfigError("boundary." + _blame(str(exc), bd, "").lstrip("."), str(exc)) from exc

    so = tree.get("solver", {})
    try:
        solver = engine.SolverConfig(**{k: so[k] for k in _SOLVER_FIELDS if k in so})
    except ValueError as exc:
        raise ConfigError(_blame(str(exc), so, "solver"), str(exc)) from exc
    rule = so.get("conductance_rule", "symmetric")
    if rule not in ("symmetric", "drain"):
        raise ConfigError("solver.conductance_rule", f"unknown rule {rule!r}")

    hy = tree.get("hydro", {})
    try:
        hcfg = hydro.HydroConfig(**{_HYDRO_FIELDS[k]: v for k, v in hy.items()})
    except ValueError as exc:
        raise ConfigError(_blame(str(exc), hy, "hydro"), str(exc)) from exc

    ivs = tree.get("iv", {})
    iv = IVGrid(tuple(float(v) for v in ivs.get("gate_voltages_v", IVGrid.gate_voltages)),
                tuple(float(v) for v in ivs.get("drain_voltages_v", IVGrid.drain_voltages)))

    methods = tuple(sc.get("methods", METHODS))
    workers = sc.get("workers", 1)
    if workers < 1:
        raise ConfigError("scenario.workers", "must be >= 1")
    return Scenario(
        name=sc.get("name", "scenario"), params=params, bias=bias, V_a=float(V_a),
        frequencies=freqs, boundary=boundary, methods=methods, solver=solver, hydro=hcfg,
        out_dir=Path(out_dir) if out_dir else Path("out"),
        parasitics=sc.get("parasitics", False), conductance_rule=rule,
        profile_frequency=ex.get("profile_frequency_hz"), iv=iv, workers=workers,
        config_hash=config_hash,
    )


def _blame(message: str, body: dict, section: str) -> str:
    """Best-effort mapping of a validation message back to a config key."""
    inverse = {v: k for k, v in _DEVICE_FIELDS.items()}
    inverse.update({v: k for k, v in _HYDRO_FIELDS.items()})
    inverse.update({"m_eff": "effective_mass_ratio", "R_open": "open_resistance_ohm",
                    "R_load": "load_resistance_ohm", "CFL": "cfl"})
    for token in message.replace(",", " ").split():
        token = token.strip("'\"")
        key = inverse.get(token, token)
        if key in body:
            return f"{section}.{key}" if section else key
    return section or "config"


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    try:
        tree = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from exc
    return scenario_from_dict(tree, config_hash=hashlib.sha256(raw).hexdigest())


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return Path(str(resources.files("terafet") / "presets" / f"{name}.toml"))


def load_preset(name: str) -> Scenario:
    return load_config(preset_path(name))


# -- method dispatch ------------------------------------------------------

def circuit_point(scenario: Scenario, freq: float, mode: str, V_a: float | None = None,
                  solver: engine.SolverConfig | None = None, params: DeviceParams | None = None):
    """Run one transient and return ``(delta_u, flag, waves, circuit)``."""
    p = params or scenario.circuit_params
    V_a = scenario.V_a if V_a is None else V_a
    bias = BiasPoint.from_swing(p, scenario.bias.V_gt, scenario.bias.V_ds)
    circ = build_segmented(p, bias, Excitation(V_a, freq), scenario.boundary,
                           inductance_mode=mode, conductance_rule=scenario.conductance_rule)
    cfg = solver or scenario.solver
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", engine.NoSettle)
        waves = engine.transient(circ, config=cfg)
    resp = engine.extract_dc_response(waves, settle_tol=cfg.settle_tol)
    settled = waves.settled and not any(issubclass(w.category, engine.NoSettle) for w in caught)
    flag = "ok" if settled and resp.consistent else "nosettle"
    return resp.value, flag, waves, circ


def _circuit_job(args):
    scenario, freq, mode = args
    try:
        value, flag, _, _ = circuit_point(scenario, freq, mode)
        return value, flag
    except engine.NonConvergence as exc:
        log.error("circuit point %.4g Hz failed: %s", freq, exc)
        return float("nan"), "nonconvergence"


def frequency_sweep(scenario: Scenario, method: str) -> ResponseCurve:
    """ResponseCurve of one method over the scenario grid.

    Circuit points fan out over ``scenario.workers`` processes; results are
    keyed by grid index so arrival order never matters.
    """
    freqs = scenario.frequencies
    meta = dict(scenario.meta(), method=method)
    if method == "analytic":
        curve = analytic.analytic_sweep(scenario.params, scenario.bias, scenario.V_a, freqs)
        curve.meta = meta
        return curve
    if method == "hydro":
        curve = hydro.hydro_response_sweep(scenario.params, scenario.bias, scenario.V_a,
                                           freqs, scenario.hydro)
        curve.meta = meta
        return curve
    if method not in ("circuit_varying", "circuit_uniform"):
        raise ValueError(f"unknown method {method!r}")
    mode = method.split("_", 1)[1]
    jobs = [(scenario, float(f), mode) for f in freqs]
    if scenario.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as pool:
            results = list(pool.map(_circuit_job, jobs))
    else:
        results = [_circuit_job(j) for j in jobs]
    values = np.array([r[0] for r in results])
    flags = [r[1] for r in results]
    return ResponseCurve(freqs, values, method, flags, meta)


# -- comparison -----------------------------------------------------------

def rms_log_error(a: ResponseCurve, b: ResponseCurve):
    """(RMS of log10|a/b| over shared finite non-zero points, sign mismatches, count)."""
    if a.frequencies.shape != b.frequencies.shape or not np.allclose(
            a.frequencies, b.frequencies, rtol=1e-12, atol=0):
        raise ValueError(f"grid mismatch between {a.method} and {b.method}")
    ok = np.isfinite(a.delta_u) & np.isfinite(b.delta_u) & (a.delta_u != 0) & (b.delta_u != 0)
    if not np.any(ok):
        return float("nan"), 0, 0
    ratio = np.log10(np.abs(a.delta_u[ok]) / np.abs(b.delta_u[ok]))
    signs = int(np.count_nonzero(np.sign(a.delta_u[ok]) != np.sign(b.delta_u[ok])))
    return float(np.sqrt(np.mean(ratio**2))), signs, int(np.count_nonzero(ok))


@dataclass
class ComparisonReport:
    scenario: str
    peaks: dict
    rms_log10: dict
    sign_mismatches: dict
    regimes: list
    resonance_regime: str
    varying_beats_uniform: bool | None
    verdict_exempt: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def summary(self) -> str:
        lines = [f"scenario {self.scenario}  (regime at resonance: {self.resonance_regime})"]
        for m, (f, v) in sorted(self.peaks.items()):
            lines.append(f"  peak {m:16s} f = {f:.4g} Hz  dU = {v:.4g} V")
        for pair, err in sorted(self.rms_log10.items()):
            lines.append(f"  rms log10 {pair:34s} {err:.4f}")
        if self.varying_beats_uniform is not None:
            tag = " (exempt: non-resonant regime)" if self.verdict_exempt else ""
            lines.append(f"  varying beats uniform: {self.varying_beats_uniform}{tag}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _params_from_meta(meta: dict):
    dev = meta.get("device")
    if not dev or "V_gt" not in meta:
        return None, None
    p = DeviceParams(**dev)
    return p, BiasPoint.from_swing(p, meta["V_gt"])


def compare_methods(curves: list[ResponseCurve], reference: str = "analytic") -> ComparisonReport:
    """Peaks, pairwise RMS log10 errors and the inductance-model verdict.

    Regime annotations come from the device metadata carried by the curves,
    so the report can be rebuilt from the CSV artifacts alone.
    """
    if len(curves) < 2:
        raise ValueError("need at least two curves to compare")
    by = {c.method: c for c in curves}
    grid = curves[0].frequencies
    for c in curves[1:]:
        if c.frequencies.shape != grid.shape or not np.allclose(c.frequencies, grid,
                                                               rtol=1e-12, atol=0):
            raise ValueError(f"grid mismatch between {curves[0].method} and {c.method}")
    peaks = {m: c.first_peak() for m, c in by.items() if np.any(c.valid)}
    rms, signs = {}, {}
    names = list(by)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            err, mism, _ = rms_log_error(by[a], by[b])
            rms[f"{a}|{b}"] = err
            signs[f"{a}|{b}"] = mism
    meta = next((c.meta for c in curves if c.meta.get("device")), {})
    p, bias = _params_from_meta(meta)
    regimes, res_regime = [], "unknown"
    if p is not None:
        regimes = [analytic.classify_regime(p, bias, 2 * math.pi * f).regime for f in grid]
        f0 = analytic.resonance_frequency(p, bias)
        res_regime = analytic.classify_regime(p, bias, 2 * math.pi * f0).regime

    def err_vs_ref(m):
        key = f"{m}|{reference}" if f"{m}|{reference}" in rms else f"{reference}|{m}"
        return rms.get(key)

    verdict = None
    notes = []
    if reference in by and "circuit_varying" in by and "circuit_uniform" in by:
        ev, eu = err_vs_ref("circuit_varying"), err_vs_ref("circuit_uniform")
        verdict = bool(ev < eu) if np.isfinite(ev) and np.isfinite(eu) else None
    exempt = res_regime == "non_resonant"
    if exempt:
        notes.append("non-resonant regime: circuit agreement with the closed form is expected "
                     "to degrade; verdict is not gated")
    for m, c in by.items():
        bad = [fl for fl in c.flags if fl != "ok"]
        if bad:
            notes.append(f"{m}: {len(bad)} flagged point(s) ({', '.join(sorted(set(bad)))})")
    return ComparisonReport(
        scenario=meta.get("scenario", ""), peaks=peaks, rms_log10=rms,
        sign_mismatches=signs, regimes=regimes, resonance_regime=res_regime,
        varying_beats_uniform=verdict, verdict_exempt=exempt, notes=notes,
    )


# -- CSV artifacts --------------------------------------------------------

@dataclass
class IVTable:
    V_gs: np.ndarray
    V_ds: np.ndarray
    I_d: np.ndarray

    def rows(self):
        for i, vg in enumerate(self.V_gs):
            for j, vd in enumerate(self.V_ds):
                yield vg, vd, self.I_d[i, j]


HEADERS = {
    "curve": ["frequency_hz", "delta_u_v", "method", "flag"],
    "profile": ["x_m", "t_s", "v_mps", "n_per_m2"],
    "iv": ["v_gs", "v_ds", "i_d"],
    "drude": ["x_m", "delta_l_mean_h", "l_ptp_h"],
}


def _num(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v + 0.0, ".9g")  # + 0.0 folds -0 into 0


def csv_text(obj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(obj, ResponseCurve):
        w.writerow(HEADERS["curve"])
        for f, v, fl in zip(obj.frequencies, obj.delta_u, obj.flags):
            w.writerow([_num(f), _num(v), obj.method, fl])
    elif isinstance(obj, ChannelProfile):
        w.writerow(HEADERS["profile"])
        for it, t in enumerate(obj.t):
            for ix, x in enumerate(obj.x):
                w.writerow([_num(x), _num(t), _num(obj.v[it, ix]), _num(obj.n[it, ix])])
    elif isinstance(obj, IVTable):
        w.writerow(HEADERS["iv"])
        for row in obj.rows():
            w.writerow([_num(v) for v in row])
    elif isinstance(obj, dict) and set(obj) == {"x", "mean", "ptp"}:
        w.writerow(HEADERS["drude"])
        for row in zip(obj["x"], obj["mean"], obj["ptp"]):
            w.writerow([_num(v) for v in row])
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    return buf.getvalue()


def emit_csv(obj, path, meta: dict | None = None) -> Path:
    """Write ``obj`` as CSV plus a ``<path>.meta.json`` sidecar."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text(obj), encoding="utf-8", newline="\n")
        side = dict(meta or getattr(obj, "meta", {}) or {})
        if isinstance(obj, (ResponseCurve, ChannelProfile)):
            side.setdefault("method", obj.method)
        Path(str(path) + ".meta.json").write_text(
            json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_meta(path) -> dict:
    side = Path(str(path) + ".meta.json")
    return json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}


def read_csv(path):
    """Inverse of ``emit_csv``; the header decides the object type."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    head, body = rows[0], rows[1:]
    meta = read_meta(path)
    if head == HEADERS["curve"]:
        method = body[0][2] if body else meta.get("method", "analytic")
        return ResponseCurve(
            np.array([float(r[0]) for r in body]), np.array([float(r[1]) for r in body]),
            method, [r[3] for r in body], meta)
    if head == HEADERS["iv"]:
        data = np.array([[float(v) for v in r] for r in body]).reshape(-1, 3)
        vg = np.unique(data[:, 0])
        vd = np.unique(data[:, 1])
        return IVTable(vg, vd, data[:, 2].reshape(len(vg), len(vd)))
    if head == HEADERS["profile"]:
        data = np.array([[float(v) for v in r] for r in body]).reshape(-1, 4)
        x = np.unique(data[:, 0])
        t = np.unique(data[:, 1])
        shape = (len(t), len(x))
        return ChannelProfile(x, t, data[:, 2].reshape(shape), data[:, 3].reshape(shape),
                              meta.get("method", ""))
    if head == HEADERS["drude"]:
        data = np.array([[float(v) for v in r] for r in body]).reshape(-1, 3)
        return {"x": data[:, 0], "mean": data[:, 1], "ptp": data[:, 2]}
    raise ValueError(f"{path}: unrecognised header {head}")


# -- scenario runners -----------------------------------------------------

def run_sweep(scenario: Scenario, methods=None) -> tuple[list[ResponseCurve], ComparisonReport | None]:
    methods = tuple(methods or scenario.methods)
    out = scenario.out_dir
    curves = []
    for m in methods:
        curve = frequency_sweep(scenario, m)
        emit_csv(curve, out / f"{scenario.name}_{m}.csv")
        curves.append(curve)
    report = None
    if len(curves) >= 2:
        # score the written (9-digit) values so the report can be rebuilt from disk
        report = compare_methods([read_csv(out / f"{scenario.name}_{m}.csv") for m in methods])
        write_report(report, out / f"{scenario.name}_report")
    return curves, report


def write_report(report: ComparisonReport, stem: Path):
    stem.parent.mkdir(parents=True, exist_ok=True)
    Path(str(stem) + ".json").write_text(report.to_json(), encoding="utf-8")
    Path(str(stem) + ".txt").write_text(report.summary(), encoding="utf-8")


def run_compare(scenario: Scenario) -> ComparisonReport:
    """Rebuild the report from curve CSVs in the output directory, sweeping if absent."""
    curves = []
    for m in scenario.methods:
        path = scenario.out_dir / f"{scenario.name}_{m}.csv"
        if path.exists():
            curves.append(read_csv(path))
        else:
            curve = frequency_sweep(scenario, m)
            emit_csv(curve, path)
            curves.append(curve)
    report = compare_methods(curves)
    write_report(report, scenario.out_dir / f"{scenario.name}_report")
    return report


def run_profile(scenario: Scenario, methods=None):
    """Channel profiles (and the Drude-inductance profile) at one frequency."""
    freq = scenario.profile_frequency or scenario.resonance
    out = scenario.out_dir
    written = {}
    methods = tuple(methods or [m for m in scenario.methods if m != "analytic"])
    for m in methods:
        if m == "hydro":
            res = hydro.solve_hydro(scenario.params, scenario.bias,
                                    Excitation(scenario.V_a, freq), scenario.hydro)
            prof = res.profile
        elif m.startswith("circuit_"):
            _, _, waves, circ = circuit_point(scenario, freq, m.split("_", 1)[1])
            prof = engine.extract_profiles(waves, circ)
            dl_mean, dl_ptp = engine.drude_profile(waves, circ)
            drude = {"x": prof.x, "mean": dl_mean, "ptp": dl_ptp}
            written[f"{m}_drude"] = emit_csv(
                drude, out / f"{scenario.name}_{m}_drude.csv",
                dict(scenario.meta(), method=m, frequency_hz=freq))
        else:
            continue
        written[m] = emit_csv(prof, out / f"{scenario.name}_{m}_profile.csv",
                              dict(scenario.meta(), method=m, frequency_hz=freq))
    return written


def run_iv(scenario: Scenario) -> IVTable:
    vg = np.array(scenario.iv.gate_voltages)
    vd = np.array(scenario.iv.drain_voltages)
    V_gs, V_ds, I = engine.iv_sweep(scenario.circuit_params, vg, vd, scenario.solver)
    table = IVTable(V_gs, V_ds, I)
    emit_csv(table, scenario.out_dir / f"{scenario.name}_iv.csv", scenario.meta())
    return table


def run_scenario(source, command: str = "sweep", out_dir=None, methods=None) -> int:
    """Execute a scenario command; returns a process exit status.

    ``source`` is a config path, a preset name or a Scenario.  Config
    problems return 2, solver non-convergence 3 (artifacts already written
    are kept) and a failed acceptance gate 4.
    """
    try:
        if isinstance(source, Scenario):
            scenario = source
        elif isinstance(source, str) and source in PRESETS:
            scenario = load_preset(source)
        else:
            scenario = load_config(source)
        if out_dir is not None:
            scenario = replace(scenario, out_dir=Path(out_dir))
        if methods:
            for m in methods:
                if m not in METHODS:
                    raise ConfigError("--method", f"unknown method {m!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if command == "sweep":
            curves, report = run_sweep(scenario, methods)
            if report:
                print(report.summary(), end="")
            if any("nonconvergence" in c.flags for c in curves):
                return EXIT_SOLVER
        elif command == "compare":
            if methods:
                scenario = replace(scenario, methods=tuple(methods))
            print(run_compare(scenario).summary(), end="")
        elif command == "profile":
            for name, path in run_profile(scenario, methods).items():
                print(f"{name}: {path}")
        elif command == "iv":
            table = run_iv(scenario)
            print(f"I-V table {table.I_d.shape[0]}x{table.I_d.shape[1]} written to "
                  f"{scenario.out_dir / (scenario.name + '_iv.csv')}")
        elif command == "check":
            from .acceptance import run_all

            results = run_all(out_dir=scenario.out_dir)
            return EXIT_OK if all(r.passed for r in results) else EXIT_GATE
        else:
            raise ValueError(f"unknown command {command!r}")
    except engine.NonConvergence as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK
