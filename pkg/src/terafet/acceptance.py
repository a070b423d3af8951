"""Acceptance gate shared by ``terafet check`` and the test suite.

Each criterion returns a ``CriterionResult``; expensive sweeps are computed
once per ``AcceptanceRun`` and reused across criteria.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import analytic, engine, hydro
from .circuit import Element, custom_circuit
from .device import BiasPoint, DeviceParams, Excitation, uccm_density_derivs
from .harness import (
    circuit_point,
    compare_methods,
    emit_csv,
    frequency_sweep,
    load_preset,
    rms_log_error,
    write_report,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    exempt: bool = False

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} ({self.name}): {self.detail}"


def analytic_peak_frequency(params: DeviceParams, bias: BiasPoint) -> float:
    """Location of the first maximum of the closed-form response near s/4L."""
    f0 = analytic.resonance_frequency(params, bias)
    res = minimize_scalar(lambda f: -analytic.ds_f(2 * math.pi * f, params, bias),
                          bounds=(0.5 * f0, 1.5 * f0), method="bounded",
                          options={"xatol": 1e-6 * f0})
    return float(res.x)


class AcceptanceRun:
    """Lazily computed sweeps and point solves for the acceptance criteria."""

    def __init__(self, out_dir=None, echo=None):
        self.out_dir = Path(out_dir) if out_dir else None
        self.echo = echo or (lambda msg: None)
        self._curves = {}
        self._points = {}
        self._scen = {}

    def scenario(self, preset):
        if preset not in self._scen:
            self._scen[preset] = load_preset(preset)
        return self._scen[preset]

    def curve(self, preset, method):
        key = (preset, method)
        if key not in self._curves:
            t0 = time.time()
            c = frequency_sweep(self.scenario(preset), method)
            self.echo(f"  {preset} {method}: {len(c)} points in {time.time() - t0:.0f} s")
            self._curves[key] = c
            if self.out_dir:
                emit_csv(c, self.out_dir / f"{preset}_{method}.csv")
        return self._curves[key]

    def peak(self):
        s = self.scenario("fig5a")
        return analytic_peak_frequency(s.params, s.bias)

    def circuit_at_peak(self, mode="varying", V_a_scale=1.0, **overrides):
        """Circuit response at the fig5a peak; overrides: steps_per_cycle, N_seg, integrator."""
        key = ("circuit", mode, V_a_scale, tuple(sorted(overrides.items())))
        if key not in self._points:
            s = self.scenario("fig5a")
            solver = s.solver
            params = s.circuit_params
            if "steps_per_cycle" in overrides:
                solver = replace(solver, steps_per_cycle=overrides["steps_per_cycle"])
            if "integrator" in overrides:
                solver = replace(solver, integrator=overrides["integrator"])
            if "N_seg" in overrides:
                params = replace(params, N_seg=overrides["N_seg"])
            value, flag, waves, circ = circuit_point(s, self.peak(), mode, s.V_a * V_a_scale,
                                                     solver=solver, params=params)
            self._points[key] = (value, flag, waves, circ)
        return self._points[key]

    def hydro_at_peak(self, V_a_scale=1.0, M=None):
        key = ("hydro", V_a_scale, M)
        if key not in self._points:
            s = self.scenario("fig5a")
            cfg = s.hydro if M is None else replace(s.hydro, M=M)
            res = hydro.solve_hydro(s.params, s.bias, Excitation(s.V_a * V_a_scale, self.peak()),
                                    cfg)
            self._points[key] = res.delta_u
        return self._points[key]

    # -- criteria ---------------------------------------------------------

    def criterion_1(self):
        a = self.curve("fig5a", "analytic")
        h = self.curve("fig5a", "hydro")
        c = self.curve("fig5a", "circuit_varying")
        rel = np.abs(h.delta_u - a.delta_u) / np.abs(a.delta_u)
        worst = float(np.nanmax(rel)) if np.all(np.isfinite(rel)) else float("inf")
        err, signs, _ = rms_log_error(c, a)
        ok = worst < 0.10 and err < 0.15 and signs == 0 and len(a) >= 25
        return CriterionResult(1, "oracle triangle", ok,
                               f"max |hydro/analytic - 1| = {worst:.4f} (< 0.10); "
                               f"RMS log10(varying vs analytic) = {err:.4f} (< 0.15); "
                               f"sign mismatches {signs}; {len(a)} points")

    def criterion_2(self):
        parts, ok = [], True
        for preset in ("fig5a", "fig5d"):
            a = self.curve(preset, "analytic")
            ev = rms_log_error(self.curve(preset, "circuit_varying"), a)[0]
            eu = rms_log_error(self.curve(preset, "circuit_uniform"), a)[0]
            ok &= bool(ev < eu)
            parts.append(f"{preset}: varying {ev:.4f} vs uniform {eu:.4f}")
        return CriterionResult(2, "varying beats uniform", ok, "; ".join(parts))

    def criterion_3(self):
        s = self.scenario("fig8b")
        f0 = s.resonance
        reg = analytic.classify_regime(s.params, s.bias, 2 * math.pi * f0)
        curves = [self.curve("fig8b", m) for m in ("analytic", "circuit_varying", "circuit_uniform")]
        report = compare_methods(curves)
        if self.out_dir:
            write_report(report, self.out_dir / "fig8b_report")
        err = report.rms_log10.get("analytic|circuit_varying", float("nan"))
        flagged = report.verdict_exempt and any("non-resonant" in n for n in report.notes)
        ok = reg.regime == "non_resonant" and flagged
        return CriterionResult(3, "known-failure regime reported", ok,
                               f"regime {reg.regime} (L/L_cr = {reg.ratio:.2f}, "
                               f"omega*tau = {reg.omega_tau:.2f}); report exempt={report.verdict_exempt}; "
                               f"RMS log10(varying vs analytic) = {err:.4f} (reported, not gated)",
                               exempt=True)

    def criterion_4(self):
        s = self.scenario("fig5a")
        f0 = s.resonance
        fc = self.curve("fig5a", "circuit_varying").first_peak()[0]
        fh = self.curve("fig5a", "hydro").first_peak()[0]
        dc, dh = abs(fc / f0 - 1), abs(fh / f0 - 1)
        ok = dc < 0.10 and dh < 0.10
        return CriterionResult(4, "resonance placement", ok,
                               f"f0 = {f0:.4g} Hz; circuit_varying peak {fc:.4g} Hz ({dc:.1%}); "
                               f"hydro peak {fh:.4g} Hz ({dh:.1%})")

    def criterion_5(self):
        ratios = {
            "hydro": self.hydro_at_peak(2.0) / self.hydro_at_peak(1.0),
            "circuit_varying": self.circuit_at_peak("varying", 2.0)[0]
            / self.circuit_at_peak("varying")[0],
            "circuit_uniform": self.circuit_at_peak("uniform", 2.0)[0]
            / self.circuit_at_peak("uniform")[0],
        }
        ok = all(3.92 <= r <= 4.08 for r in ratios.values())
        return CriterionResult(5, "quadratic law", ok,
                               ", ".join(f"{m} {r:.4f}" for m, r in ratios.items())
                               + " (in [3.92, 4.08])")

    def criterion_6(self):
        _, _, waves, circ = self.circuit_at_peak("varying")
        mean, ptp = engine.drude_profile(waves, circ)
        mag = np.abs(mean)
        ratio = float(mag.max() / mag.min()) if mag.min() > 0 else float("inf")
        _, _, w0, c0 = self.circuit_at_peak("varying", 0.0)
        m0, p0 = engine.drude_profile(w0, c0)
        zero = bool(np.all(m0 == 0) and np.all(p0 == 0))
        # same profile read from L at the cycle-averaged node voltages; reported only
        names = circ.channel_nodes
        sl = waves.last_cycle()
        base = waves.baseline
        L0 = engine.drude_inductances(circ, base.voltage("gate"),
                                      {n: base.voltage(n) for n in names})
        Lbar = engine.drude_inductances(circ, waves.v("gate")[sl].mean(),
                                        {n: waves.v(n)[sl].mean() for n in names})
        alt = np.abs(Lbar - L0)
        alt_ratio = float(alt.max() / alt.min()) if alt.min() > 0 else float("inf")
        ok = ratio >= 10 and zero
        if self.out_dir:
            x = np.array(circ.segment_lengths).cumsum() - 0.5 * np.array(circ.segment_lengths)
            emit_csv({"x": x, "mean": mean, "ptp": ptp}, self.out_dir / "fig2_drude_profile.csv",
                     {"scenario": "fig5a", "method": "circuit_varying"})
        return CriterionResult(6, "Drude-inductance profile non-uniform", ok,
                               f"max/min |cycle-mean dL| over segments = {ratio:.3g} (>= 10); "
                               f"peak-to-peak max/min = {ptp.max() / ptp.min():.3g}; "
                               f"at cycle-mean voltages max/min = {alt_ratio:.3g} (not gated); "
                               f"V_a = 0 profile identically zero: {zero}")

    def criterion_7(self):
        base = self.circuit_at_peak("varying")[0]
        dt_half = self.circuit_at_peak("varying", steps_per_cycle=400)[0]
        n100 = self.circuit_at_peak("varying", N_seg=100)[0]
        h201 = self.hydro_at_peak()
        h401 = self.hydro_at_peak(M=401)
        d_dt = abs(dt_half / base - 1)
        d_n = abs(n100 / base - 1)
        d_h = abs(h401 / h201 - 1)
        rlc_amp, rlc_phase = rlc_smoke_test()
        jac = max_jacobian_error()
        ok = d_dt < 0.03 and d_n < 0.03 and d_h < 0.01 and rlc_amp < 1e-3 and rlc_phase < 0.5 \
            and jac < 1e-6
        return CriterionResult(7, "numerical hygiene", ok,
                               f"dt halving {d_dt:.3%}, N 50->100 {d_n:.3%} (< 3%); "
                               f"hydro M 201->401 {d_h:.3%} (< 1%); RLC amplitude error "
                               f"{rlc_amp:.2e} (< 1e-3), phase {rlc_phase:.3f} deg (< 0.5); "
                               f"max Jacobian rel. error {jac:.1e} (< 1e-6)")

    def criterion_8(self):
        s = self.scenario("fig5a")
        vg = np.array([0.35, 0.45, 0.6])
        vd = np.array([0.0, 0.05, 0.2, 0.5])
        p50 = s.circuit_params
        p1 = replace(p50, N_seg=1)
        _, _, I50 = engine.iv_sweep(p50, vg, vd)
        _, _, I1 = engine.iv_sweep(p1, vg, vd)
        nz = np.abs(I50) > 0
        rel = float(np.max(np.abs(I1[nz] - I50[nz]) / np.abs(I50[nz])))
        zero = float(np.max(np.abs(I50[:, 0])))
        ok = rel < 1e-9 and zero == 0.0
        return CriterionResult(8, "DC consistency", ok,
                               f"N=1 vs N=50 max relative difference {rel:.2e} (< 1e-9); "
                               f"max |I_d(V_ds=0)| = {zero:.1e} A")

    def all(self):
        return [getattr(self, f"criterion_{i}") for i in range(1, 9)]


def rlc_smoke_test(steps_per_cycle: int = 200, cycles: int = 60):
    """Series RLC driven by a cosine versus its phasor solution.

    Returns (relative amplitude error, phase error in degrees) of the
    capacitor voltage over the final cycle.
    """
    R, L, C = 50.0, 1e-9, 1e-12
    f = 1.2 / (2 * math.pi * math.sqrt(L * C))
    w = 2 * math.pi * f
    V = 1.0
    els = [
        Element("voltage_source", "V1", ("a", "0"), {"dc": 0.0, "amplitude": V, "omega": w}),
        Element("resistor", "R1", ("a", "b"), {"R": R}),
        Element("drude_inductor", "L1", ("b", "c"), {"L": L}),
        Element("linear_capacitor", "C1", ("c", "0"), {"C": C}),
    ]
    system = engine.MNASystem(custom_circuit(("a", "b", "c"), els), "flux")
    Z = R + 1j * w * L + 1 / (1j * w * C)
    Vc = V / Z / (1j * w * C)
    h = 1 / (f * steps_per_cycle)
    # quasi-static start: consistent but far from the periodic state, so the
    # homogeneous transient must decay (about e^-4 per cycle here)
    cfg = engine.SolverConfig(start="static")
    x0, qdot0 = engine._initial_state(system, engine.dc_operating_point(system, cfg), cfg)
    t, X = engine.integrate(system, x0, h, steps_per_cycle * cycles,
                            cfg, qdot0)
    sl = slice(-steps_per_cycle, None)
    vc = X[sl, system.index["c"]]
    tt = t[sl]
    basis = np.exp(1j * w * tt)
    est = 2 * np.mean(vc * np.conj(basis))
    amp = abs(abs(est) / abs(Vc) - 1)
    phase = abs(math.degrees(np.angle(est / Vc)))
    return float(amp), float(phase)


def max_jacobian_error(seed: int = 3) -> float:
    """Largest row-scaled relative difference between analytic and numerical Jacobians.

    Covers every inductor law and inductance mode of a six-segment device,
    plus the density derivatives of the charge-control law.
    """
    from .circuit import build_segmented

    rng = np.random.default_rng(seed)
    p = DeviceParams(N_seg=6)
    bias = BiasPoint.from_swing(p, 0.15)
    worst = 0.0
    for mode in ("varying", "uniform"):
        for law in engine.INDUCTOR_LAWS:
            circ = build_segmented(p, bias, Excitation(0.0015, 1e12), inductance_mode=mode)
            system = engine.MNASystem(circ, law)
            x = engine.dc_operating_point(system).x
            x = x + rng.normal(size=x.size) * np.where(system.is_node_row, 0.02, 1e-3)
            t = 0.3e-12
            f, q, Jf, Jq = system.evaluate(x, t)
            Jq = Jq.dense()
            nf = np.zeros_like(Jf)
            nq = np.zeros_like(Jq)
            for j in range(x.size):
                step = 1e-6 * max(1e-3, abs(x[j]))
                e = np.zeros(x.size)
                e[j] = step
                fp, qp, _, _ = system.evaluate(x + e, t)
                fm, qm, _, _ = system.evaluate(x - e, t)
                nf[:, j] = (fp - fm) / (2 * step)
                nq[:, j] = (qp - qm) / (2 * step)
            for A, B in ((Jf, nf), (Jq, nq)):
                scale = np.abs(B).max(axis=1, keepdims=True)
                scale[scale == 0] = 1.0
                worst = max(worst, float(np.max(np.abs(A - B) / scale)))
    U = np.linspace(-0.2, 0.4, 61)
    n, dn, d2n = uccm_density_derivs(p, U)
    hU = 1e-6
    n_p, dn_p, _ = uccm_density_derivs(p, U + hU)
    n_m, dn_m, _ = uccm_density_derivs(p, U - hU)
    worst = max(worst, float(np.max(np.abs((n_p - n_m) / (2 * hU) - dn) / np.abs(dn))))
    worst = max(worst, float(np.max(np.abs((dn_p - dn_m) / (2 * hU) - d2n) / np.abs(d2n).max())))
    return worst


def run_all(out_dir=None, echo=print) -> list[CriterionResult]:
    """Evaluate every criterion, printing one line per criterion."""
    run = AcceptanceRun(out_dir, echo)
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for crit in run.all():
            t0 = time.time()
            r = crit()
            results.append(r)
            echo(r.line() + f"  [{time.time() - t0:.0f} s]")
    return results
