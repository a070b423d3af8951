import math

import numpy as np
import pytest
from scipy.optimize import curve_fit

from terafet import analytic, hydro
from terafet.device import Q_E, BiasPoint, DeviceParams, Excitation

P = DeviceParams()
BIAS = BiasPoint.from_swing(P, 0.15)
V_GT = 0.15
V_A = 0.01 * V_GT
F_PEAK = 1.0e12


@pytest.fixture(scope="module")
def peak():
    return hydro.solve_hydro(P, BIAS, Excitation(V_A, F_PEAK))


def test_config_validation():
    with pytest.raises(ValueError):
        hydro.HydroConfig(M=50)
    with pytest.raises(ValueError):
        hydro.HydroConfig(cfl=1.0)
    with pytest.raises(ValueError):
        hydro.HydroConfig(scheme="upwind")


def test_cfl_uniform_state():
    cfg = hydro.HydroConfig()
    st = hydro.equilibrium(P, V_GT, cfg.M)
    s = math.sqrt(Q_E * V_GT / P.m_eff)
    assert hydro.cfl_dt(st, cfg) == pytest.approx(cfg.cfl * st.dx / s, rel=1e-14)


def test_cfl_grid_and_factor_scaling():
    a = hydro.cfl_dt(hydro.equilibrium(P, V_GT, 201), hydro.HydroConfig(M=201))
    b = hydro.cfl_dt(hydro.equilibrium(P, V_GT, 401), hydro.HydroConfig(M=401))
    c = hydro.cfl_dt(hydro.equilibrium(P, V_GT, 201), hydro.HydroConfig(M=201, cfl=0.25))
    assert b == pytest.approx(a / 2, rel=1e-12)
    assert c == pytest.approx(a / 2, rel=1e-12)


def test_cfl_rejects_bad_states():
    st = hydro.equilibrium(P, V_GT, 201)
    st.v[3] = np.nan
    with pytest.raises(FloatingPointError):
        hydro.cfl_dt(st, hydro.HydroConfig())
    st = hydro.equilibrium(P, V_GT, 201)
    st.v[:] = 1e40
    with pytest.raises(hydro.CFLViolation):
        hydro.cfl_dt(st, hydro.HydroConfig())
    st = hydro.equilibrium(P, V_GT, 201)
    st.U[100] = -0.01
    with pytest.raises(hydro.ThresholdCrossing):
        st.validate()


def test_equilibrium_is_exact_for_many_steps():
    cfg = hydro.HydroConfig()
    st = hydro.equilibrium(P, V_GT, cfg.M)
    dt = hydro.cfl_dt(st, cfg)
    out = hydro.evolve(P, st, dt, 100_000, cfg, left=lambda t: V_GT)
    assert np.max(np.abs(out.U - V_GT)) <= 4 * np.finfo(float).eps * V_GT
    assert np.max(np.abs(out.v)) <= 1e-9


@pytest.mark.parametrize("scheme", hydro.SCHEMES)
def test_charge_conserved_with_reflecting_ends(scheme):
    cfg = hydro.HydroConfig(scheme=scheme)
    st = hydro.equilibrium(P, V_GT, cfg.M)
    st.U = V_GT + 0.01 * np.exp(-((st.x - 0.3 * P.L) / (0.1 * P.L)) ** 2)
    dt = hydro.cfl_dt(st, cfg)
    period = 4 * P.L / math.sqrt(Q_E * V_GT / P.m_eff)
    n = int(period / dt)

    def charge(U):
        return np.trapezoid(U, st.x)

    q0 = charge(st.U)
    drift = []
    out = hydro.evolve(P, st, dt, n, cfg, left=None,
                       callback=lambda i, s: drift.append(charge(s.U) / q0 - 1))
    assert np.max(np.abs(drift)) < 1e-3
    assert np.all(out.v[[0, -1]] == 0)


@pytest.mark.parametrize("scheme", hydro.SCHEMES)
def test_linear_dispersion_of_standing_mode(scheme):
    # fundamental closed-closed mode cos(pi x / L): U(0, t) rings at the
    # frequency and decay rate of s^2 k^2 = omega (omega + i/tau)
    cfg = hydro.HydroConfig(scheme=scheme)
    st = hydro.equilibrium(P, V_GT, cfg.M)
    A = 1e-4
    st.U = V_GT + A * np.cos(np.pi * st.x / P.L)
    s = math.sqrt(Q_E * V_GT / P.m_eff)
    k = math.pi / P.L
    omega = np.sqrt(s**2 * k**2 - 0.25 / P.tau**2 + 0j).real
    gamma = 0.5 / P.tau
    dt = hydro.cfl_dt(st, cfg)
    span = 3 * 2 * np.pi / omega
    n = int(span / dt)
    t, u = [], []
    hydro.evolve(P, st, dt, n, cfg, left=None,
                 callback=lambda i, st_: (t.append(st_.t), u.append(st_.U[0] - V_GT)))
    t, u = np.array(t), np.array(u)

    def model(t, a, g, w, ph):
        return a * np.exp(-g * t) * np.cos(w * t + ph)

    popt, _ = curve_fit(model, t, u, p0=(A, gamma, omega, 0.0))
    assert popt[2] == pytest.approx(omega, rel=0.03)
    assert popt[1] == pytest.approx(gamma, rel=0.03)


def test_open_drain_flux_vanishes():
    cfg = hydro.HydroConfig()
    st = hydro.equilibrium(P, V_GT, cfg.M)
    st.U, st.v = hydro.linear_standing_wave(P, V_GT, V_A, 2 * np.pi * F_PEAK, st.x)
    dt = hydro.cfl_dt(st, cfg)
    worst = []

    def cb(i, s):
        flux = np.abs(s.U * s.v)
        worst.append(flux[-1] / max(flux.max(), 1e-300))

    hydro.evolve(P, st, dt, 2000, cfg, left=lambda t: V_GT + V_A * math.cos(2 * np.pi * F_PEAK * t),
                 callback=cb)
    assert max(worst) < 1e-6


def test_no_drive_gives_zero():
    res = hydro.solve_hydro(P, BIAS, Excitation(0.0, F_PEAK))
    assert res.delta_u == 0.0
    assert np.all(res.profile.v == 0.0)


def test_amplitude_limit():
    with pytest.raises(ValueError, match="0.2"):
        hydro.solve_hydro(P, BIAS, Excitation(0.05, F_PEAK))


def test_below_threshold_rejected():
    with pytest.raises(ValueError):
        hydro.solve_hydro(P, BiasPoint.from_swing(P, -0.05), Excitation(V_A, F_PEAK))


def test_peak_matches_closed_form(peak):
    ref = analytic.ds_response(2 * np.pi * F_PEAK, P, BIAS, V_A)
    assert peak.settled
    assert peak.delta_u == pytest.approx(ref, rel=0.02)


def test_grid_refinement(peak):
    fine = hydro.solve_hydro(P, BIAS, Excitation(V_A, F_PEAK), hydro.HydroConfig(M=401))
    assert abs(fine.delta_u / peak.delta_u - 1) < 0.01


def test_schemes_agree(peak):
    lw = hydro.solve_hydro(P, BIAS, Excitation(V_A, F_PEAK),
                           hydro.HydroConfig(scheme="lax_wendroff"))
    assert lw.delta_u == pytest.approx(peak.delta_u, rel=1e-3)


def test_quadratic_law(peak):
    double = hydro.solve_hydro(P, BIAS, Excitation(2 * V_A, F_PEAK))
    assert double.delta_u / peak.delta_u == pytest.approx(4.0, rel=0.02)


def test_single_point_sweep_matches_solve(peak):
    curve = hydro.hydro_response_sweep(P, BIAS, V_A, [F_PEAK])
    assert curve.method == "hydro"
    assert curve.delta_u[0] == peak.delta_u
    assert curve.flags == ["ok"]


def test_sweep_records_point_failures():
    curve = hydro.hydro_response_sweep(P, BIAS, 0.05, [0.5e12, 1e12])
    assert np.all(np.isnan(curve.delta_u))
    assert curve.flags == ["valueerror", "valueerror"]


def test_profile_shape(peak):
    prof = peak.profile
    assert prof.v.shape == (len(prof.t), len(prof.x))
    np.testing.assert_allclose(prof.n, P.c_ox * V_GT / Q_E, rtol=0.05)
    env = prof.envelope()
    assert env[-1] == 0.0 and env.max() > 0


def test_nosettle_warns():
    with pytest.warns(hydro.NoSettle):
        res = hydro.solve_hydro(P, BIAS, Excitation(V_A, F_PEAK),
                                hydro.HydroConfig(max_cycles=5, min_cycles=4, settle_tol=1e-12))
    assert not res.settled
