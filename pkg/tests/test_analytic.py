import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import find_peaks

from terafet import analytic
from terafet.acceptance import analytic_peak_frequency
from terafet.device import BiasPoint, DeviceParams

P = DeviceParams()
BIAS = BiasPoint.from_swing(P, 0.15)
F0 = analytic.resonance_frequency(P, BIAS)


def test_fundamental_frequency_value():
    assert F0 == pytest.approx(1.01e12, rel=0.01)


def test_zero_frequency_limit():
    assert analytic.ds_f(0.0, P, BIAS) == pytest.approx(0.0, abs=1e-15)
    small = analytic.ds_f(2 * np.pi * 1e8, P, BIAS)
    assert 0 <= small < 1e-3


def test_long_channel_broadband_limit():
    # omega*tau = 0.1 with k''L = 10: the cavity terms vanish and f -> 1 + beta
    omega = 0.1 / P.tau
    k = analytic._wavenumber(omega, P.tau, math.sqrt(1.602176634e-19 * 0.15 / P.m_eff))
    p = DeviceParams(L=10 / k.imag)
    beta = 2 * 0.1 / math.sqrt(1 + 0.01)
    f = analytic.ds_f(omega, p, BIAS)
    assert f == pytest.approx(1 + beta, rel=1e-6)
    # and the limit is approached from the cavity side for shorter channels
    assert abs(analytic.ds_f(omega, DeviceParams(L=3 / k.imag), BIAS) - (1 + beta)) > 1e-3


def test_first_peak_near_quarter_wave():
    fp = analytic_peak_frequency(P, BIAS)
    assert abs(fp / F0 - 1) < 0.10


def test_first_two_peaks_at_odd_multiples():
    p = DeviceParams(mu=2.0)  # omega*tau > 2 across the band
    f0 = analytic.resonance_frequency(p, BIAS)
    f = np.linspace(0.1, 6, 6000) * f0
    idx, _ = find_peaks(analytic.ds_f(2 * np.pi * f, p, BIAS))
    peaks = f[idx][:2] / f0
    assert 2 * np.pi * peaks[0] * f0 * p.tau > 2
    assert peaks[0] == pytest.approx(1, rel=0.10)
    assert peaks[1] == pytest.approx(3, rel=0.10)


def test_continuity_on_sweep_grid():
    f = np.linspace(0.2e12, 3e12, 29)
    w = 2 * np.pi * f
    jump = np.abs(analytic.ds_f(w * (1 + 1e-4), P, BIAS) - analytic.ds_f(w, P, BIAS))
    assert np.max(jump) < 0.05


def test_non_negative_near_resonance():
    f = np.linspace(0.5, 1.5, 101) * F0
    assert np.all(analytic.ds_f(2 * np.pi * f, P, BIAS) > 0)


def test_long_channel_is_finite():
    p = DeviceParams(L=50e-6)
    assert np.isfinite(analytic.ds_f(2 * np.pi * 1e12, p, BIAS))


def test_response_prefactor():
    w = 2 * np.pi * F0
    assert analytic.ds_response(w, P, BIAS, 0.0) == 0.0
    a = analytic.ds_response(w, P, BIAS, 1e-3)
    assert a == pytest.approx(1e-6 * analytic.ds_f(w, P, BIAS) / 0.6, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.03), st.floats(0.05, 0.5), st.floats(1e11, 5e12))
def test_scaling_identities(V_a, V_gt, f):
    bias = BiasPoint.from_swing(P, V_gt)
    w = 2 * np.pi * f
    base = analytic.ds_response(w, P, bias, V_a)
    assert analytic.ds_response(w, P, bias, 2 * V_a) == pytest.approx(4 * base, rel=1e-13)
    # reciprocal in V_gt at a fixed value of f(omega)
    assert base * 4 * V_gt / V_a**2 == pytest.approx(analytic.ds_f(w, P, bias), rel=1e-13)


def test_response_rejects_sub_threshold():
    with pytest.raises(ValueError):
        analytic.ds_response(1e12, P, BiasPoint.from_swing(P, 0.0), 1e-3)
    with pytest.raises(ValueError):
        analytic.ds_f(-1.0, P, BIAS)


def test_critical_length_examples():
    w = 2 * np.pi * 1.01e12
    Lcr = analytic.critical_length(w, P, BIAS)
    assert Lcr == pytest.approx(1.9e-7, rel=0.03)
    assert P.L / Lcr == pytest.approx(0.47, abs=0.02)
    Lcr_low = analytic.critical_length(w, DeviceParams(mu=0.1), BIAS)
    assert Lcr_low == pytest.approx(64e-9, rel=0.03)
    assert P.L / Lcr_low == pytest.approx(1.4, abs=0.05)


def test_critical_length_high_frequency_limit():
    s = analytic.derive_transport(P, BIAS).s_plasma
    assert analytic.critical_length(1e20, P, BIAS) == pytest.approx(s * P.tau, rel=1e-6)
    with pytest.raises(ValueError):
        analytic.critical_length(0.0, P, BIAS)


def test_regime_classification():
    w = 2 * np.pi * F0
    assert analytic.classify_regime(P, BIAS, w).regime == "strong_resonant"
    assert analytic.classify_regime(DeviceParams(mu=0.1), BIAS, w).regime == "non_resonant"
    assert analytic.classify_regime(P, BIAS, 0.5 / P.tau).regime != "strong_resonant"
    assert analytic.classify_regime(P, BIAS, 0.0).regime == "non_resonant"


def test_regime_marginal_band():
    # omega*tau > 1 with L/L_cr between 0.5 and 1
    p = DeviceParams(L=150e-9)
    rep = analytic.classify_regime(p, BIAS, 2 * np.pi * 1.5e12)
    assert rep.omega_tau > 1 and 0.5 <= rep.ratio <= 1
    assert rep.regime == "marginal"


def test_sweep_curve():
    curve = analytic.analytic_sweep(P, BIAS, 1.5e-3, [0.5e12, 1e12, 2e12])
    assert curve.method == "analytic"
    assert len(curve) == 3 and np.all(np.isfinite(curve.delta_u))
