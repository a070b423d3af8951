"""Closed-form rectified response and regime classification for the six presets."""

import numpy as np

from terafet import analytic
from terafet.acceptance import analytic_peak_frequency
from terafet.harness import PRESETS, load_preset

for name in PRESETS:
    if name == "fig2":
        continue
    s = load_preset(name)
    f0 = s.resonance
    rep = analytic.classify_regime(s.params, s.bias, 2 * np.pi * f0)
    fp = analytic_peak_frequency(s.params, s.bias)
    peak = analytic.ds_response(2 * np.pi * fp, s.params, s.bias, s.V_a)
    print(f"{name}: L = {s.params.L * 1e9:.0f} nm, mu = {s.params.mu} m^2/Vs, "
          f"f0 = {f0 / 1e12:.3f} THz, first peak {fp / 1e12:.3f} THz ({peak * 1e6:.2f} uV), "
          f"omega*tau = {rep.omega_tau:.2f}, L/L_cr = {rep.ratio:.2f} -> {rep.regime}")
