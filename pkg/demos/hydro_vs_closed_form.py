"""Hydrodynamic solver against the closed form on a coarse fig5a grid."""

import numpy as np

from terafet import analytic, hydro
from terafet.harness import load_preset

s = load_preset("fig5a")
freqs = np.linspace(0.4e12, 2.0e12, 9)
curve = hydro.hydro_response_sweep(s.params, s.bias, s.V_a, freqs, s.hydro)
ref = analytic.ds_response(2 * np.pi * freqs, s.params, s.bias, s.V_a)
print("f (THz)   hydro (uV)   closed form (uV)   ratio")
for f, h, a in zip(freqs, curve.delta_u, ref):
    print(f"{f / 1e12:7.3f}   {h * 1e6:10.4f}   {a * 1e6:16.4f}   {h / a:6.4f}")
