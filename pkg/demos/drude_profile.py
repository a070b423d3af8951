"""Per-segment change of the Drude inductance under THz drive (fig5a resonance)."""

import numpy as np

from terafet import engine
from terafet.harness import circuit_point, load_preset

s = load_preset("fig5a")
value, flag, waves, circ = circuit_point(s, s.resonance, "varying")
mean, ptp = engine.drude_profile(waves, circ)
x = (np.arange(circ.N_seg) + 0.5) / circ.N_seg
print("x/L     cycle-mean dL (fH)   peak-to-peak L (fH)")
for i in range(0, circ.N_seg, 5):
    print(f"{x[i]:5.2f}   {mean[i] * 1e15:18.3f}   {ptp[i] * 1e15:19.2f}")
print(f"max/min |mean dL| over segments: {np.abs(mean).max() / np.abs(mean).min():.1f}")
