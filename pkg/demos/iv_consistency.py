"""DC I-V of the segmented circuit: one segment versus fifty."""

from dataclasses import replace

import numpy as np

from terafet import engine
from terafet.device import DeviceParams

p = DeviceParams().intrinsic()
vg = np.array([0.35, 0.45, 0.6])
vd = np.linspace(0.0, 0.5, 6)
_, _, I1 = engine.iv_sweep(replace(p, N_seg=1), vg, vd)
_, _, I50 = engine.iv_sweep(replace(p, N_seg=50), vg, vd)
for i, g in enumerate(vg):
    print(f"V_gs = {g:.2f} V: " + " ".join(f"{v * 1e6:8.2f}" for v in I50[i]) + "  uA")
nz = I50 != 0
print(f"max relative N=1 vs N=50 difference: {np.max(np.abs(I1[nz] / I50[nz] - 1)):.1e}")
