"""Effect of the dynamic law chosen for the bias-dependent inductor.

The three laws agree for a constant inductance but differ at second order in
the modulation depth, which is exactly the order of the rectified signal.
"""

from terafet import analytic, engine
from terafet.circuit import build_segmented
from terafet.device import BiasPoint, DeviceParams, Excitation

p = DeviceParams(N_seg=20).intrinsic()
bias = BiasPoint.from_swing(p, 0.15)
f = analytic.resonance_frequency(p, bias)
circ = build_segmented(p, bias, Excitation(0.0015, f))
ref = analytic.ds_response(2 * 3.141592653589793 * f, p, bias, 0.0015)
print(f"closed form: {ref * 1e6:.3f} uV")
for law in engine.INDUCTOR_LAWS:
    w = engine.transient(circ, config=engine.SolverConfig(inductor_law=law))
    print(f"{law:11s} {engine.extract_dc_response(w).value * 1e6:8.3f} uV")
