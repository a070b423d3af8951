"""One transient of the 50-segment circuit at the fig5a resonance.

Prints the rectified response of both inductance models, the settling
history and the standing-wave velocity envelope along the channel.
"""

from terafet import engine
from terafet.harness import circuit_point, load_preset

s = load_preset("fig5a")
f = s.resonance
for mode in ("varying", "uniform"):
    value, flag, waves, circ = circuit_point(s, f, mode)
    print(f"{mode:8s} dU = {value * 1e6:.3f} uV after {waves.cycles_run} cycles ({flag})")
    if mode == "varying":
        env = engine.extract_profiles(waves, circ).envelope()
        stride = max(len(env) // 10, 1)
        print("  velocity envelope (m/s), source to drain:",
              " ".join(f"{v:.0f}" for v in env[::stride]))
