"""Result containers shared by the circuit engine, the hydrodynamic solver
and the closed-form reference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METHODS = ("analytic", "hydro", "circuit_varying", "circuit_uniform")


@dataclass
class ResponseCurve:
    """Rectified response versus excitation frequency.

    ``flags[i]`` is ``"ok"`` for a clean point; anything else marks a point
    whose value is unreliable (``nosettle``) or missing (value is NaN).
    """

    frequencies: np.ndarray
    delta_u: np.ndarray
    method: str
    flags: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.delta_u = np.asarray(self.delta_u, dtype=float)
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.frequencies.shape != self.delta_u.shape:
            raise ValueError("frequency grid and values differ in length")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if not self.flags:
            self.flags = ["ok" if np.isfinite(v) else "error" for v in self.delta_u]
        if len(self.flags) != len(self.delta_u):
            raise ValueError("one flag per grid point required")

    def __len__(self):
        return len(self.frequencies)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.delta_u)

    def first_peak(self) -> tuple[float, float]:
        """(frequency, value) of the first interior local maximum.

        The location is refined with a parabola through the three samples
        around the discrete maximum.  Falls back to the global maximum when
        the curve has no interior peak.
        """
        y = self.delta_u
        f = self.frequencies
        idx = None
        for i in range(1, len(y) - 1):
            if np.isfinite(y[i - 1:i + 2]).all() and y[i] >= y[i - 1] and y[i] > y[i + 1]:
                idx = i
                break
        if idx is None:
            i = int(np.nanargmax(y))
            return float(f[i]), float(y[i])
        x0, x1, x2 = f[idx - 1:idx + 2]
        y0, y1, y2 = y[idx - 1:idx + 2]
        coeff = np.polyfit([x0 - x1, 0.0, x2 - x1], [y0, y1, y2], 2)
        if coeff[0] >= 0:
            return float(x1), float(y1)
        dx = -coeff[1] / (2 * coeff[0])
        return float(x1 + dx), float(np.polyval(coeff, dx))


@dataclass
class ChannelProfile:
    """Drift velocity and sheet density along the channel over one cycle.

    ``v`` and ``n`` have shape (len(t), len(x)).  Velocity is the electron
    drift velocity, positive from source to drain.
    """

    x: np.ndarray
    t: np.ndarray
    v: np.ndarray
    n: np.ndarray
    method: str = ""

    def envelope(self) -> np.ndarray:
        """max over time of |v| at each position."""
        return np.max(np.abs(self.v), axis=0)
