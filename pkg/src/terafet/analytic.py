"""Closed-form small-signal rectified response of a gated plasma-wave cavity.

The channel is driven at the source with ``V_a*cos(omega*t)`` on top of the
gate swing and left open at the drain.  The rectified drain voltage is

    dU = V_a**2 * f(omega) / (4*V_gt)

with the dimensionless response function ``f`` evaluated in ``ds_f``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import BiasPoint, DeviceParams, derive_transport

REGIMES = ("strong_resonant", "marginal", "non_resonant")


def _wavenumber(omega, tau, s):
    """Complex wavenumber k' + i k'' with both parts non-negative."""
    k = np.sqrt(omega * (omega + 1j / tau) + 0j) / s
    return np.abs(k.real) + 1j * np.abs(k.imag)


def ds_f(omega, params: DeviceParams, bias: BiasPoint):
    """Dimensionless response function f(omega); accepts scalar or array omega."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be non-negative")
    tau, s, _ = derive_transport(params, bias)
    k = _wavenumber(omega, tau, s)
    kr, ki = k.real * params.L, k.imag * params.L
    wt = omega * tau
    beta = 2 * wt / np.sqrt(1 + wt**2)
    # cos^2 + sinh^2 = (cosh(2k''L) + cos(2k'L))/2 avoids the overflow of sinh^2
    # for long channels; divide through by cosh to stay finite.
    ch = np.cosh(np.minimum(2 * ki, 700.0))
    denom = 0.5 * (ch + np.cos(2 * kr))
    f = 1 + beta - (1 + beta * np.cos(2 * kr)) / denom
    return float(f) if f.ndim == 0 else f


def ds_response(omega, params: DeviceParams, bias: BiasPoint, V_a):
    """Rectified drain voltage (V) for drive amplitude V_a."""
    V_gt = bias.V_gs - params.V_T0
    if V_gt <= 0:
        raise ValueError(f"response undefined below threshold (V_gt = {V_gt:g} V)")
    return np.asarray(V_a, float) ** 2 * ds_f(omega, params, bias) / (4 * V_gt)


def resonance_frequency(params: DeviceParams, bias: BiasPoint) -> float:
    """Quarter-wave fundamental s/(4L) of the open-drain cavity (Hz)."""
    return derive_transport(params, bias).s_plasma / (4 * params.L)


def critical_length(omega, params: DeviceParams, bias: BiasPoint):
    """Travel distance of a plasma wave before it decays, s*tau*sqrt(1 + 1/(omega*tau))."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("critical length diverges at omega = 0")
    tau, s, _ = derive_transport(params, bias)
    out = s * tau * np.sqrt(1 + 1 / (omega * tau))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegimeReport:
    omega_tau: float
    L_cr: float
    ratio: float
    regime: str


def classify_regime(params: DeviceParams, bias: BiasPoint, omega: float) -> RegimeReport:
    """Strong resonance needs omega*tau > 1 and a channel under half the critical length."""
    wt = float(omega * params.tau)
    if omega <= 0:
        return RegimeReport(0.0, float("inf"), 0.0, "non_resonant")
    L_cr = critical_length(omega, params, bias)
    ratio = params.L / L_cr
    if wt > 1 and ratio < 0.5:
        regime = "strong_resonant"
    elif wt < 1 or ratio > 1:
        regime = "non_resonant"
    else:
        regime = "marginal"
    return RegimeReport(wt, float(L_cr), float(ratio), regime)


def analytic_sweep(params: DeviceParams, bias: BiasPoint, V_a: float, freqs):
    """ResponseCurve of the closed form on a frequency grid (Hz)."""
    from .results import ResponseCurve

    freqs = np.asarray(freqs, float)
    values = ds_response(2 * np.pi * freqs, params, bias, V_a)
    return ResponseCurve(freqs, np.atleast_1d(values), "analytic")
