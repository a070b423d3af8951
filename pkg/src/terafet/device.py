"""Device parameters, the unified charge-control core and Drude-inductance laws.

Every function here is a pure function of its inputs and accepts numpy arrays
wherever a voltage is expected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import constants
from scipy.special import spence

log = logging.getLogger(__name__)

Q_E = constants.e
M_E = constants.m_e
K_B = constants.k

#: Conductance floor below which the Drude inductance is clamped (S).
G_FLOOR = 1e-12

# Gauss-Legendre order of the quadrature path of ``channel_current``.
_GL_ORDER = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


@dataclass(frozen=True)
class DeviceParams:
    """Geometry, transport and gate-stack parameters of one TeraFET.

    Series resistances default to 10 Ohm*um divided by the width and the
    external gate capacitances to a tenth of the total gate capacitance.
    Pass explicit zeros to build the intrinsic device.
    """

    L: float = 90e-9
    W: float = 1e-6
    mu: float = 0.4
    m_eff: float = 0.2 * M_E
    c_ox: float = 1e-2
    V_T0: float = 0.3
    eta: float = 1.0
    T: float = 300.0
    N_seg: int = 50
    R_s: float | None = None
    R_d: float | None = None
    C_gs_ext: float | None = None
    C_gd_ext: float | None = None

    def __post_init__(self):
        for name in ("L", "W", "mu", "m_eff", "c_ox", "T", "eta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta!r}")
        if int(self.N_seg) != self.N_seg or self.N_seg < 1:
            raise ValueError(f"N_seg must be an integer >= 1, got {self.N_seg!r}")
        object.__setattr__(self, "N_seg", int(self.N_seg))
        defaults = {
            "R_s": 10e-6 / self.W,
            "R_d": 10e-6 / self.W,
            "C_gs_ext": 0.1 * self.gate_capacitance,
            "C_gd_ext": 0.1 * self.gate_capacitance,
        }
        for name, default in defaults.items():
            value = getattr(self, name)
            if value is None:
                object.__setattr__(self, name, default)
            elif not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")

    @property
    def tau(self) -> float:
        """Momentum relaxation time m*mu/q (s)."""
        return self.m_eff * self.mu / Q_E

    @property
    def V_therm(self) -> float:
        return K_B * self.T / Q_E

    @property
    def seg_len(self) -> float:
        return self.L / self.N_seg

    @property
    def gate_capacitance(self) -> float:
        """Total oxide capacitance c_ox*W*L (F)."""
        return self.c_ox * self.W * self.L

    def intrinsic(self) -> "DeviceParams":
        """Copy with all parasitic resistances and capacitances set to zero."""
        return replace(self, R_s=0.0, R_d=0.0, C_gs_ext=0.0, C_gd_ext=0.0)


@dataclass(frozen=True)
class BiasPoint:
    V_gs: float
    V_ds: float = 0.0
    V_T0: float = field(default=0.0, repr=False)

    @property
    def V_gt(self) -> float:
        return self.V_gs - self.V_T0

    @classmethod
    def from_swing(cls, params: DeviceParams, V_gt: float, V_ds: float = 0.0):
        return cls(V_gs=params.V_T0 + V_gt, V_ds=V_ds, V_T0=params.V_T0)


@dataclass(frozen=True)
class Excitation:
    """Sinusoidal THz drive ``V_a*cos(omega*t)`` between gate and source."""

    V_a: float
    f: float
    port: str = "gate_source"

    def __post_init__(self):
        if self.V_a < 0:
            raise ValueError(f"V_a must be >= 0, got {self.V_a!r}")
        if self.f < 0:
            raise ValueError(f"f must be >= 0, got {self.f!r}")
        if self.port != "gate_source":
            raise ValueError(f"unsupported excitation port {self.port!r}")

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.f


class Transport(NamedTuple):
    tau: float
    s_plasma: float
    V_therm: float


def derive_transport(params: DeviceParams, bias: BiasPoint) -> Transport:
    """Relaxation time, plasma-wave velocity sqrt(q*V_gt/m) and thermal voltage."""
    V_gt = bias.V_gs - params.V_T0
    if V_gt <= 0:
        raise ValueError(
            f"plasma velocity undefined below threshold (V_gt = {V_gt:g} V)"
        )
    s = np.sqrt(Q_E * V_gt / params.m_eff)
    return Transport(params.tau, float(s), params.V_therm)


def _softplus_scale(params: DeviceParams) -> tuple[float, float]:
    """(eta*V_therm, eta*c_ox*V_therm/q): argument scale and density prefactor."""
    nvt = params.eta * params.V_therm
    return nvt, params.c_ox * nvt / Q_E


def uccm_density(params: DeviceParams, V_g, V_ch):
    """Sheet electron density (1/m^2) at gate voltage V_g and channel potential V_ch.

    n_s = (eta*c_ox*V_therm/q) * ln(1 + exp((V_g - V_T0 - V_ch)/(eta*V_therm)))
    """
    nvt, n0 = _softplus_scale(params)
    x = (np.asarray(V_g, dtype=float) - params.V_T0 - V_ch) / nvt
    return n0 * np.logaddexp(0.0, x)


def uccm_density_derivs(params: DeviceParams, U):
    """Density and its first two derivatives with respect to the local overdrive.

    ``U = V_g - V_T0 - V_ch`` is the gate-to-channel voltage above threshold.
    Returns ``(n, dn/dU, d2n/dU2)``.
    """
    nvt, n0 = _softplus_scale(params)
    x = np.asarray(U, dtype=float) / nvt
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    n = n0 * np.logaddexp(0.0, x)
    dn = (params.c_ox / Q_E) * sig
    d2n = (params.c_ox / Q_E) * sig * (1.0 - sig) / nvt
    return n, dn, d2n


def _softplus_integral(x):
    """Antiderivative of ln(1+e^x) vanishing at -inf, i.e. -Li2(-e^x)."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.reshape(-1)
    out = np.empty_like(x)
    # spence(1 + e^x) loses relative accuracy once e^x drops below eps**0.5;
    # the alternating series sum (-1)^(k+1) e^(kx)/k^2 is exact there
    deep = x <= -2
    z = np.exp(x[deep])[:, None]
    k = np.arange(1, 31)
    out[deep] = ((-1.0) ** (k + 1) * z**k / k**2).sum(axis=1)
    neg = (x <= 0) & ~deep
    out[neg] = -spence(1.0 + np.exp(x[neg]))
    xp = x[x > 0]
    out[x > 0] = 0.5 * xp * xp + np.pi**2 / 6 + spence(1.0 + np.exp(-xp))
    return out.reshape(shape)


def channel_current(params: DeviceParams, V_g, V_s, V_d, seg_len, method="closed"):
    """Drift current (A) of one channel segment, positive from drain to source.

    I_d = (W*mu*q/seg_len) * integral_{V_s}^{V_d} n_s(V_g, V) dV

    ``method="closed"`` uses the exact dilogarithm antiderivative of the
    softplus law; ``method="quadrature"`` integrates with Gauss-Legendre.
    """
    if np.any(np.asarray(seg_len) <= 0):
        raise ValueError("seg_len must be positive")
    V_g, V_s, V_d = np.broadcast_arrays(
        np.asarray(V_g, float), np.asarray(V_s, float), np.asarray(V_d, float)
    )
    k = params.W * params.mu * Q_E / seg_len
    if method == "closed":
        nvt, n0 = _softplus_scale(params)
        xs = (V_g - params.V_T0 - V_s) / nvt
        xd = (V_g - params.V_T0 - V_d) / nvt
        integral = n0 * nvt * (_softplus_integral(xs) - _softplus_integral(xd))
    elif method == "quadrature":
        half = 0.5 * (V_d - V_s)
        mid = 0.5 * (V_d + V_s)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        dens = uccm_density(params, V_g[..., None], pts)
        integral = half * (dens @ _GL_WEIGHTS)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = k * integral
    return float(out) if out.ndim == 0 else out


def segment_conductance(params: DeviceParams, V_g, V_s_i, V_d_i, seg_len, rule="drain"):
    """Channel conductance of one segment (S).

    ``rule="drain"`` returns dI_d/dV_d at (V_g, V_s_i, V_d_i).  ``rule="symmetric"``
    averages the drain- and source-referred conductances,
    (dI_d/dV_d - dI_d/dV_s)/2, so the value depends on both segment nodes.
    """
    if np.any(np.asarray(seg_len) <= 0):
        raise ValueError("seg_len must be positive")
    k = params.W * params.mu * Q_E / seg_len
    n_d = uccm_density(params, V_g, V_d_i)
    if rule == "drain":
        return k * n_d
    if rule == "symmetric":
        return 0.5 * k * (n_d + uccm_density(params, V_g, V_s_i))
    raise ValueError(f"unknown conductance rule {rule!r}")


def drude_inductance(g_ch, tau, full_output=False):
    """Drude inductance tau/g_ch (H), clamped at tau/G_FLOOR.

    With ``full_output=True`` also returns a boolean (array) that is true
    where the clamp engaged.
    """
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    g = np.asarray(g_ch, dtype=float)
    clamped = ~(g >= G_FLOOR)
    if np.any(clamped):
        log.warning(
            "channel conductance below %.1e S in %d place(s); Drude inductance clamped",
            G_FLOOR, int(np.count_nonzero(clamped)),
        )
    L = tau / np.where(clamped, G_FLOOR, g)
    if L.ndim == 0:
        L, clamped = float(L), bool(clamped)
    return (L, clamped) if full_output else L


def delta_drude(L_drude, L_drude0):
    """Change of the Drude inductance relative to the no-radiation value."""
    return np.asarray(L_drude, dtype=float) - L_drude0


def segment_charge(params: DeviceParams, V_g, V_node, seg_len):
    """Gate-channel charge magnitude q*W*seg_len*n_s (C) of a channel slice."""
    if np.any(np.asarray(seg_len) <= 0):
        raise ValueError("seg_len must be positive")
    return Q_E * params.W * seg_len * uccm_density(params, V_g, V_node)


def segment_capacitance(params: DeviceParams, V_g, V_node, seg_len):
    """dQ/dV_g = -dQ/dV_node of ``segment_charge`` (F)."""
    _, dn, _ = uccm_density_derivs(params, np.asarray(V_g, float) - params.V_T0 - V_node)
    return Q_E * params.W * seg_len * dn
