"""One-dimensional hydrodynamic electron-fluid solver for the gated channel.

Solves, in conservative form,

    dU/dt + d(U*v)/dx = 0
    dv/dt + d(v**2/2 + (q/m)*U)/dx = -v/tau

on ``x in [0, L]`` with a driven source ``U(0, t) = V_gt + V_a*cos(omega*t)``
and an open drain ``v(L, t) = 0``.  Interior points use MacCormack (or
two-step Lax-Wendroff); friction is split off and integrated exactly; both
boundaries are closed with the Riemann invariants ``v +- 2c``, ``c = sqrt(qU/m)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .device import Q_E, BiasPoint, DeviceParams, Excitation, derive_transport
from .results import ChannelProfile, ResponseCurve

SCHEMES = ("maccormack", "lax_wendroff")


class CFLViolation(RuntimeError):
    """Stable time step collapsed or the fixed step exceeded the stability limit."""


class ThresholdCrossing(RuntimeError):
    """The fluid depleted (U <= 0) somewhere in the channel."""


class NoSettle(UserWarning):
    """Cycle-averaged drain response still drifting at ``max_cycles``."""


@dataclass(frozen=True)
class HydroConfig:
    M: int = 201
    cfl: float = 0.5
    max_cycles: int = 300
    scheme: str = "maccormack"
    settle_tol: float = 1e-3
    min_cycles: int = 8
    samples_per_cycle: int = 100

    def __post_init__(self):
        if self.M < 51:
            raise ValueError("M must be >= 51")
        if not 0 < self.cfl < 1:
            raise ValueError("CFL factor must lie in (0, 1)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.max_cycles < 1 or self.min_cycles < 4 or self.samples_per_cycle < 1:
            raise ValueError("cycle counts must be positive (min_cycles >= 4)")
        if not self.settle_tol > 0:
            raise ValueError("settle_tol must be positive")


@dataclass
class HydroState:
    """Fluid state on the uniform grid ``x`` at time ``t``."""

    x: np.ndarray
    U: np.ndarray
    v: np.ndarray
    m_eff: float
    t: float = 0.0

    def validate(self):
        if not (np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.v))):
            raise FloatingPointError("non-finite hydrodynamic state")
        if np.any(self.U <= 0):
            i = int(np.argmin(self.U))
            raise ThresholdCrossing(
                f"U = {self.U[i]:.3g} V <= 0 at x = {self.x[i]:.3g} m, t = {self.t:.3g} s")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def sound_speed(self):
        return np.sqrt(Q_E * np.maximum(self.U, 0.0) / self.m_eff)


def cfl_dt(state: HydroState, config: HydroConfig) -> float:
    """Largest stable explicit step times the CFL safety factor."""
    state.validate()
    speed = float(np.max(np.abs(state.v) + state.sound_speed()))
    dt = config.cfl * state.dx / speed
    if not dt > 1e-24:
        raise CFLViolation(f"time step underflow (dt = {dt:g} s)")
    return dt


def equilibrium(params: DeviceParams, V_gt: float, M: int) -> HydroState:
    x = np.linspace(0.0, params.L, M)
    return HydroState(x, np.full(M, float(V_gt)), np.zeros(M), params.m_eff)


def linear_standing_wave(params: DeviceParams, V_gt: float, V_a: float, omega: float,
                         x, t: float = 0.0):
    """Small-signal periodic solution (U, v) of the driven open-drain channel."""
    U0 = np.full_like(np.asarray(x, float), V_gt)
    if V_a == 0 or omega == 0:
        return U0, np.zeros_like(U0)
    tau = params.tau
    s = math.sqrt(Q_E * V_gt / params.m_eff)
    k = np.sqrt(omega * (omega + 1j / tau) + 0j) / s
    L = params.L
    phase = np.exp(1j * omega * t)
    dU = V_a * np.cos(k * (L - x)) / np.cos(k * L) * phase
    v = 1j * omega * V_a / (V_gt * k) * np.sin(k * (L - x)) / np.cos(k * L) * phase
    return U0 + dU.real, v.real


class _Stepper:
    """Advances a state by one fixed step with the chosen interior scheme."""

    def __init__(self, params: DeviceParams, dx: float, dt: float, scheme: str):
        self.qm = Q_E / params.m_eff
        self.tau = params.tau
        self.r = dt / dx
        self.dt = dt
        self.dx = dx
        self.half_decay = math.exp(-0.5 * dt / params.tau)
        self.scheme = scheme
        self.flip = False

    def _flux(self, U, v):
        return U * v, 0.5 * v * v + self.qm * U

    def interior(self, U, v):
        """Return (U, v) with interior points advanced; boundary entries untouched."""
        r = self.r
        F1, F2 = self._flux(U, v)
        Un, vn = U.copy(), v.copy()
        if self.scheme == "maccormack":
            # alternate the one-sided directions to cancel their bias
            if self.flip:
                Up = U[1:] - r * (F1[1:] - F1[:-1])
                vp = v[1:] - r * (F2[1:] - F2[:-1])
                G1, G2 = self._flux(Up, vp)
                Un[1:-1] = 0.5 * (U[1:-1] + Up[:-1] - r * (G1[1:] - G1[:-1]))
                vn[1:-1] = 0.5 * (v[1:-1] + vp[:-1] - r * (G2[1:] - G2[:-1]))
            else:
                Up = U[:-1] - r * (F1[1:] - F1[:-1])
                vp = v[:-1] - r * (F2[1:] - F2[:-1])
                G1, G2 = self._flux(Up, vp)
                Un[1:-1] = 0.5 * (U[1:-1] + Up[1:] - r * (G1[1:] - G1[:-1]))
                vn[1:-1] = 0.5 * (v[1:-1] + vp[1:] - r * (G2[1:] - G2[:-1]))
            self.flip = not self.flip
        else:
            Uh = 0.5 * (U[1:] + U[:-1]) - 0.5 * r * (F1[1:] - F1[:-1])
            vh = 0.5 * (v[1:] + v[:-1]) - 0.5 * r * (F2[1:] - F2[:-1])
            G1, G2 = self._flux(Uh, vh)
            Un[1:-1] = U[1:-1] - r * (G1[1:] - G1[:-1])
            vn[1:-1] = v[1:-1] - r * (G2[1:] - G2[:-1])
        return Un, vn

    def _foot(self, U, v, i, j, dist):
        """Linear interpolation of (U, v) a distance ``dist`` from node i toward node j."""
        w = dist / self.dx
        Uf = U[i] + w * (U[j] - U[i])
        vf = v[i] + w * (v[j] - v[i])
        return Uf, vf

    def driven_left(self, U, v, U_new_left):
        """Source node: U prescribed, v from the left-running invariant v - 2c."""
        c0 = math.sqrt(self.qm * U[0])
        lam = v[0] - c0
        Uf, vf = self._foot(U, v, 0, 1, -lam * self.dt)
        cf = math.sqrt(self.qm * Uf)
        c_new = math.sqrt(self.qm * U_new_left)
        return vf + 2.0 * (c_new - cf) - self.dt * vf / self.tau

    def closed_left(self, U, v):
        """Reflecting source node (v = 0): U from the left-running invariant."""
        c0 = math.sqrt(self.qm * U[0])
        lam = v[0] - c0
        Uf, vf = self._foot(U, v, 0, 1, -lam * self.dt)
        cf = math.sqrt(self.qm * Uf)
        c_new = cf - 0.5 * (vf - self.dt * vf / self.tau)
        return Uf * (c_new / cf) ** 2

    def closed_right(self, U, v):
        """Open-drain node (v = 0): U from the right-running invariant v + 2c."""
        n = len(U) - 1
        cN = math.sqrt(self.qm * U[n])
        lam = v[n] + cN
        Uf, vf = self._foot(U, v, n, n - 1, lam * self.dt)
        cf = math.sqrt(self.qm * Uf)
        c_new = cf + 0.5 * (vf - self.dt * vf / self.tau)
        # written as a ratio so that equilibrium is reproduced bit for bit
        return Uf * (c_new / cf) ** 2

    def step(self, U, v, left=None):
        """One Strang-split step.  ``left`` is the new source voltage or None (reflecting)."""
        v_half = v * self.half_decay
        Un, vn = self.interior(U, v_half)
        vn *= self.half_decay
        if left is None:
            Un[0] = self.closed_left(U, v)
            vn[0] = 0.0
        else:
            Un[0] = left
            vn[0] = self.driven_left(U, v, left)
        Un[-1] = self.closed_right(U, v)
        vn[-1] = 0.0
        return Un, vn


def evolve(params: DeviceParams, state: HydroState, dt: float, n_steps: int,
           config: HydroConfig | None = None, left=None, callback=None) -> HydroState:
    """Advance ``state`` by ``n_steps`` fixed steps.

    ``left`` is a function of time giving the source voltage, or None for a
    reflecting source end.  ``callback(step, state)`` runs after each step.
    """
    config = config or HydroConfig(M=len(state.x))
    st = _Stepper(params, state.dx, dt, config.scheme)
    U, v, t = state.U.copy(), state.v.copy(), state.t
    for n in range(1, n_steps + 1):
        t_new = state.t + n * dt
        U, v = st.step(U, v, None if left is None else left(t_new))
        t = t_new
        if callback is not None:
            callback(n, HydroState(state.x, U, v, state.m_eff, t))
    out = HydroState(state.x, U, v, state.m_eff, t)
    out.validate()
    return out


@dataclass
class HydroResult:
    delta_u: float
    profile: ChannelProfile
    cycles_run: int
    settled: bool
    dt: float
    cycle_means: np.ndarray


def solve_hydro(params: DeviceParams, bias: BiasPoint, exc: Excitation,
                config: HydroConfig | None = None) -> HydroResult:
    """Drive the channel until the cycle-averaged drain voltage settles.

    The run starts from the small-signal periodic solution, so only the
    second-order transient has to decay.  ``delta_u`` is the mean drain
    overdrive over the last four cycles minus V_gt.
    """
    config = config or HydroConfig()
    V_gt = bias.V_gs - params.V_T0
    derive_transport(params, bias)
    if exc.V_a > 0.2 * V_gt:
        raise ValueError(f"V_a = {exc.V_a:g} V exceeds 0.2*V_gt; fluid may deplete")
    if not exc.f > 0:
        raise ValueError("hydrodynamic drive needs a positive frequency")
    state = equilibrium(params, V_gt, config.M)
    omega = exc.omega
    state.U, state.v = linear_standing_wave(params, V_gt, exc.V_a, omega, state.x)
    period = 1.0 / exc.f

    # bound the wave speed by the peak drive so the fixed step stays stable
    probe = HydroState(state.x, np.full(config.M, V_gt + 2 * exc.V_a),
                       np.abs(state.v), params.m_eff)
    dt_max = cfl_dt(probe, config)
    steps = max(int(math.ceil(period / dt_max)), config.samples_per_cycle)
    dt = period / steps
    stride = max(steps // config.samples_per_cycle, 1)
    st = _Stepper(params, state.dx, dt, config.scheme)
    limit = state.dx / dt

    U, v = state.U, state.v
    means = []
    settled = False
    prof_t, prof_U, prof_v = [], [], []
    for cycle in range(config.max_cycles):
        acc = 0.0
        record = []
        for j in range(1, steps + 1):
            t = (cycle * steps + j) * dt
            U, v = st.step(U, v, V_gt + exc.V_a * math.cos(omega * t))
            acc += U[-1] - V_gt
            if j % stride == 0:
                record.append((t, U, v))
        check = HydroState(state.x, U, v, params.m_eff, t)
        check.validate()
        if float(np.max(np.abs(v) + check.sound_speed())) >= limit:
            raise CFLViolation(f"Courant number exceeded 1 at t = {t:.3g} s")
        means.append(acc / steps)
        prof_t, prof_U, prof_v = zip(*record)
        if cycle + 1 >= config.min_cycles:
            tail = np.array(means[-4:])
            if np.ptp(tail) <= config.settle_tol * abs(tail.mean()):
                settled = True
                break
    if not settled:
        warnings.warn(f"hydrodynamic run did not settle within {config.max_cycles} cycles "
                      f"at f = {exc.f:g} Hz", NoSettle, stacklevel=2)
    U_t = np.array(prof_U)
    profile = ChannelProfile(
        x=state.x.copy(), t=np.array(prof_t), v=np.array(prof_v),
        n=params.c_ox * U_t / Q_E, method="hydro",
    )
    return HydroResult(float(np.mean(means[-4:])), profile, cycle + 1, settled, dt,
                       np.array(means))


def hydro_response_sweep(params: DeviceParams, bias: BiasPoint, V_a: float, freqs,
                         config: HydroConfig | None = None) -> ResponseCurve:
    """One ``solve_hydro`` per frequency; failures become NaN with a flag."""
    freqs = np.asarray(freqs, float)
    values, flags = [], []
    for f in freqs:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NoSettle)
                res = solve_hydro(params, bias, Excitation(V_a, float(f)), config)
            values.append(res.delta_u)
            flags.append("ok" if res.settled else "nosettle")
        except (ThresholdCrossing, CFLViolation, FloatingPointError, ValueError) as exc:
            values.append(np.nan)
            flags.append(type(exc).__name__.lower())
    return ResponseCurve(freqs, np.array(values), "hydro", flags)
