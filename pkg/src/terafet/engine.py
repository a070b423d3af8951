"""Modified nodal analysis engine for the segmented TeraFET circuit.

The circuit is written as the DAE ``d/dt q(x) + f(x, t) = 0`` over the
unknowns ``x = [node voltages, source currents, inductor currents]``.  Both
``q`` and ``f`` come with analytic Jacobians.  Time stepping uses the usual
companion form ``a*(q(x) - q_n) - b*qdot_n + f(x) = 0`` with ``(a, b)`` equal
to ``(2/h, 1)`` for the trapezoidal rule and ``(1/h, 0)`` for backward Euler.

Drude inductors support three dynamic laws.  ``SolverConfig.inductor_law``
applies to circuits with per-segment inductances and
``SolverConfig.uniform_inductor_law`` (default ``flux``) to the uniform
baseline, where every inductor hangs off the two channel end nodes and the
kinetic potentials would all land on those two nodes:

``lagrangian``
    ``v = d(L*i)/dt - (phi_to - phi_from)`` where ``phi_j = dT/dQ_j`` is the
    derivative of the stored kinetic energy ``T = sum(L_k*i_k**2)/2`` with
    respect to the charge on node j.  This is the energy-conserving law for
    an inductance that depends on node charges.
``flux``
    ``v = d(L*i)/dt``.
``inductance``
    ``v = L*di/dt``.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .circuit import GROUND, BoundaryCondition, SegmentedCircuit, build_segmented
from .device import (
    G_FLOOR,
    Q_E,
    BiasPoint,
    DeviceParams,
    Excitation,
    _softplus_integral,
    _softplus_scale,
    drude_inductance,
    segment_conductance,
    uccm_density,
    uccm_density_derivs,
)
from .results import ChannelProfile

log = logging.getLogger(__name__)

INDUCTOR_LAWS = ("lagrangian", "flux", "inductance")
INTEGRATORS = ("trapezoidal", "backward_euler")


class NonConvergence(RuntimeError):
    """Newton iteration failed.  ``trace`` holds the residual norm per iteration."""

    def __init__(self, message, residual=None, trace=(), time_index=None):
        super().__init__(message)
        self.residual = residual
        self.trace = list(trace)
        self.time_index = time_index


class NoSettle(UserWarning):
    """Transient reached ``max_cycles`` before the cycle average settled."""


@dataclass(frozen=True)
class SolverConfig:
    steps_per_cycle: int = 200
    max_cycles: int = 400
    settle_tol: float = 1e-3
    newton_tol_v: float = 1e-9
    newton_tol_i: float = 1e-12
    newton_max_iter: int = 50
    integrator: str = "trapezoidal"
    inductor_law: str = "lagrangian"
    uniform_inductor_law: str = "flux"
    min_cycles: int = 8
    keep_cycles: int = 8
    startup_be_steps: int = 0
    start: str = "phasor"

    def __post_init__(self):
        if self.steps_per_cycle < 50:
            raise ValueError("steps_per_cycle must be >= 50")
        for name in ("max_cycles", "settle_tol", "newton_tol_v", "newton_tol_i",
                     "newton_max_iter", "min_cycles", "keep_cycles"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.keep_cycles < 8:
            raise ValueError("keep_cycles must be >= 8")
        if self.min_cycles < 4:
            raise ValueError("min_cycles must be >= 4")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.start not in ("phasor", "static"):
            raise ValueError(f"unknown start {self.start!r}")
        for name in ("inductor_law", "uniform_inductor_law"):
            if getattr(self, name) not in INDUCTOR_LAWS:
                raise ValueError(f"unknown {name} {getattr(self, name)!r}")

    def law_for(self, circuit) -> str:
        """Inductor law used for ``circuit`` (depends on its inductance mode)."""
        if getattr(circuit, "inductance_mode", "varying") == "uniform":
            return self.uniform_inductor_law
        return self.inductor_law


def _idx(index, names):
    return np.array([index[n] for n in names], dtype=int)


@dataclass(frozen=True)
class Triplets:
    """Square sparse matrix in coordinate form (duplicates are summed)."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    size: int

    def matvec(self, v):
        return np.bincount(self.rows, self.vals * v[self.cols], minlength=self.size)

    def dense(self):
        n = self.size
        return np.bincount(self.rows * n + self.cols, self.vals,
                           minlength=n * n).reshape(n, n)


class MNASystem:
    """Compiled, vectorised form of a ``SegmentedCircuit``."""

    def __init__(self, circuit: SegmentedCircuit, law: str = "lagrangian"):
        if law not in INDUCTOR_LAWS:
            raise ValueError(f"unknown inductor law {law!r}")
        self.circuit = circuit
        self.law = law
        self.params = p = circuit.params
        self.node_names = list(circuit.nodes)
        nn = len(self.node_names)
        sources = [el for el in circuit.elements
                   if el.kind in ("voltage_source", "current_probe")]
        inductors = circuit.of_kind("drude_inductor")
        self.n_nodes = nn
        self.branch_names = [el.name for el in sources] + [el.name for el in inductors]
        self.size = nn + len(self.branch_names)
        gnd = self.size
        index = {name: i for i, name in enumerate(self.node_names)}
        index[GROUND] = gnd
        self.index = index
        self.branch_index = {name: nn + i for i, name in enumerate(self.branch_names)}

        def pick(kind):
            return circuit.of_kind(kind)

        res = pick("resistor")
        self.r_a = _idx(index, [e.nodes[0] for e in res])
        self.r_b = _idx(index, [e.nodes[1] for e in res])
        self.r_g = np.array([1.0 / e.params["R"] for e in res])

        caps = pick("linear_capacitor")
        self.c_a = _idx(index, [e.nodes[0] for e in caps])
        self.c_b = _idx(index, [e.nodes[1] for e in caps])
        self.c_C = np.array([e.params["C"] for e in caps])

        self.v_p = _idx(index, [e.nodes[0] for e in sources])
        self.v_n = _idx(index, [e.nodes[1] for e in sources])
        self.v_k = nn + np.arange(len(sources))
        self.v_dc = np.array([e.params.get("dc", 0.0) for e in sources])
        self.v_amp = np.array([e.params.get("amplitude", 0.0) for e in sources])
        self.v_omega = np.array([e.params.get("omega", 0.0) for e in sources])

        charges = pick("nonlinear_charge")
        self.q_g = _idx(index, [e.nodes[0] for e in charges])
        self.q_n = _idx(index, [e.nodes[1] for e in charges])
        self.q_w = Q_E * p.W * np.array([e.params["seg_len"] for e in charges])

        chans = pick("channel")
        self.m_g = _idx(index, [e.nodes[0] for e in chans])
        self.m_s = _idx(index, [e.nodes[1] for e in chans])
        self.m_d = _idx(index, [e.nodes[2] for e in chans])
        self.m_K = p.W * p.mu * Q_E / np.array([e.params["seg_len"] for e in chans])

        self.l_p = _idx(index, [e.nodes[0] for e in inductors])
        self.l_n = _idx(index, [e.nodes[1] for e in inductors])
        self.l_k = nn + len(sources) + np.arange(len(inductors))
        const = [e for e in inductors if "L" in e.params]
        if const and len(const) != len(inductors):
            raise ValueError("mixing constant and Drude inductors is not supported")
        self.l_const = bool(const)
        if self.l_const:
            self.l_L = np.array([e.params["L"] for e in inductors])
        else:
            self.l_g = _idx(index, [e.params["gate"] for e in inductors])
            self.l_a = _idx(index, [e.params["ctrl"][0] for e in inductors])
            self.l_b = _idx(index, [e.params["ctrl"][1] for e in inductors])
            self.l_from = _idx(index, [e.params["path"][0] for e in inductors])
            self.l_to = _idx(index, [e.params["path"][1] for e in inductors])
            self.l_Kg = p.W * p.mu * Q_E / np.array([e.params["eval_len"] for e in inductors])
            self.l_div = np.array([float(e.params["divisor"]) for e in inductors])
            rules = [e.params["rule"] for e in inductors]
            self.l_wa = np.array([0.5 if r == "symmetric" else 0.0 for r in rules])
            self.l_wb = np.array([0.5 if r == "symmetric" else 1.0 for r in rules])
        n_ind = len(inductors)
        self.n_ind = n_ind
        self.is_node_row = np.zeros(self.size, dtype=bool)
        self.is_node_row[:nn] = True
        # converts residual rows to V / A for the convergence test; the
        # inductance law writes its branch rows in A/s
        self.row_scale = np.ones(self.size)
        self._patterns()

    # -- helpers -----------------------------------------------------------

    def _ext(self, x):
        return np.append(x, 0.0)

    def source_values(self, t, dc=False, scale=1.0):
        e = self.v_dc.copy()
        if not dc:
            e = e + self.v_amp * np.cos(self.v_omega * t)
        return scale * e

    def _patterns(self):
        """Pre-computed stamp index arrays; values are filled per evaluation."""
        gnd = self.size
        cat = np.concatenate
        a, b = self.r_a, self.r_b
        self._res_rc = (cat([a, a, b, b]), cat([a, b, a, b]))
        self._res_val = cat([self.r_g, -self.r_g, -self.r_g, self.r_g])
        a, b = self.c_a, self.c_b
        self._cap_rc = (cat([a, a, b, b]), cat([a, b, a, b]))
        self._cap_val = cat([self.c_C, -self.c_C, -self.c_C, self.c_C])
        self.c_lin = np.bincount(cat([a, b]), cat([self.c_C, self.c_C]), minlength=gnd + 1)
        k, p, n = self.v_k, self.v_p, self.v_n
        one = np.ones(len(k))
        self._src_rc = (cat([p, n, k, k]), cat([k, k, p, n]))
        self._src_val = cat([one, -one, one, -one])
        gi = self._gate_col(self.q_g)
        ni = self.q_n
        self._chg_rc = (cat([ni, ni, gi, gi]), cat([ni, gi, ni, gi]))
        gi, si, di = self._gate_col(self.m_g), self.m_s, self.m_d
        self._ch_rc = (cat([di, di, di, si, si, si]), cat([di, si, gi, di, si, gi]))
        k, lp, ln = self.l_k, self.l_p, self.l_n
        one = np.ones(self.n_ind)
        self._ind_kcl = ((cat([lp, ln]), cat([k, k])), cat([one, -one]))
        self._ind_v = ((cat([k, k]), cat([lp, ln])), cat([-one, one]))
        if self.n_ind and not self.l_const:
            ga, ba, gg = self.l_a, self.l_b, self._gate_col(self.l_g)
            self._ind_q_rc = (cat([k, k, k, k]), cat([k, ga, ba, gg]))
            self._ind_L_rc = (cat([k, k, k, k, k]), cat([lp, ln, ga, ba, gg]))
            # kinetic-potential derivative layout, see _kinetic_potential
            allnodes = np.arange(gnd + 1)
            r_u = cat([ga, ga, ba, ba, allnodes])
            c_u = cat([ga, ba, ga, ba, allnodes])
            gate = gg[0] if len(gg) else gnd
            self._phi_flat = (cat([ga, ba, r_u, r_u]) * (gnd + 1)
                              + cat([k, k, c_u, np.full_like(c_u, gate)]))
        self._cache = {}

    def _gate_col(self, idx):
        if len(idx) and np.any(idx != idx[0]):
            raise ValueError("all gate-controlled elements must share one gate node")
        return idx

    def _overdrive(self, xe):
        """Local gate-to-channel overdrive U at every node (ground included)."""
        gate = self.index.get("gate")
        Vg = xe[gate] if gate is not None else 0.0
        return Vg - self.params.V_T0 - xe

    def _inductance(self, nn, dn, d2n):
        """L, dL/dU_a, dL/dU_b and second derivatives for every Drude inductor."""
        p = self.params
        a, b = self.l_a, self.l_b
        K = self.l_Kg
        Ka, Kb = K * self.l_wa, K * self.l_wb
        g = Ka * nn[a] + Kb * nn[b]
        live = g >= G_FLOOR
        gg = np.where(live, g, G_FLOOR)
        L = p.tau / (gg * self.l_div)
        ga = np.where(live, Ka * dn[a], 0.0)
        gb = np.where(live, Kb * dn[b], 0.0)
        gaa = np.where(live, Ka * d2n[a], 0.0)
        gbb = np.where(live, Kb * d2n[b], 0.0)
        La = -L * ga / gg
        Lb = -L * gb / gg
        Laa = L * (2 * ga * ga / gg**2 - gaa / gg)
        Lbb = L * (2 * gb * gb / gg**2 - gbb / gg)
        Lab = L * 2 * ga * gb / gg**2
        return L, La, Lb, Laa, Lbb, Lab

    def _densities(self, xe):
        return uccm_density_derivs(self.params, self._overdrive(xe))

    def inductances(self, x):
        if self.l_const:
            return self.l_L.copy()
        return self._inductance(*self._densities(self._ext(x)))[0]

    # -- assembly ----------------------------------------------------------

    def evaluate(self, x, t, mode="tran", scale=1.0, a=0.0):
        """Residual pieces and Jacobian at state ``x`` and time ``t``.

        Returns ``(f, q, J, Jq)`` where ``J = df/dx + a*dq/dx`` is a dense
        Fortran-ordered matrix ready for LU and ``Jq`` is the sparse charge
        Jacobian as a ``Triplets``.

        ``mode="dc"`` drops the dynamic part, treats inductors as shorts and
        switches the THz source off.  ``mode="static"`` is the same but keeps
        the source at its value at time ``t``.
        """
        if mode not in ("tran", "dc", "static"):
            raise ValueError(f"unknown evaluation mode {mode!r}")
        dc = mode != "tran"
        gnd = self.size
        xe = np.append(x, 0.0)
        fterms, qterms, jf, jq, extra = self._terms(xe, t, mode, scale)
        if dc not in self._cache:
            self._cache[dc] = self._layout(fterms, qterms, jf, jq)
        fi, qi, (fr, fc, fm), (qr, qc, qm) = self._cache[dc]
        cat = np.concatenate
        f = np.bincount(fi, cat([v for _, v in fterms]), minlength=gnd + 1)[:gnd]
        q = (np.bincount(qi, cat([v for _, v in qterms]), minlength=gnd + 1)[:gnd]
             if qterms else np.zeros(gnd))
        vf = cat([v for _, v in jf])[fm]
        vq = cat([v for _, v in jq])[qm] if jq else np.zeros(0)
        # column-major flat index so the reshaped transpose is Fortran ordered
        flat = cat([fc * gnd + fr, qc * gnd + qr])
        J = np.bincount(flat, cat([vf, a * vq]), minlength=gnd * gnd).reshape(gnd, gnd).T
        if extra is not None:
            f_phi, rows = extra
            f[self.l_k] += f_phi
            J[self.l_k] += rows[:, :gnd]
        return f, q, J, Triplets(qr, qc, vq, gnd)

    def _layout(self, fterms, qterms, jf, jq):
        gnd = self.size
        cat = np.concatenate

        def drop_ground(pairs):
            if not pairs:
                e = np.zeros(0, int)
                return e, e, np.zeros(0, bool)
            r = cat([rc[0] for rc, _ in pairs])
            c = cat([rc[1] for rc, _ in pairs])
            m = (r != gnd) & (c != gnd)
            return r[m], c[m], m

        return (
            cat([i for i, _ in fterms]),
            cat([i for i, _ in qterms]) if qterms else np.zeros(0, int),
            drop_ground(jf),
            drop_ground(jq),
        )

    def _terms(self, xe, t, mode, scale):
        """Residual and Jacobian contributions in a fixed order per mode.

        ``fterms``/``qterms`` are (index, value) pairs; ``jf``/``jq`` are
        ((rows, cols), values).  Index arrays are pre-computed so only the
        values are built here.
        """
        p = self.params
        dc = mode != "tran"
        fterms, qterms, jf, jq = [], [], [], []
        extra = None

        if len(self.r_g):
            i = self.r_g * (xe[self.r_a] - xe[self.r_b])
            fterms += [(self.r_a, i), (self.r_b, -i)]
            jf.append((self._res_rc, self._res_val))

        if len(self.c_C) and not dc:
            qq = self.c_C * (xe[self.c_a] - xe[self.c_b])
            qterms += [(self.c_a, qq), (self.c_b, -qq)]
            jq.append((self._cap_rc, self._cap_val))

        if len(self.v_k):
            k = self.v_k
            ib = xe[k]
            res = xe[self.v_p] - xe[self.v_n] - self.source_values(t, mode == "dc", scale)
            fterms += [(self.v_p, ib), (self.v_n, -ib), (k, res)]
            jf.append((self._src_rc, self._src_val))

        nn, dn, d2n = self._densities(xe)

        if len(self.q_w) and not dc:
            ni, gi = self.q_n, self.q_g
            Qn = -self.q_w * nn[ni]
            c = self.q_w * dn[ni]
            qterms += [(ni, Qn), (gi, -Qn)]
            jq.append((self._chg_rc, np.concatenate([c, -c, -c, c])))

        if len(self.m_K):
            si, di, K = self.m_s, self.m_d, self.m_K
            nvt, n0 = _softplus_scale(p)
            P = _softplus_integral(self._overdrive(xe)[np.concatenate([si, di])] / nvt)
            Ps, Pd = P[: len(si)], P[len(si):]
            I = K * n0 * nvt * (Ps - Pd)
            fterms += [(di, I), (si, -I)]
            dId = K * nn[di]
            dIs = -K * nn[si]
            dIg = -(dId + dIs)
            jf.append((self._ch_rc, np.concatenate([dId, dIs, dIg, -dId, -dIs, -dIg])))

        if self.n_ind:
            extra = self._inductor_terms(xe, nn, dn, d2n, dc, fterms, qterms, jf, jq)
        return fterms, qterms, jf, jq, extra

    def _inductor_terms(self, xe, nn, dn, d2n, dc, fterms, qterms, jf, jq):
        k, lp, ln = self.l_k, self.l_p, self.l_n
        I = xe[k]
        fterms += [(lp, I), (ln, -I)]
        jf.append(self._ind_kcl)
        dV = xe[lp] - xe[ln]
        one = np.ones(self.n_ind)
        if dc:
            self.row_scale[k] = 1.0
            fterms.append((k, -dV))
            jf.append(self._ind_v)
            return None
        if self.l_const:
            L = self.l_L
            if self.law == "inductance":
                self.row_scale[k] = L
                qterms.append((k, I))
                fterms.append((k, -dV / L))
                jq.append(((k, k), one))
                jf.append((self._ind_v[0], np.concatenate([-1 / L, 1 / L])))
            else:
                qterms.append((k, L * I))
                fterms.append((k, -dV))
                jq.append(((k, k), L))
                jf.append(self._ind_v)
            return None

        L, La, Lb, Laa, Lbb, Lab = self._inductance(nn, dn, d2n)
        if self.law == "inductance":
            self.row_scale[k] = L
            qterms.append((k, I))
            fterms.append((k, -dV / L))
            jq.append(((k, k), one))
            c = dV / L**2
            jf.append((self._ind_L_rc,
                       np.concatenate([-1 / L, 1 / L, -c * La, -c * Lb, c * (La + Lb)])))
            return None

        qterms.append((k, L * I))
        jq.append((self._ind_q_rc, np.concatenate([L, -I * La, -I * Lb, I * (La + Lb)])))
        fterms.append((k, -dV))
        jf.append(self._ind_v)
        if self.law == "lagrangian":
            phi, dphi = self._kinetic_potential(dn, d2n, I, La, Lb, Laa, Lbb, Lab)
            return (-(phi[self.l_to] - phi[self.l_from]),
                    -(dphi[self.l_to] - dphi[self.l_from]))
        return None

    def _node_capacitance(self, dn, d2n):
        """Capacitance seen by each node and its derivative w.r.t. the overdrive."""
        n = self.size + 1
        ni = self.q_n
        C = self.c_lin + np.bincount(ni, self.q_w * dn[ni], minlength=n)
        dC = np.bincount(ni, self.q_w * d2n[ni], minlength=n)
        return C, dC

    def kinetic_potential(self, x):
        """phi_j = dT/dQ_j (V) at every node for the state ``x``."""
        if self.l_const or not self.n_ind:
            return np.zeros(self.n_nodes)
        xe = self._ext(x)
        nn, dn, d2n = self._densities(xe)
        _, La, Lb, Laa, Lbb, Lab = self._inductance(nn, dn, d2n)
        phi, _ = self._kinetic_potential(dn, d2n, xe[self.l_k], La, Lb, Laa, Lbb, Lab)
        return phi[: self.n_nodes]

    def _kinetic_potential(self, dn, d2n, I, La, Lb, Laa, Lbb, Lab):
        n = self.size + 1
        a, b = self.l_a, self.l_b
        C, dC = self._node_capacitance(dn, d2n)
        half = 0.5 * I * I
        # dL/dV_j = -dL/dU_j
        S = np.bincount(np.concatenate([a, b]), np.concatenate([-half * La, -half * Lb]),
                        minlength=n)
        holds = S != 0
        if np.any(holds & (C <= 0)):
            raise ValueError("Drude inductor controlled by a node without capacitance")
        inv = 1.0 / np.where(C > 0, C, 1.0)
        phi = np.where(holds, S * inv, 0.0)
        # d phi / d I_k, then d phi_j / d U_i from d2L/dU_j dU_i and from C_j(U_j);
        # U_i = V_g - V_T0 - V_i so V_i takes the negative and the gate the positive
        v_u = np.concatenate([-half * Laa * inv[a], -half * Lab * inv[a],
                              -half * Lab * inv[b], -half * Lbb * inv[b],
                              np.where(holds, -S * dC * inv * inv, 0.0)])
        vals = np.concatenate([-I * La * inv[a], -I * Lb * inv[b], -v_u, v_u])
        dphi = np.bincount(self._phi_flat, vals, minlength=n * n).reshape(n, n)
        return phi, dphi

    def charges(self, x):
        return self.evaluate(x, 0.0)[1]


@dataclass
class DCSolution:
    """Converged DC operating point."""

    x: np.ndarray
    system: MNASystem = field(repr=False)
    iterations: int = 0

    def voltage(self, node: str) -> float:
        if node == GROUND:
            return 0.0
        return float(self.x[self.system.index[node]])

    def current(self, branch: str) -> float:
        return float(self.x[self.system.branch_index[branch]])

    @property
    def node_voltages(self) -> dict[str, float]:
        return {n: float(self.x[i]) for i, n in enumerate(self.system.node_names)}


def _small(system, vec, tol_node, tol_branch):
    node = system.is_node_row
    return (np.max(np.abs(vec[node]), initial=0.0) < tol_node
            and np.max(np.abs(vec[~node]), initial=0.0) < tol_branch)


def _newton(system, x0, residual, config, time_index=None):
    """Solve ``residual(x) = 0``.

    ``residual`` returns ``(R, J, q, Jq)`` with ``Jq`` a ``Triplets``.  The iteration stops once the
    update is below ``newton_tol_v`` (voltages) / ``newton_tol_i`` (branch
    currents) and the residual it was computed from is below ``newton_tol_i``
    (node rows) / ``newton_tol_v`` (branch rows).  Returns the solution,
    the charge vector there (linearised from the last evaluation) and the
    iteration count.
    """
    x = x0.copy()
    trace = []
    for it in range(1, config.newton_max_iter + 1):
        R, J, q, Jq = residual(x)
        trace.append(float(np.max(np.abs(R), initial=0.0)))
        if not np.all(np.isfinite(R)):
            break
        try:
            with np.errstate(all="raise"):
                lu = lu_factor(J, overwrite_a=True, check_finite=False)
                dx = lu_solve(lu, R, check_finite=False)
        except (LinAlgError, FloatingPointError, ValueError) as exc:
            raise NonConvergence(f"singular Jacobian: {exc}", trace[-1], trace, time_index) from exc
        if not np.all(np.isfinite(dx)):
            break
        x = x - dx
        if (_small(system, dx, config.newton_tol_v, config.newton_tol_i)
                and _small(system, R * system.row_scale, config.newton_tol_i,
                           config.newton_tol_v)):
            return x, q - Jq.matvec(dx), it
    raise NonConvergence(
        f"Newton did not converge in {config.newton_max_iter} iterations"
        + ("" if time_index is None else f" at time index {time_index}"),
        residual=trace[-1] if trace else None, trace=trace, time_index=time_index,
    )


def dc_operating_point(circuit: SegmentedCircuit | MNASystem, config: SolverConfig | None = None,
                       x0=None, *, source_time: float | None = None) -> DCSolution:
    """Newton-Raphson DC solution with the THz source off and inductors shorted.

    With ``source_time`` the THz source is frozen at its value at that time
    instead of switched off.  On failure the sources are ramped up from zero
    in ten steps.
    """
    config = config or SolverConfig()
    system = circuit if isinstance(circuit, MNASystem) else MNASystem(circuit, config.law_for(circuit))

    mode = "dc" if source_time is None else "static"
    t0 = 0.0 if source_time is None else float(source_time)

    def make(scale):
        def residual(x):
            f, q, J, Jq = system.evaluate(x, t0, mode=mode, scale=scale)
            return f, J, q, Jq
        return residual

    start = np.zeros(system.size) if x0 is None else np.asarray(x0, float)
    try:
        x, _, it = _newton(system, start, make(1.0), config)
        return DCSolution(x, system, it)
    except NonConvergence as first:
        log.info("DC Newton failed (%s); trying source stepping", first)
        x = np.zeros(system.size)
        total = 0
        for scale in np.linspace(0.1, 1.0, 10):
            try:
                x, _, it = _newton(system, x, make(scale), config)
            except NonConvergence as exc:
                raise NonConvergence(
                    f"DC solve failed during source stepping at scale {scale:.1f}",
                    exc.residual, first.trace + exc.trace) from exc
            total += it
        return DCSolution(x, system, total)


def iv_sweep(params: DeviceParams, V_gs_grid, V_ds_grid, config: SolverConfig | None = None):
    """DC drain current table I_d[i_gs, i_ds] of the full segmented circuit.

    Returns ``(V_gs, V_ds, I_d)`` arrays; I_d is the current into the drain
    terminal.
    """
    config = config or SolverConfig()
    V_gs_grid = np.asarray(V_gs_grid, float)
    V_ds_grid = np.asarray(V_ds_grid, float)
    for grid in (V_gs_grid, V_ds_grid):
        if len(grid) > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
            raise ValueError("sweep grids must be monotone")
    I = np.empty((len(V_gs_grid), len(V_ds_grid)))
    bc = BoundaryCondition("voltage_bias")
    for i, vgs in enumerate(V_gs_grid):
        x_prev = None
        for j, vds in enumerate(V_ds_grid):
            bias = BiasPoint(V_gs=float(vgs), V_ds=float(vds), V_T0=params.V_T0)
            circ = build_segmented(params, bias, Excitation(0.0, 0.0), bc)
            system = MNASystem(circ, config.inductor_law)
            try:
                sol = dc_operating_point(system, config, x0=x_prev)
            except NonConvergence as exc:
                raise NonConvergence(
                    f"I-V point V_gs={vgs:g} V, V_ds={vds:g} V failed: {exc}",
                    exc.residual, exc.trace) from exc
            x_prev = sol.x
            I[i, j] = 0.0 - sol.current("B_drain")
    return V_gs_grid, V_ds_grid, I


@dataclass
class WaveformSet:
    """Sampled transient over the final retained cycles.

    ``voltages`` has shape (n_t, n_nodes) and ``currents`` (n_t, n_branches);
    ``cycle_starts`` are the sample indices where each retained cycle begins.
    """

    t: np.ndarray
    voltages: np.ndarray
    currents: np.ndarray
    cycle_starts: np.ndarray
    node_names: list[str]
    branch_names: list[str]
    steps_per_cycle: int
    cycles_run: int
    settled: bool
    baseline: DCSolution = field(repr=False)
    law: str = "lagrangian"

    def v(self, node: str) -> np.ndarray:
        return self.voltages[:, self.node_names.index(node)]

    def i(self, branch: str) -> np.ndarray:
        return self.currents[:, self.branch_names.index(branch)]

    def cycle_means(self, node: str = "drain_ext") -> np.ndarray:
        v = self.v(node)
        spc = self.steps_per_cycle
        return np.array([v[s:s + spc].mean() for s in self.cycle_starts])

    def last_cycle(self) -> slice:
        s = int(self.cycle_starts[-1])
        return slice(s, s + self.steps_per_cycle)


class Integrator:
    """Fixed-step implicit integrator for an ``MNASystem``.

    Trapezoidal by default; backward Euler for ``integrator="backward_euler"``
    and for the first ``startup_be_steps`` steps.  ``qdot0`` is the charge
    rate at the initial state (zero for a DC start).
    """

    def __init__(self, system: MNASystem, h: float, config: SolverConfig, x0, qdot0=None):
        self.system = system
        self.h = h
        self.config = config
        self.x = np.asarray(x0, float).copy()
        self.q = system.evaluate(self.x, 0.0)[1]
        self.qdot = np.zeros(system.size) if qdot0 is None else np.asarray(qdot0, float)
        self.n = 0
        self.history = deque([self.x], maxlen=3)

    @property
    def t(self) -> float:
        return self.n * self.h

    def step(self) -> np.ndarray:
        cfg, h = self.config, self.h
        self.n += 1
        t = self.n * h
        if self.n <= cfg.startup_be_steps or cfg.integrator == "backward_euler":
            a, b = 1.0 / h, 0.0
        else:
            a, b = 2.0 / h, 1.0
        q_n, qdot = self.q, self.qdot
        system = self.system

        def residual(xx):
            f, q, J, Jq = system.evaluate(xx, t, a=a)
            return a * (q - q_n) - b * qdot + f, J, q, Jq

        hist = self.history
        # quadratic extrapolation once three smooth points exist
        if len(hist) == 3 and self.n > cfg.startup_be_steps + 2:
            guess = 3 * hist[2] - 3 * hist[1] + hist[0]
        else:
            guess = self.x
        x, q_new, _ = _newton(system, guess, residual, cfg, time_index=self.n)
        self.qdot = a * (q_new - q_n) - b * qdot
        self.q = q_new
        self.x = x
        hist.append(x)
        return x


def integrate(system: MNASystem, x0, h: float, n_steps: int,
              config: SolverConfig | None = None, qdot0=None):
    """Fixed-step integration; returns ``(t, X)`` with X of shape (n_steps+1, size)."""
    config = config or SolverConfig()
    st = Integrator(system, h, config, x0, qdot0)
    X = np.empty((n_steps + 1, system.size))
    X[0] = st.x
    for i in range(1, n_steps + 1):
        X[i] = st.step()
    return h * np.arange(n_steps + 1), X


def _initial_state(system, baseline, config):
    """State and charge rate at t=0.

    ``phasor`` starts on the small-signal periodic solution around the DC
    point, which removes the first-order start-up ringing of the plasma
    resonance; only the (much smaller) second-order transient is left to
    decay.  ``static`` starts from the quasi-static state with the source
    frozen at its t=0 value.
    """
    if config.start == "static":
        x = dc_operating_point(system, config, x0=baseline.x, source_time=0.0).x
        return x, np.zeros(system.size)
    _, _, Jf, Jq = system.evaluate(baseline.x, 0.0)
    Jq = Jq.dense()
    drive = np.zeros(system.size)
    drive[system.v_k] = system.v_amp
    omega = system.v_omega[np.argmax(system.v_amp)] if len(system.v_amp) else 0.0
    X = np.linalg.solve(Jf + 1j * omega * Jq, drive)
    return baseline.x + X.real, (1j * omega * (Jq @ X)).real


def transient(circuit: SegmentedCircuit, exc: Excitation | None = None,
              config: SolverConfig | None = None) -> WaveformSet:
    """Integrate from the DC operating point until the drain cycle average settles.

    By default the run starts on the small-signal periodic solution (see
    ``SolverConfig.start``).  Settled means the last four cycle averages of
    the drain voltage agree within ``settle_tol`` of the response.  Emits a
    ``NoSettle`` warning (and returns a result flagged ``settled=False``) if
    ``max_cycles`` is reached.
    """
    from .circuit import apply_excitation

    config = config or SolverConfig()
    if exc is not None:
        circuit = apply_excitation(circuit, exc)
    freq = circuit.excitation.f
    if not freq > 0:
        raise ValueError("transient needs a positive excitation frequency")
    system = MNASystem(circuit, config.law_for(circuit))
    baseline = dc_operating_point(system, config)
    spc = config.steps_per_cycle
    h = 1.0 / (freq * spc)
    drain = system.index["drain_ext"]
    v_base = baseline.x[drain]

    x, qdot = _initial_state(system, baseline, config)
    stepper = Integrator(system, h, config, x, qdot)
    kept = deque(maxlen=config.keep_cycles)
    means = []
    settled = False
    for cycle in range(config.max_cycles):
        block = np.empty((spc, system.size))
        for j in range(spc):
            block[j] = stepper.step()
        kept.append((cycle, block))
        means.append(block[:, drain].mean())
        # the last four cycle averages feed the response estimate, so all of
        # them must agree, which is stricter than consecutive-cycle drift
        if cycle + 1 >= config.min_cycles:
            tail = np.array(means[-4:])
            if np.ptp(tail) <= config.settle_tol * abs(tail[-1] - v_base):
                settled = True
                break
    cycles_run = cycle + 1
    if not settled:
        warnings.warn(f"transient did not settle within {config.max_cycles} cycles "
                      f"at f = {freq:g} Hz", NoSettle, stacklevel=2)
    data = np.concatenate([blk for _, blk in kept])
    first_cycle = kept[0][0]
    n_t = len(data)
    t_grid = (first_cycle * spc + 1 + np.arange(n_t)) * h
    nn = system.n_nodes
    return WaveformSet(
        t=t_grid, voltages=data[:, :nn], currents=data[:, nn:],
        cycle_starts=np.arange(0, n_t, spc), node_names=system.node_names,
        branch_names=system.branch_names, steps_per_cycle=spc,
        cycles_run=cycles_run, settled=settled, baseline=baseline,
        law=system.law,
    )


@dataclass
class DCResponse:
    value: float
    consistent: bool
    cycle_values: np.ndarray


def extract_dc_response(waves: WaveformSet, baseline: DCSolution | None = None,
                        settle_tol: float = 1e-3, node: str = "drain_ext") -> DCResponse:
    """Rectified response over the final four cycles.

    Sign convention: positive when the drain potential falls below its
    no-radiation value, i.e. when the gate-to-channel voltage at the drain
    rises.  This matches the sign of the closed-form response for a
    gate-source drive.
    """
    baseline = baseline or waves.baseline
    v0 = baseline.voltage(node)
    per_cycle = v0 - waves.cycle_means(node)[-4:]
    value = float(per_cycle.mean())
    spread = float(per_cycle.max() - per_cycle.min())
    consistent = spread <= settle_tol * abs(value) or spread == 0.0
    if not consistent:
        log.warning("last-4-cycle response spread %.3g exceeds tolerance", spread)
    return DCResponse(value, consistent, per_cycle)


def extract_profiles(waves: WaveformSet, circuit: SegmentedCircuit) -> ChannelProfile:
    """Drift velocity and density at segment midpoints over the final cycle."""
    p = circuit.params
    sl = waves.last_cycle()
    nodes = circuit.channel_nodes
    Vg = waves.v("gate")[sl]
    V = np.stack([waves.v(n)[sl] for n in nodes], axis=1)
    Vmid = 0.5 * (V[:, :-1] + V[:, 1:])
    n = uccm_density(p, Vg[:, None], Vmid)
    I = np.stack([waves.i(f"L_{i}")[sl] for i in range(1, circuit.N_seg + 1)], axis=1)
    v = -I / (Q_E * n * p.W)
    lengths = np.array(circuit.segment_lengths)
    x = np.cumsum(lengths) - 0.5 * lengths
    return ChannelProfile(x=x, t=waves.t[sl], v=v, n=n, method=f"circuit_{circuit.inductance_mode}")


def drude_inductances(circuit: SegmentedCircuit, V_gate, node_voltages):
    """Drude inductance of every segment for gate voltage(s) and channel node voltages.

    ``node_voltages`` maps node name to value (or array over time).
    """
    p = circuit.params
    out = []
    for el in circuit.of_kind("drude_inductor"):
        prm = el.params
        g = segment_conductance(
            p, V_gate, node_voltages[prm["ctrl"][0]], node_voltages[prm["ctrl"][1]],
            prm["eval_len"], rule=prm["rule"],
        )
        out.append(drude_inductance(g, p.tau) / prm["divisor"])
    return np.array(out)


def drude_profile(waves: WaveformSet, circuit: SegmentedCircuit):
    """Cycle-averaged and peak-to-peak Delta L_drude per segment.

    Returns ``(mean, ptp)`` arrays of length N_seg: the mean over the
    final cycle of L_drude(t) - L_drude0 and its peak-to-peak swing.
    """
    sl = waves.last_cycle()
    base = waves.baseline
    names = circuit.channel_nodes
    L0 = drude_inductances(circuit, base.voltage("gate"), {n: base.voltage(n) for n in names})
    Lt = drude_inductances(circuit, waves.v("gate")[sl], {n: waves.v(n)[sl] for n in names})
    dL = Lt - L0[:, None]
    return dL.mean(axis=1), np.ptp(Lt, axis=1)
