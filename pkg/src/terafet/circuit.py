"""Segmented nonlinear transmission-line equivalent circuit of a TeraFET.

Node naming used throughout::

    gate ──V_thz── gate_bias ──V_bias── source_ext ──probe── ground
    source_ext ──R_s── n0 ─L_1─ m1 ─M_1─ n1 ─L_2─ m2 ─M_2─ ... ─M_N─ nN ──R_d── drain_ext

``n0`` is the intrinsic source node s, ``nN`` the intrinsic drain d and
``n1..n(N-1)`` the internal nodes d_i = s_(i+1).  Each segment i is a Drude
inductor L_i (n(i-1) -> m_i) in series with a channel element M_i
(m_i -> n_i).  Gate-channel charges sit on the ``n`` nodes with half-length
slices at both ends.  A zero series resistance is realised as a current probe
so the topology never depends on parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from .device import BiasPoint, DeviceParams, Excitation

GROUND = "0"

KINDS = (
    "resistor",
    "drude_inductor",
    "nonlinear_charge",
    "linear_capacitor",
    "voltage_source",
    "current_probe",
    "channel",
)

INDUCTANCE_MODES = ("varying", "uniform")
CONDUCTANCE_RULES = ("symmetric", "drain")


@dataclass(frozen=True)
class Element:
    """One circuit branch.

    ``nodes`` are ordered per kind: two-terminal elements use (p, n);
    ``nonlinear_charge`` uses (gate, node); ``channel`` uses (gate, source, drain).
    """

    kind: str
    name: str
    nodes: tuple[str, ...]
    params: dict[str, Any] = field(default_factory=dict)
    evaluator: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")


@dataclass(frozen=True)
class BoundaryCondition:
    """Drain termination.

    ``open_drain`` ties the drain to ground through ``R_open`` only;
    ``resistive_load`` uses ``R_load``; ``voltage_bias`` forces the DC
    drain-source voltage of the bias point (used for I-V sweeps).
    """

    mode: str = "open_drain"
    R_load: float | None = None
    R_open: float = 1e8

    def __post_init__(self):
        if self.mode not in ("open_drain", "resistive_load", "voltage_bias"):
            raise ValueError(f"unknown boundary mode {self.mode!r}")
        if self.mode == "open_drain" and not self.R_open > 1e6:
            raise ValueError(f"R_open must exceed 1 MOhm, got {self.R_open!r}")
        if self.mode == "resistive_load" and not (self.R_load and self.R_load > 0):
            raise ValueError("resistive_load needs a positive R_load")


@dataclass(frozen=True)
class SegmentedCircuit:
    params: DeviceParams
    bias: BiasPoint
    excitation: Excitation
    boundary: BoundaryCondition
    inductance_mode: str
    conductance_rule: str
    nodes: tuple[str, ...]
    elements: tuple[Element, ...]

    @property
    def N_seg(self) -> int:
        return self.params.N_seg

    def element(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def of_kind(self, kind: str) -> list[Element]:
        return [el for el in self.elements if el.kind == kind]

    @property
    def channel_nodes(self) -> list[str]:
        """Segment boundary nodes s = n0 ... d = nN in channel order."""
        return [f"n{i}" for i in range(self.N_seg + 1)]

    @property
    def segment_lengths(self) -> list[float]:
        return [el.params["seg_len"] for el in self.of_kind("channel")]

    def with_element(self, new: Element) -> "SegmentedCircuit":
        """Copy with the element of the same name replaced (or appended)."""
        els = list(self.elements)
        for i, el in enumerate(els):
            if el.name == new.name:
                els[i] = new
                break
        else:
            els.append(new)
        nodes = list(self.nodes)
        for n in new.nodes:
            if n != GROUND and n not in nodes:
                nodes.append(n)
        return replace(self, elements=tuple(els), nodes=tuple(nodes))


def _series(name, p, n, R):
    if R > 0:
        return Element("resistor", name, (p, n), {"R": float(R)})
    return Element("current_probe", name, (p, n))


def build_segmented(
    params: DeviceParams,
    bias: BiasPoint,
    exc: Excitation,
    bc: BoundaryCondition | None = None,
    inductance_mode: str = "varying",
    conductance_rule: str = "symmetric",
) -> SegmentedCircuit:
    """Expand a device into its N-segment equivalent circuit.

    In ``varying`` mode the Drude inductor of segment i is evaluated from the
    voltages of its own nodes (s_i, d_i).  In ``uniform`` mode every inductor
    uses the whole-channel conductance between s and d divided by N.
    """
    if inductance_mode not in INDUCTANCE_MODES:
        raise ValueError(f"unknown inductance mode {inductance_mode!r}")
    if conductance_rule not in CONDUCTANCE_RULES:
        raise ValueError(f"unknown conductance rule {conductance_rule!r}")
    bc = bc or BoundaryCondition()
    N = params.N_seg
    seg = params.seg_len
    chan = [f"n{i}" for i in range(N + 1)]
    mids = [f"m{i}" for i in range(1, N + 1)]
    nodes = ["gate", "gate_bias", "source_ext", "drain_ext", *chan, *mids]

    els = [
        Element("voltage_source", "V_bias", ("gate_bias", "source_ext"),
                {"dc": float(bias.V_gs), "amplitude": 0.0, "omega": 0.0}),
        Element("voltage_source", "V_thz", ("gate", "gate_bias"),
                {"dc": 0.0, "amplitude": 0.0, "omega": 0.0}, "cos"),
        Element("current_probe", "P_source", ("source_ext", GROUND)),
        _series("R_s", "source_ext", chan[0], params.R_s),
        _series("R_d", chan[-1], "drain_ext", params.R_d),
        Element("linear_capacitor", "C_gs_ext", ("gate", "source_ext"),
                {"C": float(params.C_gs_ext)}),
        Element("linear_capacitor", "C_gd_ext", ("gate", "drain_ext"),
                {"C": float(params.C_gd_ext)}),
    ]
    for i in range(1, N + 1):
        s_i, d_i, m_i = chan[i - 1], chan[i], mids[i - 1]
        if inductance_mode == "varying":
            ctrl, eval_len, divisor = (s_i, d_i), seg, 1
        else:
            ctrl, eval_len, divisor = (chan[0], chan[-1]), params.L, N
        els.append(Element(
            "drude_inductor", f"L_{i}", (s_i, m_i),
            {"gate": "gate", "ctrl": ctrl, "path": (s_i, d_i),
             "eval_len": eval_len, "divisor": divisor, "rule": conductance_rule},
            f"drude_{inductance_mode}",
        ))
        els.append(Element("channel", f"M_{i}", ("gate", m_i, d_i),
                           {"seg_len": seg}, "gca_uccm"))
    for i, node in enumerate(chan):
        share = 0.5 if i in (0, N) else 1.0
        els.append(Element("nonlinear_charge", f"Q_{i}", ("gate", node),
                           {"seg_len": share * seg}, "uccm_charge"))

    circuit = SegmentedCircuit(
        params=params, bias=bias, excitation=Excitation(0.0, exc.f),
        boundary=bc, inductance_mode=inductance_mode,
        conductance_rule=conductance_rule, nodes=tuple(nodes), elements=tuple(els),
    )
    circuit = apply_excitation(circuit, exc)
    return apply_open_drain(circuit, bc)


def apply_excitation(circuit: SegmentedCircuit, exc: Excitation) -> SegmentedCircuit:
    """Set the THz source in series with the gate bias to V_a*cos(omega*t)."""
    if exc.port != "gate_source":
        raise ValueError(f"unsupported excitation port {exc.port!r}")
    src = circuit.element("V_thz")
    new = replace(src, params={"dc": 0.0, "amplitude": float(exc.V_a),
                               "omega": float(exc.omega)})
    return replace(circuit.with_element(new), excitation=exc)


def apply_open_drain(circuit: SegmentedCircuit, bc: BoundaryCondition) -> SegmentedCircuit:
    """Install the drain termination element ``B_drain``."""
    if bc.mode == "open_drain":
        term = Element("resistor", "B_drain", ("drain_ext", GROUND), {"R": float(bc.R_open)})
    elif bc.mode == "resistive_load":
        term = Element("resistor", "B_drain", ("drain_ext", GROUND), {"R": float(bc.R_load)})
    else:
        term = Element("voltage_source", "B_drain", ("drain_ext", "source_ext"),
                       {"dc": float(circuit.bias.V_ds), "amplitude": 0.0, "omega": 0.0})
    return replace(circuit.with_element(term), boundary=bc)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def netlist_export(circuit: SegmentedCircuit) -> str:
    """Deterministic one-element-per-line text netlist.

    Line format: ``<kind> <name> <node> ... [key=value ...] [eval=<evaluator>]``
    with keys sorted and floats printed with 12 significant digits.
    """
    p = circuit.params
    lines = [
        f"* terafet segmented circuit N_seg={circuit.N_seg} "
        f"mode={circuit.inductance_mode} rule={circuit.conductance_rule} "
        f"boundary={circuit.boundary.mode}",
        f"* device L={_fmt(p.L)} W={_fmt(p.W)} mu={_fmt(p.mu)} m_eff={_fmt(p.m_eff)} "
        f"c_ox={_fmt(p.c_ox)} V_T0={_fmt(p.V_T0)} eta={_fmt(p.eta)} T={_fmt(p.T)}",
    ]
    for el in circuit.elements:
        parts = [el.kind, el.name, *el.nodes]
        parts += [f"{k}={_fmt(v)}" for k, v in sorted(el.params.items())]
        if el.evaluator:
            parts.append(f"eval={el.evaluator}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def custom_circuit(nodes, elements, params: DeviceParams | None = None) -> SegmentedCircuit:
    """Wrap an arbitrary element list so the engine can simulate it.

    Used for engine checks on plain linear networks; ``nodes`` excludes ground.
    """
    params = params or DeviceParams(N_seg=1)
    names = {el.name for el in elements}
    if len(names) != len(elements):
        raise ValueError("element names must be unique")
    return SegmentedCircuit(
        params=params, bias=BiasPoint(params.V_T0, 0.0, params.V_T0),
        excitation=Excitation(0.0, 0.0), boundary=BoundaryCondition(),
        inductance_mode="varying", conductance_rule="symmetric",
        nodes=tuple(nodes), elements=tuple(elements),
    )
