"""Segmented nonlinear-circuit model of plasma-wave THz rectification in FETs.

Three independent ways to compute the rectified drain response are provided:
the closed-form small-signal theory (``analytic``), a 1-D hydrodynamic
solver (``hydro``) and a transient simulation of the segmented equivalent
circuit with bias-dependent Drude inductors (``circuit`` + ``engine``).
"""

from .analytic import classify_regime, critical_length, ds_f, ds_response
from .circuit import BoundaryCondition, build_segmented, netlist_export
from .device import (
    BiasPoint,
    DeviceParams,
    Excitation,
    channel_current,
    derive_transport,
    drude_inductance,
    uccm_density,
)
from .engine import SolverConfig, dc_operating_point, extract_dc_response, iv_sweep, transient
from .hydro import HydroConfig, hydro_response_sweep, solve_hydro
from .results import ChannelProfile, ResponseCurve

__all__ = [
    "BiasPoint", "BoundaryCondition", "ChannelProfile", "DeviceParams", "Excitation",
    "HydroConfig", "ResponseCurve", "SolverConfig", "build_segmented", "channel_current",
    "classify_regime", "critical_length", "dc_operating_point", "derive_transport",
    "drude_inductance", "ds_f", "ds_response", "extract_dc_response", "hydro_response_sweep",
    "iv_sweep", "netlist_export", "solve_hydro", "transient", "uccm_density",
]
