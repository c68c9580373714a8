"""Filtered hybrid integrator-gain systems: element model, simulators and
describing functions."""

from .describing_function import (Case, DfPoint, SimplifiedFhigs, df_point, df_sweep,
                                  reduce_filters, steady_state_analytic, switching_instants)
from .element import ElementState, FhigsElement, FhigsParams, Mode
from .lti import StateSpace, TransferFunction, freq_response, notch, tf_to_ss
from .simulator import (ClosedLoop, SimConfig, Sine, Step, SumOfSines, Trajectory,
                        incremental_gap, simulate_closed_loop, simulate_epds, simulate_open_loop)

__all__ = [
    "Case",
    "ClosedLoop",
    "DfPoint",
    "ElementState",
    "FhigsElement",
    "FhigsParams",
    "Mode",
    "SimConfig",
    "SimplifiedFhigs",
    "Sine",
    "StateSpace",
    "Step",
    "SumOfSines",
    "Trajectory",
    "TransferFunction",
    "df_point",
    "df_sweep",
    "freq_response",
    "incremental_gap",
    "notch",
    "reduce_filters",
    "simulate_closed_loop",
    "simulate_epds",
    "simulate_open_loop",
    "steady_state_analytic",
    "switching_instants",
    "tf_to_ss",
]
