"""Pieces shared by the fixed-grid and moving-boundary TES graphs.

Both models have the same working-fluid, inner-wall and outer-wall vertices,
the same advective edge to the outlet sink and the same two source edges
(inlet advection and ambient air). Only the PCM part of the graph differs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .geometry import (
    W_TO_KW,
    TesGeometry,
    convection_resistance,
    cylinder_resistance,
)
from .graph import SINK, Edge, ThermalGraph, Vertex, assemble_rhs
from .thermo import (
    AIR_H_CONV,
    COPPER,
    INSULATION_RESISTANCE,
    PVC,
    WATER,
    WATER_GLYCOL,
    MaterialProperties,
    PcmProperties,
    pcm_enthalpy,
    Phase,
)

INPUT_NAMES = ("t_in", "t_air", "mdot")
T_IN, T_AIR, MDOT = range(3)


@dataclass(frozen=True)
class TesParameters:
    """Everything needed to build either model. Defaults describe the reference store."""

    geometry: TesGeometry = field(default_factory=TesGeometry)
    pcm: PcmProperties = WATER
    fluid: MaterialProperties = WATER_GLYCOL
    inner_wall: MaterialProperties = COPPER
    outer_wall: MaterialProperties = PVC
    h_air: float = AIR_H_CONV  # W/(m^2 degC)
    insulation_resistance: float = INSULATION_RESISTANCE  # degC/W

    def __post_init__(self):
        if self.fluid.h_conv is None:
            raise ValueError("working fluid needs h_conv")
        if self.inner_wall.k is None or self.outer_wall.k is None:
            raise ValueError("pipe walls need a conductivity k")
        if not self.h_air > 0:
            raise ValueError("h_air must be > 0")
        if self.insulation_resistance < 0:
            raise ValueError("insulation_resistance must be >= 0")


class TesNetwork(ThermalGraph):
    """Base graph with the vertices and edges common to both models.

    Subclasses supply the PCM vertices/edges and the vectorized laws. State
    layout: ``[h_wf, h_inn, <pcm states>, h_out]``; the single sink holds
    the outlet enthalpy.
    """

    kind = "tes"

    def __init__(self, params: TesParameters, pcm_vertices: List[Vertex], pcm_edges: List[Edge]):
        self.params = params
        geo = params.geometry
        L = geo.length
        self.cp_wf = params.fluid.cp
        self.cp_inn = params.inner_wall.cp
        self.cp_out = params.outer_wall.cp
        self.C_wf = params.fluid.rho * geo.fluid_volume
        self.C_inn = params.inner_wall.rho * geo.inner_wall_volume
        self.C_out = params.outer_wall.rho * geo.outer_wall_volume

        k_inn, k_out = params.inner_wall.k, params.outer_wall.k
        # degC/W; powers are converted to kW once, in _conduct
        self.R2 = convection_resistance(geo.r1, params.fluid.h_conv, L) + cylinder_resistance(geo.r1, geo.r2, k_inn, L)
        self.R_inn_outer_half = cylinder_resistance(geo.r2, geo.r3, k_inn, L)
        self.R_out_inner_half = cylinder_resistance(geo.r_pcm_out, geo.r_outer_mid, k_out, L)
        self.R_out = cylinder_resistance(geo.r_outer_mid, geo.r_outer, k_out, L) + params.insulation_resistance
        self.R_air = convection_resistance(geo.r_outer, params.h_air, L)

        vertices = (
            [Vertex("wf"), Vertex("inn")]
            + pcm_vertices
            + [Vertex("out"), Vertex("outlet", SINK)]
        )
        edges = (
            [Edge("e1", "wf", "outlet"), Edge("e2", "inn", "wf")]
            + pcm_edges
            + [Edge("in1", None, "wf"), Edge("in2", None, "out")]
        )
        phi = np.zeros((len(edges), len(INPUT_NAMES)))
        phi[0, MDOT] = 1.0  # outlet advection is driven by the mass flow
        super().__init__(vertices, edges, phi=phi, input_names=INPUT_NAMES)
        self.i_out = self.n_states - 1

    # -- helpers -------------------------------------------------------------
    @staticmethod
    def _conduct(dT, R_w):
        """Power in kW through a resistance given in degC/W."""
        return W_TO_KW * dT / R_w

    def sink_state(self, x):
        return np.array([x[0]])

    def source_powers(self, x, u):
        """(P_in1, P1, P_in2) in kW: inlet advection, outlet advection, air."""
        T_wf = x[0] / self.cp_wf
        T_out = x[self.i_out] / self.cp_out
        adv = u[MDOT] * self.cp_wf
        return adv * u[T_IN], adv * T_wf, self._conduct(u[T_AIR] - T_out, self.R_out + self.R_air)

    def boundary_power(self, x, u) -> float:
        p_in1, p1, p_in2 = self.source_powers(x, u)
        return float(p_in1 - p1 + p_in2)

    def common_powers(self, x, u):
        """(P1, P2, P_in1, P_in2) for the shared edges."""
        p_in1, p1, p_in2 = self.source_powers(x, u)
        p2 = self._conduct(x[1] / self.cp_inn - x[0] / self.cp_wf, self.R2)
        return p1, p2, p_in1, p_in2

    def single_phase_energy(self, x) -> float:
        return float(self.C_wf * x[0] + self.C_inn * x[1] + self.C_out * x[self.i_out])

    def wall_states(self, T0: float):
        return self.cp_wf * T0, self.cp_inn * T0, self.cp_out * T0

    def pcm_enthalpy_at(self, T0: float) -> float:
        pcm = self.params.pcm
        phase = Phase.SOLID if T0 < pcm.T_sat else Phase.LIQUID
        return pcm_enthalpy(T0, phase, pcm)

    # -- hybrid interface (overridden by the switched model) -------------------
    def model_events(self):
        return []

    def handle_events(self, fired, t, x):
        return x

    def discrete_state(self):
        return None

    def rhs(self, t, x, u):
        return assemble_rhs(self, x, self.sink_state(x), u, t)
