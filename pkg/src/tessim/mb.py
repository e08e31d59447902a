"""Switched moving-boundary TES model.

Six states ``[h_wf, h_inn, h_S, SOC, h_L, h_out]``. The PCM is one solid
region, one liquid region and the interface between them (vertex v4, held
at T_sat, whose state is the SOC). A four-mode FSM gates the PCM edges:

    mode 1  all liquid      P4, P8
    mode 2  freezing        P3, P5, P6, P8   (solid inside, liquid outside)
    mode 3  all solid       P3, P7
    mode 4  melting         P4, P5, P6, P7   (liquid inside, solid outside)
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import cylinder_resistance, equal_volume_radius
from .graph import Edge, Vertex
from .plant import TesNetwork, TesParameters
from .solver import Event

log = logging.getLogger(__name__)

# capacitance/geometry regularization for vanishing regions
SOC_EPS = 1e-6
# floor for region resistances once the interface is pinned to a PCM face, degC/W
R_FLOOR = 1e-7
H_SMOOTH = 0.01  # kJ/kg, rounding of the region laws at the latent plateau edges

H_WF, H_INN, H_S, SOC, H_L, H_OUT = range(6)


class FsmMode(enum.IntEnum):
    LIQUID = 1
    FREEZING = 2
    SOLID = 3
    MELTING = 4


ALLOWED_TRANSITIONS = {
    (FsmMode.LIQUID, FsmMode.FREEZING),
    (FsmMode.FREEZING, FsmMode.SOLID),
    (FsmMode.SOLID, FsmMode.MELTING),
    (FsmMode.MELTING, FsmMode.LIQUID),
    (FsmMode.FREEZING, FsmMode.MELTING),
    (FsmMode.MELTING, FsmMode.FREEZING),
}

PCM_EDGES = ("e3", "e4", "e5", "e6", "e7", "e8")

_GATE_TABLE = {
    FsmMode.LIQUID: {"e4", "e8"},
    FsmMode.FREEZING: {"e3", "e5", "e6", "e8"},
    FsmMode.SOLID: {"e3", "e7"},
    FsmMode.MELTING: {"e4", "e5", "e6", "e7"},
}


def gate_edges(mode: FsmMode) -> dict:
    """On/off for P3..P8 in the given mode."""
    on = _GATE_TABLE[FsmMode(mode)]
    return {e: e in on for e in PCM_EDGES}


def fsm_step(mode: FsmMode, soc: float, T_si: float, T_sat: float) -> Tuple[FsmMode, Optional[str]]:
    """Next mode and the reason for leaving the current one (``None`` if staying).

    When a SOC bound and a surface-temperature crossing hold together the
    SOC bound wins: the region completes before the process reverses.
    """
    mode = FsmMode(mode)
    if mode is FsmMode.LIQUID:
        if T_si < T_sat:
            return FsmMode.FREEZING, "T_si<T_sat"
    elif mode is FsmMode.FREEZING:
        if soc >= 1.0:
            if T_si > T_sat:
                log.info("simultaneous SOC=1 and T_si>T_sat; completing freeze first")
            return FsmMode.SOLID, "SOC>=1"
        if T_si > T_sat:
            return FsmMode.MELTING, "T_si>T_sat"
    elif mode is FsmMode.SOLID:
        if T_si > T_sat:
            return FsmMode.MELTING, "T_si>T_sat"
    elif mode is FsmMode.MELTING:
        if soc <= 0.0:
            if T_si < T_sat:
                log.info("simultaneous SOC=0 and T_si<T_sat; completing melt first")
            return FsmMode.LIQUID, "SOC<=0"
        if T_si < T_sat:
            return FsmMode.FREEZING, "T_si<T_sat"
    return mode, None


def on_transition_reinit(old: FsmMode, new: FsmMode, x, props) -> np.ndarray:
    """State after a mode change. Nascent regions start saturated."""
    x = np.array(x, dtype=float)
    old, new = FsmMode(old), FsmMode(new)
    if (old, new) not in ALLOWED_TRANSITIONS:
        raise ValueError(f"transition {old.value}->{new.value} is not an FSM arc")
    if new is FsmMode.FREEZING and old is FsmMode.LIQUID:
        x[H_S] = 0.0
        x[SOC] = 0.0
    elif new is FsmMode.SOLID:
        x[SOC] = 1.0
        x[H_L] = props.h_f
    elif new is FsmMode.MELTING and old is FsmMode.SOLID:
        x[H_L] = props.h_f
        x[SOC] = 1.0
    elif new is FsmMode.LIQUID:
        x[SOC] = 0.0
        x[H_S] = 0.0
    else:
        x[SOC] = min(max(x[SOC], 0.0), 1.0)
    return x


@dataclass(frozen=True)
class MbGeometry:
    """Mode-dependent PCM region layout (radii in m)."""

    mode: FsmMode
    r_int: float  # interface radius; a PCM face in modes 1 and 3
    r_solid_mid: float  # nan when the mode has no solid region
    r_liquid_mid: float  # nan when the mode has no liquid region


def interface_radius(mode: FsmMode, soc: float, params: TesParameters) -> float:
    """Outer radius of the inner region from its mass; clamped into the PCM annulus."""
    geo, pcm = params.geometry, params.pcm
    s = min(max(soc, SOC_EPS), 1.0 - SOC_EPS)
    if mode is FsmMode.FREEZING:
        r = math.sqrt(geo.r3**2 + geo.pcm_mass * s / (pcm.rho_solid * math.pi * geo.length))
    elif mode is FsmMode.MELTING:
        r = math.sqrt(geo.r3**2 + geo.pcm_mass * (1.0 - s) / (pcm.rho_liquid * math.pi * geo.length))
    elif mode is FsmMode.LIQUID:
        return geo.r3
    else:
        return geo.r_pcm_out
    return min(r, geo.r_pcm_out)


def mb_geometry(mode: FsmMode, soc: float, params: TesParameters) -> MbGeometry:
    geo = params.geometry
    r3, ro = geo.r3, geo.r_pcm_out
    mode = FsmMode(mode)
    if mode in (FsmMode.LIQUID, FsmMode.SOLID):
        mid = float(equal_volume_radius(r3, ro))
        if mode is FsmMode.LIQUID:
            return MbGeometry(mode, r3, math.nan, mid)
        return MbGeometry(mode, ro, mid, math.nan)
    r_int = interface_radius(mode, soc, params)
    inner_mid = float(equal_volume_radius(r3, r_int))
    outer_mid = float(equal_volume_radius(r_int, ro))
    if mode is FsmMode.FREEZING:
        return MbGeometry(mode, r_int, inner_mid, outer_mid)
    return MbGeometry(mode, r_int, outer_mid, inner_mid)


def mb_resistances(x, mode: FsmMode, params: TesParameters, network: "MovingBoundaryModel" = None) -> dict:
    """Total resistance (degC/W) of each gated-on PCM edge, keyed e3..e8."""
    net = network or MovingBoundaryModel(params)
    geo, pcm = params.geometry, params.pcm
    L = geo.length
    mode = FsmMode(mode)
    g = mb_geometry(mode, x[SOC], params)
    r3, ro = geo.r3, geo.r_pcm_out
    kS, kL = pcm.k_solid, pcm.k_liquid
    wall_in = net.R_inn_outer_half
    wall_out = net.R_out_inner_half

    def cyl(a, b, k):
        return max(float(cylinder_resistance(a, b, k, L)), 0.0)

    if mode is FsmMode.LIQUID:
        return {
            "e4": wall_in + cyl(r3, g.r_liquid_mid, kL),
            "e8": cyl(g.r_liquid_mid, ro, kL) + wall_out,
        }
    if mode is FsmMode.SOLID:
        return {
            "e3": wall_in + cyl(r3, g.r_solid_mid, kS),
            "e7": cyl(g.r_solid_mid, ro, kS) + wall_out,
        }
    if mode is FsmMode.FREEZING:
        return {
            "e3": wall_in + cyl(r3, g.r_solid_mid, kS),
            "e5": max(cyl(g.r_solid_mid, g.r_int, kS), R_FLOOR),
            "e6": max(cyl(g.r_int, g.r_liquid_mid, kL), R_FLOOR),
            "e8": cyl(g.r_liquid_mid, ro, kL) + wall_out,
        }
    return {
        "e4": wall_in + cyl(r3, g.r_liquid_mid, kL),
        "e6": max(cyl(g.r_liquid_mid, g.r_int, kL), R_FLOOR),
        "e5": max(cyl(g.r_int, g.r_solid_mid, kS), R_FLOOR),
        "e7": cyl(g.r_solid_mid, ro, kS) + wall_out,
    }


def _softplus(h, width=H_SMOOTH):
    return width * np.logaddexp(0.0, h / width)


class MovingBoundaryModel(TesNetwork):
    """Six-state switched graph. ``mode`` is the run-owned discrete state."""

    kind = "mb"

    def __init__(self, params: TesParameters = None, mode: FsmMode = FsmMode.LIQUID):
        params = params or TesParameters()
        pcm_vertices = [Vertex("solid"), Vertex("interface"), Vertex("liquid")]
        pcm_edges = [
            Edge("e3", "solid", "inn"),
            Edge("e4", "liquid", "inn"),
            Edge("e5", "interface", "solid"),
            Edge("e6", "liquid", "interface"),
            Edge("e7", "out", "solid"),
            Edge("e8", "out", "liquid"),
        ]
        super().__init__(params, pcm_vertices, pcm_edges)
        self.M_tot = params.geometry.pcm_mass
        self._edge_pos = {e: self.edge_index(e) for e in PCM_EDGES}
        self.transitions: List[Tuple[float, FsmMode, FsmMode, str]] = []
        self.set_mode(mode)

    def set_mode(self, mode: FsmMode):
        self.mode = FsmMode(mode)
        gates = np.ones(len(self.edges), dtype=bool)
        for e, on in gate_edges(self.mode).items():
            gates[self._edge_pos[e]] = on
        self._gates = gates
        for e, on in zip(self.edges, gates):
            e.gated = bool(on)

    def gates(self):
        return self._gates.copy()

    def capacitances(self, x):
        s = min(max(x[SOC], SOC_EPS), 1.0 - SOC_EPS)
        return np.array([
            self.C_wf,
            self.C_inn,
            self.M_tot * s,
            self.M_tot * (x[H_S] - x[H_L]),
            self.M_tot * (1.0 - s),
            self.C_out,
        ])

    def temperatures(self, x):
        pcm = self.params.pcm
        T_S, T_L = self.region_temperatures(x[H_S], x[H_L])
        return np.array([
            x[H_WF] / self.cp_wf,
            x[H_INN] / self.cp_inn,
            T_S,
            pcm.T_sat,
            T_L,
            x[H_OUT] / self.cp_out,
        ])

    def resistances(self, x):
        return mb_resistances(x, self.mode, self.params, self)

    def powers(self, x, x_out, u):
        p1, p2, p_in1, p_in2 = self.common_powers(x, u)
        T = self.temperatures(x)
        P = np.zeros(len(self.edges))
        P[0], P[1], P[-2], P[-1] = p1, p2, p_in1, p_in2
        idx = self._index
        for eid, R in self.resistances(x).items():
            j = self._edge_pos[eid]
            e = self.edges[j]
            P[j] = self._conduct(T[idx[e.tail]] - T[idx[e.head]], R)
        return P

    def surface_temperature(self, x, resistances=None) -> float:
        """Inner-pipe/PCM interface temperature from the mode's inner edge."""
        R = resistances or self.resistances(x)
        T = self.temperatures(x)
        edge = "e3" if self.mode in (FsmMode.FREEZING, FsmMode.SOLID) else "e4"
        tail = T[H_S] if edge == "e3" else T[H_L]
        P_w = (tail - T[H_INN]) / R[edge]  # W, inward positive
        return float(T[H_INN] + self.R_inn_outer_half * P_w)

    def soc(self, x):
        return np.asarray(x)[..., SOC]

    def region_masses(self, x):
        return self.M_tot * x[SOC], self.M_tot * (1.0 - x[SOC])

    def stored_energy(self, x):
        s = x[SOC]
        return self.single_phase_energy(x) + float(self.M_tot * (s * x[H_S] + (1.0 - s) * x[H_L]))

    def initial_state(self, T0: float) -> np.ndarray:
        pcm = self.params.pcm
        h_wf, h_inn, h_out = self.wall_states(T0)
        h = self.pcm_enthalpy_at(T0)
        if T0 >= pcm.T_sat:
            x = [h_wf, h_inn, 0.0, 0.0, h, h_out]
            self.set_mode(FsmMode.LIQUID)
        else:
            x = [h_wf, h_inn, h, 1.0, pcm.h_f, h_out]
            self.set_mode(FsmMode.SOLID)
        self.transitions = []
        return np.array(x, dtype=float)

    def state_names(self):
        return ["h_wf", "h_inn", "h_S", "SOC", "h_L", "h_out"]

    def atol(self, cfg) -> np.ndarray:
        a = np.full(6, cfg.atol_enthalpy)
        a[SOC] = cfg.atol_soc
        return a

    def pcm_temperatures(self, x):
        """(T_S, T_L) per sample, using the same region laws as the dynamics."""
        x = np.asarray(x)
        return np.stack(self.region_temperatures(x[..., H_S], x[..., H_L]), axis=-1)

    def region_temperatures(self, h_S, h_L):
        # the plateau corner is rounded over H_SMOOTH so Newton does not
        # chatter when a region sits exactly at saturation
        pcm = self.params.pcm
        T_S = -_softplus(-np.asarray(h_S)) / pcm.cp_solid + pcm.T_sat
        T_L = _softplus(np.asarray(h_L) - pcm.h_f) / pcm.cp_liquid + pcm.T_sat
        return T_S, T_L

    # -- hybrid interface ----------------------------------------------------
    def discrete_state(self):
        return self.mode

    def model_events(self) -> List[Event]:
        T_sat = self.params.pcm.T_sat

        def g_tsi(t, x):
            return self.surface_temperature(x) - T_sat

        if self.mode is FsmMode.LIQUID:
            return [Event("T_si<T_sat", g_tsi, direction=-1, inclusive=False)]
        if self.mode is FsmMode.FREEZING:
            return [
                Event("SOC>=1", lambda t, x: x[SOC] - 1.0, direction=+1),
                Event("T_si>T_sat", g_tsi, direction=+1, inclusive=False),
            ]
        if self.mode is FsmMode.SOLID:
            return [Event("T_si>T_sat", g_tsi, direction=+1, inclusive=False)]
        return [
            Event("SOC<=0", lambda t, x: x[SOC], direction=-1),
            Event("T_si<T_sat", g_tsi, direction=-1, inclusive=False),
        ]

    def handle_events(self, fired, t, x):
        mine = {e.name for e in self.model_events()}
        if not any(e.name in mine for e in fired):
            return x
        new, reason = fsm_step(self.mode, x[SOC], self.surface_temperature(x), self.params.pcm.T_sat)
        if reason is None:
            return x
        x = on_transition_reinit(self.mode, new, x, self.params.pcm)
        self.transitions.append((t, self.mode, new, reason))
        self.set_mode(new)
        return x


def build_mb_graph(params: TesParameters = None, mode: FsmMode = FsmMode.LIQUID) -> MovingBoundaryModel:
    return MovingBoundaryModel(params, mode)
