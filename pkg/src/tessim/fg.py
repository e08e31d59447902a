"""Fixed-grid TES model: the PCM annulus split into n equal-width sections."""

from __future__ import annotations

import math

import numpy as np

from .graph import Edge, GraphError, Vertex
from .plant import TesNetwork, TesParameters
from .thermo import pcm_temperature


def soc_fg(h_pcm, masses, props):
    """Solid mass fraction of the grid. Works row-wise on 2-D inputs.

    ``masses`` are the section capacitances (kg) at the same instant; the
    normalizing total is their sum.
    """
    h_pcm = np.asarray(h_pcm, dtype=float)
    masses = np.asarray(masses, dtype=float)
    solid = 1.0 - np.clip(h_pcm, 0.0, props.h_f) / props.h_f
    soc = np.sum(masses * solid, axis=-1) / np.sum(masses, axis=-1)
    return np.clip(soc, 0.0, 1.0)


class FixedGridModel(TesNetwork):
    """(n+3)-state graph: working fluid, inner wall, n PCM sections, outer wall.

    Conduction edges point radially inward, so ``P_j = (T_j - T_{j-1})/R_j``
    with j the outer vertex. Section density and conductivity switch from
    solid to liquid values at the half-latent point h = h_f/2.
    """

    kind = "fg"

    def __init__(self, params: TesParameters = None, n: int = 35):
        params = params or TesParameters()
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise GraphError(f"FG model needs n >= 1 sections, got {n!r}")
        self.n = int(n)
        ids = [f"pcm{i}" for i in range(1, n + 1)]
        pcm_vertices = [Vertex(v) for v in ids]
        chain = ["inn"] + ids + ["out"]
        # e3 .. e_{n+3}: tail is the outer neighbour
        pcm_edges = [Edge(f"e{j + 3}", chain[j + 1], chain[j]) for j in range(n)]
        pcm_edges.append(Edge(f"e{n + 3}", "out", ids[-1]))
        super().__init__(params, pcm_vertices, pcm_edges)

        geo, pcm = params.geometry, params.pcm
        L = geo.length
        self.dr = geo.section_width(n)
        self.r_centers = geo.section_centers(n)
        self.volumes = geo.section_volumes(n)
        rc, half = self.r_centers, 0.5 * self.dr
        # half-section geometry factors; divide by k to get degC/W
        self.g_inner = np.log(rc / (rc - half)) / (2 * math.pi * L)
        self.g_outer = np.log((rc + half) / rc) / (2 * math.pi * L)
        self.mass_solid = pcm.rho_solid * self.volumes
        self.mass_liquid = pcm.rho_liquid * self.volumes
        self.pcm_slice = slice(2, 2 + n)

    # -- phase bookkeeping ---------------------------------------------------
    def solid_mask(self, h_pcm):
        return np.asarray(h_pcm) < 0.5 * self.params.pcm.h_f

    def section_masses(self, h_pcm):
        return np.where(self.solid_mask(h_pcm), self.mass_solid, self.mass_liquid)

    def section_conductivities(self, h_pcm):
        pcm = self.params.pcm
        return np.where(self.solid_mask(h_pcm), pcm.k_solid, pcm.k_liquid)

    def conduction_resistances(self, h_pcm):
        """R_3 .. R_{n+3} in degC/W (length n+1)."""
        k = self.section_conductivities(h_pcm)
        r_in = self.g_inner / k
        r_out = self.g_outer / k
        R = np.empty(self.n + 1)
        R[0] = self.R_inn_outer_half + r_in[0]
        R[1:-1] = r_out[:-1] + r_in[1:]
        R[-1] = r_out[-1] + self.R_out_inner_half
        return R

    # -- laws ----------------------------------------------------------------
    def capacitances(self, x):
        C = np.empty(self.n_states)
        C[0], C[1], C[-1] = self.C_wf, self.C_inn, self.C_out
        C[self.pcm_slice] = self.section_masses(x[self.pcm_slice])
        return C

    def temperatures(self, x):
        T = np.empty(self.n_states)
        T[0] = x[0] / self.cp_wf
        T[1] = x[1] / self.cp_inn
        T[-1] = x[-1] / self.cp_out
        T[self.pcm_slice] = pcm_temperature(x[self.pcm_slice], self.params.pcm)
        return T

    def powers(self, x, x_out, u):
        p1, p2, p_in1, p_in2 = self.common_powers(x, u)
        T = self.temperatures(x)
        P = np.empty(len(self.edges))
        P[0], P[1] = p1, p2
        P[2 : self.n + 3] = self._conduct(T[2:] - T[1:-1], self.conduction_resistances(x[self.pcm_slice]))
        P[-2], P[-1] = p_in1, p_in2
        return P

    def gates(self):
        return np.ones(len(self.edges), dtype=bool)

    # -- derived quantities --------------------------------------------------
    def soc(self, x):
        x = np.asarray(x)
        h = x[..., self.pcm_slice]
        return soc_fg(h, self.section_masses(h), self.params.pcm)

    def pcm_energy(self, h_pcm):
        """Storage function of the sections: integral of C(h) dh from h = 0.

        This is the energy the grid dynamics actually conserve; it differs
        from rho_sigma*V*h by the mass jump at the half-latent switch.
        """
        h_half = 0.5 * self.params.pcm.h_f
        h_pcm = np.asarray(h_pcm)
        e = np.where(
            h_pcm < h_half,
            self.mass_solid * h_pcm,
            self.mass_solid * h_half + self.mass_liquid * (h_pcm - h_half),
        )
        return float(np.sum(e))

    def stored_energy(self, x):
        return self.single_phase_energy(x) + self.pcm_energy(x[self.pcm_slice])

    def mass_discrepancy_energy(self, x) -> float:
        """rho_sigma*V*h minus the storage function, summed over sections (kJ)."""
        h = x[self.pcm_slice]
        return float(np.sum(self.section_masses(h) * h)) - self.pcm_energy(h)

    def initial_state(self, T0: float) -> np.ndarray:
        h_wf, h_inn, h_out = self.wall_states(T0)
        x = np.full(self.n_states, self.pcm_enthalpy_at(T0))
        x[0], x[1], x[-1] = h_wf, h_inn, h_out
        return x

    def state_names(self):
        return ["h_wf", "h_inn"] + [f"h_pcm{i}" for i in range(1, self.n + 1)] + ["h_out"]

    def atol(self, cfg) -> np.ndarray:
        return np.full(self.n_states, cfg.atol_enthalpy)

    def pcm_temperatures(self, x):
        return pcm_temperature(np.asarray(x)[..., self.pcm_slice], self.params.pcm)


def build_fg_graph(params: TesParameters = None, n: int = 35) -> FixedGridModel:
    return FixedGridModel(params, n)


def fg_power_flows(model: FixedGridModel, x, u) -> np.ndarray:
    """All edge powers (kW) in edge order: e1 .. e_{n+3}, in1, in2."""
    return model.powers(np.asarray(x, float), model.sink_state(x), np.asarray(u, float))
