"""Graph representation of lumped thermal networks.

Vertices store energy, directed edges carry power from tail to head. With the
incidence matrix M (+1 at the tail, -1 at the head) split into dynamic rows
M_bar and sink rows, the dynamics are ``C xdot = -M_bar P``. Source edges have
no tail, so their column holds a single -1 at the head and they inject power.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

DYNAMIC = "dynamic"
SINK = "sink"


class GraphError(ValueError):
    """Invalid graph construction."""


class SimulationFault(RuntimeError):
    """Non-finite power or capacitance during RHS assembly."""

    def __init__(self, message: str, element: str):
        super().__init__(f"{message} (at {element})")
        self.element = element


@dataclass
class Vertex:
    id: str
    kind: str = DYNAMIC
    capacitance: Optional[Callable[[np.ndarray], float]] = None
    temperature: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        if self.kind not in (DYNAMIC, SINK):
            raise GraphError(f"vertex {self.id!r}: unknown kind {self.kind!r}")


@dataclass
class Edge:
    """Directed power flow. ``tail=None`` marks a source edge.

    ``power`` is called as ``power(x_tail, x_head, u_tilde)`` for interior
    edges and ``power(None, x_head, u)`` with the full input vector for
    source edges.
    """

    id: str
    tail: Optional[str]
    head: str
    power: Optional[Callable] = None
    gated: bool = True

    @property
    def is_source(self) -> bool:
        return self.tail is None


@dataclass
class IncidenceMatrix:
    M: np.ndarray
    n_dynamic: int
    vertex_ids: list
    edge_ids: list

    @property
    def M_bar(self) -> np.ndarray:
        return self.M[: self.n_dynamic]

    @property
    def M_sink(self) -> np.ndarray:
        return self.M[self.n_dynamic :]


def order_vertices(vertices: Sequence[Vertex]) -> list:
    """Dynamic vertices first, then sinks, preserving relative order."""
    return [v for v in vertices if v.kind == DYNAMIC] + [v for v in vertices if v.kind == SINK]


def build_incidence(vertices: Sequence[Vertex], edges: Sequence[Edge]) -> IncidenceMatrix:
    ordered = order_vertices(vertices)
    index = {}
    for i, v in enumerate(ordered):
        if v.id in index:
            raise GraphError(f"duplicate vertex id {v.id!r}")
        index[v.id] = i
    seen = set()
    M = np.zeros((len(ordered), len(edges)))
    for j, e in enumerate(edges):
        if e.id in seen:
            raise GraphError(f"duplicate edge id {e.id!r}")
        seen.add(e.id)
        if e.head not in index:
            raise GraphError(f"edge {e.id!r}: head {e.head!r} is not a vertex")
        if e.tail is not None:
            if e.tail not in index:
                raise GraphError(f"edge {e.id!r}: tail {e.tail!r} is not a vertex")
            if e.tail == e.head:
                raise GraphError(f"edge {e.id!r} is a self-loop")
            M[index[e.tail], j] = 1.0
        M[index[e.head], j] = -1.0
    n_dyn = sum(1 for v in ordered if v.kind == DYNAMIC)
    return IncidenceMatrix(M, n_dyn, [v.id for v in ordered], [e.id for e in edges])


class ThermalGraph:
    """A thermal network with per-element laws.

    Subclasses replace :meth:`capacitances`, :meth:`powers` and friends with
    vectorized versions; the generic implementations call the per-vertex and
    per-edge callbacks and are meant for small hand-built graphs.
    """

    def __init__(self, vertices: Sequence[Vertex], edges: Sequence[Edge],
                 phi: Optional[np.ndarray] = None, input_names: Sequence[str] = ()):
        self.vertices = order_vertices(vertices)
        self.edges = list(edges)
        self.incidence = build_incidence(self.vertices, self.edges)
        self.input_names = list(input_names)
        n_u = len(self.input_names)
        if phi is None:
            phi = np.zeros((len(self.edges), n_u))
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (len(self.edges), n_u):
            raise GraphError(f"input map has shape {phi.shape}, expected {(len(self.edges), n_u)}")
        self.phi = phi
        self._index = {v: i for i, v in enumerate(self.incidence.vertex_ids)}
        self._edge_index = {e: j for j, e in enumerate(self.incidence.edge_ids)}
        self._source_mask = np.array([e.is_source for e in self.edges], dtype=bool)
        self._sink_mask = np.array(
            [(not e.is_source) and self._index[e.head] >= self.n_states for e in self.edges], dtype=bool
        )

    @property
    def n_states(self) -> int:
        return self.incidence.n_dynamic

    @property
    def n_sinks(self) -> int:
        return len(self.vertices) - self.n_states

    @property
    def vertex_ids(self) -> list:
        return self.incidence.vertex_ids

    @property
    def edge_ids(self) -> list:
        return self.incidence.edge_ids

    def vertex_index(self, vid: str) -> int:
        return self._index[vid]

    def edge_index(self, eid: str) -> int:
        return self._edge_index[eid]

    # -- laws --------------------------------------------------------------
    def gates(self) -> np.ndarray:
        return np.array([e.gated for e in self.edges], dtype=bool)

    def capacitances(self, x: np.ndarray) -> np.ndarray:
        return np.array([v.capacitance(x) for v in self.vertices[: self.n_states]], dtype=float)

    def temperatures(self, x: np.ndarray) -> np.ndarray:
        return np.array([v.temperature(x) for v in self.vertices[: self.n_states]], dtype=float)

    def sink_state(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.n_sinks)

    def powers(self, x: np.ndarray, x_out: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Power on every edge; gated-off edges are not evaluated and read 0."""
        u = np.asarray(u, dtype=float)
        u_tilde = self.phi @ u if u.size else np.zeros(len(self.edges))
        full = np.concatenate([x, x_out])
        P = np.zeros(len(self.edges))
        for j, e in enumerate(self.edges):
            if not e.gated:
                continue
            x_head = full[self._index[e.head]]
            if e.is_source:
                P[j] = e.power(None, x_head, u)
            else:
                P[j] = e.power(full[self._index[e.tail]], x_head, u_tilde[j])
        return P

    def boundary_power(self, x: np.ndarray, u: np.ndarray) -> float:
        """Net power entering through source edges minus power leaving to sinks."""
        P = self.powers(x, self.sink_state(x), u) * self.gates()
        return float(P[self._source_mask].sum() - P[self._sink_mask].sum())

    def stored_energy(self, x: np.ndarray) -> float:
        """Energy held by the dynamic vertices; exact for constant capacitances."""
        return float(np.dot(self.capacitances(x), x))


def assemble_rhs(graph: ThermalGraph, x: np.ndarray, x_out: np.ndarray, u: np.ndarray,
                 t: float = 0.0) -> np.ndarray:
    """State derivative ``C^-1 (-M_bar P)`` over the gated-on edges."""
    gates = graph.gates()
    P = np.where(gates, graph.powers(x, x_out, u), 0.0)
    if not np.all(np.isfinite(P)):
        j = int(np.flatnonzero(~np.isfinite(P))[0])
        raise SimulationFault(f"non-finite power {P[j]!r} at t={t}", f"edge {graph.edge_ids[j]}")
    C = graph.capacitances(x)
    bad = ~np.isfinite(C) | (C == 0.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise SimulationFault(f"invalid capacitance {C[i]!r} at t={t}", f"vertex {graph.vertex_ids[i]}")
    return -(graph.incidence.M_bar @ P) / C


def energy_audit(trajectory, graph: ThermalGraph) -> float:
    """|change in stored energy - integrated boundary power| in kJ.

    ``trajectory`` needs ``x`` (samples x states) and ``boundary_energy``
    (the integrated net boundary power over the run).
    """
    x = np.asarray(trajectory.x)
    if len(x) < 2:
        return 0.0
    delta = graph.stored_energy(x[-1]) - graph.stored_energy(x[0])
    return abs(delta - float(trajectory.boundary_energy))


def write_graph_csv(graph: ThermalGraph, prefix) -> list:
    """Dump M (with the dynamic/sink partition), the edge table and the input map."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    inc = graph.incidence
    paths = []

    path = prefix.with_name(prefix.name + "_incidence.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "partition"] + inc.edge_ids)
        for i, vid in enumerate(inc.vertex_ids):
            part = "M_bar" if i < inc.n_dynamic else "M_sink"
            w.writerow([vid, part] + [f"{m:+.0f}" if m else "0" for m in inc.M[i]])
    paths.append(path)

    path = prefix.with_name(prefix.name + "_edges.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "tail", "head", "source", "gated"])
        gates = graph.gates()
        for e, g in zip(graph.edges, gates):
            w.writerow([e.id, e.tail or "", e.head, int(e.is_source), int(g)])
    paths.append(path)

    path = prefix.with_name(prefix.name + "_phi.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge"] + graph.input_names)
        for eid, row in zip(inc.edge_ids, graph.phi):
            w.writerow([eid] + [f"{v:g}" for v in row])
    paths.append(path)
    return paths
