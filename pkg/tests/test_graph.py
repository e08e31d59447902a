import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest

from tessim.fg import FixedGridModel
from tessim.graph import (
    SINK,
    Edge,
    GraphError,
    SimulationFault,
    ThermalGraph,
    Vertex,
    assemble_rhs,
    build_incidence,
    energy_audit,
    write_graph_csv,
)
from tessim.mb import MovingBoundaryModel
from tessim.solver import SolverConfig, integrate


def conduction(R):
    return lambda xt, xh, u: (xt - xh) / R


def pair_graph(C1=2.0, C2=2.0, R=0.5):
    vs = [Vertex("a", capacitance=lambda x: C1, temperature=lambda x: x[0]),
          Vertex("b", capacitance=lambda x: C2, temperature=lambda x: x[1])]
    return ThermalGraph(vs, [Edge("e", "a", "b", conduction(R))])


def test_single_edge_incidence():
    inc = build_incidence([Vertex("v1"), Vertex("v2")], [Edge("e1", "v1", "v2")])
    np.testing.assert_array_equal(inc.M, [[1.0], [-1.0]])


def test_sinks_are_ordered_last():
    inc = build_incidence([Vertex("out", SINK), Vertex("a"), Vertex("b")],
                          [Edge("e1", "a", "out"), Edge("e2", "b", "a"), Edge("src", None, "b")])
    assert inc.vertex_ids == ["a", "b", "out"]
    assert inc.n_dynamic == 2
    np.testing.assert_array_equal(inc.M_sink, [[-1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(inc.M[:, 2], [0.0, -1.0, 0.0])


@pytest.mark.parametrize(
    "vertices, edges",
    [
        ([Vertex("a")], [Edge("e", "a", "missing")]),
        ([Vertex("a")], [Edge("e", "ghost", "a")]),
        ([Vertex("a"), Vertex("a")], []),
        ([Vertex("a"), Vertex("b")], [Edge("e", "a", "b"), Edge("e", "b", "a")]),
        ([Vertex("a")], [Edge("e", "a", "a")]),
    ],
)
def test_invalid_graphs_raise(vertices, edges):
    with pytest.raises(GraphError):
        build_incidence(vertices, edges)


def test_unknown_vertex_kind():
    with pytest.raises(GraphError):
        Vertex("a", kind="storage")


def test_fg_single_section_interior_columns_sum_to_zero():
    m = FixedGridModel(n=1)
    inc = m.incidence
    assert inc.n_dynamic == 4 and len(inc.vertex_ids) == 5
    interior = [j for j, e in enumerate(m.edges) if not e.is_source]
    sources = [j for j, e in enumerate(m.edges) if e.is_source]
    assert len(interior) == 4 and len(sources) == 2
    np.testing.assert_array_equal(inc.M[:, interior].sum(axis=0), 0.0)
    for j in sources:
        col = inc.M[:, j]
        assert (col == -1).sum() == 1 and (col != 0).sum() == 1


def test_mb_graph_shape():
    m = MovingBoundaryModel()
    assert m.incidence.M_bar.shape == (6, 10)
    assert m.n_sinks == 1
    assert sum(not e.is_source for e in m.edges) == 8


def test_isothermal_graph_is_at_rest():
    g = pair_graph()
    np.testing.assert_array_equal(assemble_rhs(g, np.array([3.0, 3.0]), np.zeros(0), np.zeros(0)), 0.0)


def test_pair_conserves_energy():
    g = pair_graph()
    xdot = assemble_rhs(g, np.array([5.0, 1.0]), np.zeros(0), np.zeros(0))
    assert xdot[0] + xdot[1] == pytest.approx(0.0, abs=1e-15)
    assert xdot[0] < 0 < xdot[1]


def test_gated_off_edge_is_never_evaluated():
    def poisoned(*args):
        raise AssertionError("gated-off edge evaluated")

    vs = [Vertex("a", capacitance=lambda x: 1.0), Vertex("b", capacitance=lambda x: 1.0)]
    g = ThermalGraph(vs, [Edge("e", "a", "b", conduction(1.0)), Edge("off", "b", "a", poisoned, gated=False)])
    ref = ThermalGraph(vs, [Edge("e", "a", "b", conduction(1.0))])
    x = np.array([2.0, 1.0])
    np.testing.assert_array_equal(assemble_rhs(g, x, np.zeros(0), np.zeros(0)),
                                  assemble_rhs(ref, x, np.zeros(0), np.zeros(0)))


def test_rhs_is_pure():
    m = FixedGridModel(n=35)
    x = m.initial_state(7.0)
    x[5] = 100.0
    u = np.array([-18.0, 18.0, 0.1])
    a = assemble_rhs(m, x, m.sink_state(x), u)
    b = assemble_rhs(m, x.copy(), m.sink_state(x), u.copy())
    assert a.tobytes() == b.tobytes()


def test_fg_fluid_vertex_rate_by_hand():
    m = FixedGridModel(n=35)
    x = m.initial_state(18.0)
    u = np.array([-18.0, 18.0, 0.10])
    xdot = m.rhs(0.0, x, u)
    C1 = 1090.0 * math.pi * 0.006**2 * 1.0  # kg of fluid
    p_in1 = 0.10 * 3.4 * (-18.0)  # kW
    p1 = 0.10 * 3.4 * 18.0
    p2 = 0.0  # wall at the fluid temperature
    assert p_in1 == pytest.approx(-6.12)
    assert xdot[0] == pytest.approx((p_in1 - p1 + p2) / C1, rel=1e-12)
    np.testing.assert_allclose(xdot[1:], 0.0, atol=1e-12)


def test_non_finite_power_names_the_edge():
    vs = [Vertex("a", capacitance=lambda x: 1.0), Vertex("b", capacitance=lambda x: 1.0)]
    g = ThermalGraph(vs, [Edge("bad", "a", "b", lambda *a: float("nan"))])
    with pytest.raises(SimulationFault) as err:
        assemble_rhs(g, np.array([1.0, 0.0]), np.zeros(0), np.zeros(0))
    assert err.value.element == "edge bad"


def test_zero_capacitance_names_the_vertex():
    g = pair_graph(C2=0.0)
    with pytest.raises(SimulationFault) as err:
        assemble_rhs(g, np.array([1.0, 0.0]), np.zeros(0), np.zeros(0))
    assert err.value.element == "vertex b"


def test_negative_capacitance_is_allowed():
    g = pair_graph(C2=-1.0)
    assert np.all(np.isfinite(assemble_rhs(g, np.array([1.0, 0.0]), np.zeros(0), np.zeros(0))))


def test_input_map_shape_checked():
    with pytest.raises(GraphError):
        ThermalGraph([Vertex("a")], [], phi=np.zeros((1, 1)), input_names=["u"])


def test_energy_audit_trivial_cases():
    g = pair_graph()
    one = SimpleNamespace(x=np.array([[1.0, 2.0]]), boundary_energy=0.0)
    assert energy_audit(one, g) == 0.0
    traj = integrate(lambda t, x: assemble_rhs(g, x, np.zeros(0), np.zeros(0)), [5.0, 1.0], (0.0, 5.0),
                     SolverConfig(rtol=1e-6, atol=1e-9))
    assert energy_audit(traj, g) < 1e-8


def test_graph_csv_dump(tmp_path):
    m = FixedGridModel(n=2)
    paths = write_graph_csv(m, tmp_path / "fg")
    assert [p.name for p in paths] == ["fg_incidence.csv", "fg_edges.csv", "fg_phi.csv"]
    rows = list(csv.reader(open(paths[0])))
    assert rows[0][:2] == ["vertex", "partition"]
    assert [r[1] for r in rows[1:]] == ["M_bar"] * 5 + ["M_sink"]
    phi = list(csv.reader(open(paths[2])))
    assert phi[0] == ["edge", "t_in", "t_air", "mdot"]
    assert phi[1] == ["e1", "0", "0", "1"]
