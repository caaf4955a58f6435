import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import toy_cable
from minigrid.netmodel import (AdmittanceMatrix, CableCatalog, CableSpec, Edge, NetworkModel,
                               NumericError, TopologyError, build_admittance_matrix,
                               cable_series_admittance, default_catalog, network_from_edges,
                               star_network, to_per_unit)
from oracles import dense_admittance


def test_catalog_has_nine_sizes(catalog):
    assert catalog.sizes == [4, 6, 10, 16, 25, 35, 50, 70, 95]


def test_catalog_50mm2_row(catalog):
    c = catalog[50]
    assert c.admittance_per_km == pytest.approx(1.244 - 0.122j)
    assert c.cost_per_km == 28510


def test_catalog_unknown_size(catalog):
    with pytest.raises(KeyError):
        catalog[3]


def test_catalog_csv_round_trip(tmp_path, catalog):
    path = tmp_path / "cables.csv"
    path.write_text(catalog.to_csv())
    assert CableCatalog.from_csv(path) == catalog


def test_catalog_rejects_duplicate_sizes():
    c = CableSpec(4, 0.1 - 0.001j, 100)
    with pytest.raises(ValueError):
        CableCatalog([c, c])


@pytest.mark.parametrize("kwargs", [dict(size_mm2=0, admittance_per_km=1, cost_per_km=1),
                                    dict(size_mm2=4, admittance_per_km=1, cost_per_km=-1),
                                    dict(size_mm2=4, admittance_per_km=-1j, cost_per_km=1)])
def test_cable_validation(kwargs):
    with pytest.raises(ValueError):
        CableSpec(**kwargs)


def test_series_admittance_scales_inversely_with_length(catalog):
    c = catalog[16]
    assert cable_series_admittance(c, 0.5) == pytest.approx(2 * c.admittance_per_km)
    with pytest.raises(ValueError):
        cable_series_admittance(c, 0.0)


def test_per_unit_base():
    # Z_base = 400^2 / 100e3 = 1.6 ohm, so 6.25 S is 10 pu
    assert to_per_unit(6.25, 400, 100) == pytest.approx(10.0)


def test_toy_line_admittance():
    Y = build_admittance_matrix(NetworkModel(2, (Edge(0, 1, toy_cable(10.0), 1.0),)))
    assert np.allclose(Y.Y, [[10, -10], [-10, 10]])
    assert Y.m == 1
    assert np.allclose(Y.YLL, [[10]])
    assert np.allclose(Y.Y0L, [[-10]])


def test_admittance_is_read_only():
    Y = build_admittance_matrix(star_network(2, default_catalog()[25], 0.3))
    with pytest.raises(ValueError):
        Y.Y[0, 0] = 0


def test_disconnected_network_rejected(catalog):
    with pytest.raises(TopologyError):
        NetworkModel(3, (Edge(0, 1, catalog[4], 0.1),))


def test_edge_out_of_range(catalog):
    with pytest.raises(TopologyError):
        NetworkModel(2, (Edge(0, 2, catalog[4], 0.1),))


def test_self_loop_and_zero_length(catalog):
    with pytest.raises(TopologyError):
        Edge(1, 1, catalog[4], 0.1)
    with pytest.raises(ValueError):
        Edge(0, 1, catalog[4], 0.0)


def test_ill_conditioned_matrix_rejected():
    strong = CableSpec(1, 1e9, 0)
    weak = CableSpec(2, 1e-9, 0)
    net = NetworkModel(3, (Edge(0, 1, strong, 1.0), Edge(1, 2, weak, 1.0)))
    with pytest.raises(NumericError):
        build_admittance_matrix(net)


def test_star_parents_and_radial(catalog):
    net = star_network(3, catalog[35], 0.4)
    assert net.is_radial
    assert net.m == 3
    assert {n: p for n, (p, _) in net.parent_edges().items()} == {1: 0, 2: 0, 3: 0}


def test_with_cable_changes_every_edge(catalog):
    net = star_network(2, catalog[35], 0.4).with_cable(catalog[4], 0.9)
    assert all(e.cable == catalog[4] and e.length_km == 0.9 for e in net.edges)


@st.composite
def radial_networks(draw, max_nodes=6):
    n = draw(st.integers(2, max_nodes))
    cat = default_catalog()
    edges = []
    for j in range(1, n):
        parent = draw(st.integers(0, j - 1))
        size = draw(st.sampled_from(cat.sizes))
        length = draw(st.floats(0.1, 1.0))
        edges.append((parent, j, cat[size], length))
    return network_from_edges(n, edges)


@settings(max_examples=40, deadline=None)
@given(radial_networks())
def test_admittance_matches_dense_stamp(net):
    Y = build_admittance_matrix(net)
    ref = dense_admittance(net.node_count, [
        (e.i, e.j, to_per_unit(cable_series_admittance(e.cable, e.length_km), net.v_base,
                               net.s_base)) for e in net.edges])
    assert np.allclose(Y.Y, ref)
    assert np.allclose(Y.Y, Y.Y.T)
    assert np.allclose(Y.Y.sum(axis=1), 0)
    assert isinstance(Y, AdmittanceMatrix)


@settings(max_examples=30, deadline=None)
@given(radial_networks())
def test_parent_map_is_a_spanning_tree(net):
    parents = net.parent_edges()
    assert sorted(parents) == list(range(1, net.node_count))
    for n in parents:  # every node walks back to the slack
        seen = set()
        while n != 0:
            assert n not in seen
            seen.add(n)
            n = parents[n][0]
