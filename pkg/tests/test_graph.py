import io
import itertools

import numpy as np
import pytest

from bipcomm.graph import (
    EdgeListError,
    GraphError,
    WeightedGraph,
    authority_hub_scores,
    bipartite_conductance,
    conductance,
    load_directed_edges,
    load_edge_list,
    trivial_bipartite_components,
    write_edge_list,
)
from conftest import all_disjoint_pairs, brute_phi, brute_phi_tilde, c4, graph, k2, random_graph, stub_norms, triangle


def weight(G, a, b):
    i, j = G.labels.index(a), G.labels.index(b)
    return G.to_dense()[i, j]


def test_load_reversed_edges_sum():
    G = load_edge_list(b"0 1\n1 0\n", collapse="sum")
    assert G.n == 2 and weight(G, "0", "1") == 2.0


def test_load_single_edge():
    G = load_edge_list(b"0 1\n")
    assert G.n == 2 and weight(G, "0", "1") == 1.0


def test_load_union_is_idempotent():
    G = load_edge_list(b"0 1\n1 2\n0 1\n", collapse="union")
    assert G.num_edges == 2
    assert weight(G, "0", "1") == 1.0 and weight(G, "1", "2") == 1.0


def test_load_weighted_and_comments():
    G = load_edge_list(io.StringIO("# header\n\na b 2.5\nb c 0.5\n"))
    assert weight(G, "a", "b") == 2.5 and weight(G, "b", "c") == 0.5
    assert G.labels == ("a", "b", "c")


def test_load_rejects_bad_weight_with_line_number():
    with pytest.raises(EdgeListError) as exc:
        load_edge_list(b"0 1\n1 2 -3\n")
    assert exc.value.line == 2
    with pytest.raises(EdgeListError) as exc:
        load_edge_list(b"0 1 2 3\n")
    assert exc.value.line == 1


def test_load_duplicate_error_mode():
    with pytest.raises(EdgeListError):
        load_edge_list(b"0 1\n1 0\n", collapse="error")


def test_self_loops_dropped_and_isolated_removed():
    G = load_edge_list(b"0 0\n1 2\n")
    assert G.n == 2 and set(G.labels) == {"1", "2"}


def test_write_round_trip():
    G = load_edge_list(b"x y 2\ny z 3\nz x 1\n")
    buf = io.StringIO()
    write_edge_list(G, buf)
    H = load_edge_list(buf.getvalue().encode())
    assert H.labels == G.labels
    assert np.array_equal(H.to_dense(), G.to_dense())


def test_asymmetric_csr_rejected():
    with pytest.raises(GraphError):
        WeightedGraph([0, 1, 1], [1], [1.0])


def test_conductance_examples():
    assert conductance(k2(), [0]) == 1.0
    assert conductance(triangle(), [0]) == 1.0
    assert conductance(c4(), [0, 1]) == 0.5
    with pytest.raises(GraphError, match="empty community"):
        conductance(k2(), [])


def test_bipartite_conductance_examples():
    assert bipartite_conductance(c4(), [0, 2], [1, 3]).score == 0.0
    assert bipartite_conductance(triangle(), [0], [1]).score == 0.5
    assert bipartite_conductance(k2(), [0], [1]).score == 0.0
    with pytest.raises(GraphError):
        bipartite_conductance(c4(), [0, 1], [1])
    with pytest.raises(GraphError):
        bipartite_conductance(c4(), [], [])


def test_triangle_optimum_is_a_vertex_against_an_edge():
    # ({u}, {v, w}) beats the single-vertex pairs: 2 internal stubs out of 6
    G = triangle()
    best = min(brute_phi_tilde(G, S, Sp) for S, Sp in all_disjoint_pairs(3))
    assert best == pytest.approx(1 / 3)
    assert bipartite_conductance(G, [0], [1, 2]).score == pytest.approx(1 / 3)


def test_trivial_components():
    G = graph(5, [(0, 1), (2, 3), (3, 4), (2, 4)])
    pairs = trivial_bipartite_components(G)
    assert len(pairs) == 1
    assert {pairs[0].S.ids, pairs[0].S_prime.ids} == {(0,), (1,)}
    assert pairs[0].score == 0.0
    assert trivial_bipartite_components(triangle()) == []
    (p,) = trivial_bipartite_components(c4())
    assert sorted(p.S.ids + p.S_prime.ids) == [0, 1, 2, 3] and p.score == 0.0


def test_authority_hub_examples():
    G = c4()
    pair = bipartite_conductance(G, [0, 2], [1, 3])
    forward = np.array([[0, 1], [2, 1], [2, 3], [0, 3]])
    h = authority_hub_scores(forward, pair)
    assert h["h_value"] == 1.0 and h["h_score"] == 1.0
    even = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    h = authority_hub_scores(even, pair, labels=["a", "a", "b", "b"])
    assert h["h_value"] == 0.5 and h["h_score"] == 0.0
    assert h["flame"] == 0.5
    assert h["S_out"] == 1.0 and h["S_prime_in"] == 1.0


def test_authority_hub_without_crossing():
    pair = bipartite_conductance(c4(), [0, 2], [1, 3])
    h = authority_hub_scores(np.array([[0, 2]]), pair)
    assert h["h_value"] is None and h["flame"] is None


def test_directed_loader_maps_to_dense_ids():
    G = load_edge_list(b"a b\nb c\n")
    arcs = load_directed_edges(b"a b\nc b\nq a\n", G)
    assert arcs.tolist() == [[0, 1], [2, 1]]


def test_exhaustive_stub_enumeration_small(rng):
    for n in range(2, 6):
        G = random_graph(rng, n, 0.6)
        for S, Sp in all_disjoint_pairs(n):
            pair = bipartite_conductance(G, S, Sp)
            vol, boundary, internal = stub_norms(G, S, Sp)
            assert pair.volume == pytest.approx(vol, rel=1e-12)
            assert pair.boundary == pytest.approx(boundary, rel=1e-12, abs=1e-12)
            assert pair.internal == pytest.approx(internal, rel=1e-12, abs=1e-12)
            if S:
                assert conductance(G, S) == pytest.approx(brute_phi(G, S), rel=1e-12, abs=1e-15)


def test_all_graphs_on_four_vertices_unit_weights():
    pairs = list(itertools.combinations(range(4), 2))
    for mask in range(1, 1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        G = graph(4, edges)
        for S, Sp in all_disjoint_pairs(4):
            if G.degrees[S + Sp].sum() == 0:
                continue
            assert bipartite_conductance(G, S, Sp).score == pytest.approx(brute_phi_tilde(G, S, Sp), abs=1e-15)
