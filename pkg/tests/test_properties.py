import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bipcomm.graph import WeightedGraph, bipartite_conductance, conductance
from bipcomm.hypercube import fourier_coefficients
from bipcomm.metric import Partition, merge_small_parts, mirror_distance, mirror_edge_inequality
from bipcomm.spectral import LAPLACIAN, SIGNLESS, dense_spectrum, extreme_eigenpairs, rayleigh
from bipcomm.theory import threshold_round
from conftest import brute_phi_tilde

weights = st.floats(min_value=0.05, max_value=20.0, allow_nan=False, allow_infinity=False)


@st.composite
def graphs(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [p for p, k in zip(pairs, keep) if k]
    assume(edges)
    w = draw(st.lists(weights, min_size=len(edges), max_size=len(edges)))
    u, v = zip(*edges)
    return WeightedGraph.from_edges(n, u, v, w)


@st.composite
def graph_and_pair(draw):
    G = draw(graphs())
    labels = draw(st.lists(st.integers(0, 2), min_size=G.n, max_size=G.n))
    S = [i for i, x in enumerate(labels) if x == 1]
    Sp = [i for i, x in enumerate(labels) if x == 2]
    assume(G.degrees[S + Sp].sum() > 0)
    return G, S, Sp


vectors = st.lists(st.floats(-5, 5, allow_nan=False, allow_infinity=False), min_size=3, max_size=3).map(np.array)


@given(graph_and_pair())
def test_pair_scores_ordered(data):
    G, S, Sp = data
    pair = bipartite_conductance(G, S, Sp)
    phi_union = conductance(G, S + Sp)
    assert 0.0 <= phi_union <= 1.0 + 1e-12
    assert pair.boundary <= pair.volume * (1 + 1e-12)
    assert pair.score >= phi_union - 1e-12
    if pair.internal == 0:
        assert pair.score == pytest.approx(phi_union, abs=1e-12)
    else:
        assert pair.score > phi_union
    assert pair.volume == pytest.approx(G.degrees[S + Sp].sum(), rel=1e-12)
    assert pair.score == pytest.approx(brute_phi_tilde(G, S, Sp), abs=1e-12)


@given(graph_and_pair())
def test_rayleigh_indicator(data):
    G, S, Sp = data
    T = S + Sp
    x = np.zeros(G.n)
    x[T] = 1.0
    assert rayleigh(G, x) == pytest.approx(conductance(G, T), rel=1e-10, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(graphs(min_n=3, max_n=9))
def test_spectrum_bounds(G):
    assume((G.degrees > 0).all())
    for which in (SIGNLESS, LAPLACIAN):
        emb = extreme_eigenpairs(G, G.n - 1, which)
        assert (emb.eigenvalues >= -1e-8).all() and (emb.eigenvalues <= 2 + 1e-8).all()
        vals, _ = dense_spectrum(G, which)
        assert np.allclose(emb.eigenvalues, vals[: G.n - 1], atol=1e-6)


@given(vectors, vectors, vectors)
def test_mirror_pseudometric(x, y, z):
    assume(min(np.linalg.norm(x), np.linalg.norm(y), np.linalg.norm(z)) > 1e-3)
    assert mirror_distance(x, y) == pytest.approx(mirror_distance(y, x), abs=1e-12)
    assert mirror_distance(x, x) == pytest.approx(0.0, abs=1e-7)
    assert mirror_distance(x, -x) == pytest.approx(0.0, abs=1e-7)
    assert mirror_distance(x, z) <= mirror_distance(x, y) + mirror_distance(y, z) + 1e-7
    assert 0.0 <= mirror_distance(x, y) <= np.sqrt(2) + 1e-12


@given(vectors, vectors)
def test_edge_inequality(x, y):
    lhs, rhs = mirror_edge_inequality(x, y)
    assert lhs <= rhs + 1e-9


@given(st.lists(st.floats(0.001, 5.0), min_size=1, max_size=20), st.floats(0.01, 10.0))
def test_merge_leaves_one_light_part(masses, t):
    P = Partition.from_labels(np.arange(len(masses)), masses)
    M = merge_small_parts(P, t)
    assert sum(m < t for m in M.masses) <= 1
    assert sum(M.masses) == pytest.approx(sum(masses))
    assert max(M.masses) <= 2 * max(max(masses), t) + 1e-9


@given(st.integers(0, 8), st.integers(0, 2**31))
def test_parseval(k, seed):
    f = np.random.default_rng(seed).standard_normal(1 << k)
    fh = fourier_coefficients(f)
    assert np.sum(fh ** 2) == pytest.approx(np.mean(f ** 2), rel=1e-10)


@settings(deadline=None)
@given(graphs(min_n=2, max_n=8), st.data())
def test_threshold_round_beats_expectation(G, data):
    fj = np.array(data.draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=G.n, max_size=G.n)))
    members = np.arange(G.n)
    live = np.flatnonzero(fj != 0)
    assume(len(live) and G.degrees[live].sum() > 0)
    r = threshold_round(G, members, fj, 0.5)
    assert r.pair.score <= r.expected_ratio + 1e-12
