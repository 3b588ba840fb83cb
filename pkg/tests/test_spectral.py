import io
import json

import numpy as np
import pytest

from bipcomm.graph import conductance
from bipcomm.spectral import (
    LAPLACIAN,
    SIGNLESS,
    ConvergenceError,
    apply_normalized_laplacian,
    apply_signless,
    dense_spectrum,
    extreme_eigenpairs,
    lanczos_smallest,
    rayleigh,
    signless_rayleigh,
)
from conftest import c4, graph, k2, random_graph


def test_apply_laplacian_examples():
    assert np.allclose(apply_normalized_laplacian(k2(), [1, 1]), [0, 0])
    assert np.allclose(apply_normalized_laplacian(k2(), [1, -1]), [2, -2])
    assert np.allclose(apply_normalized_laplacian(c4(), [1, 0, -1, 0]), [1, 0, -1, 0])


def test_apply_signless_examples():
    assert np.allclose(apply_signless(k2(), [1, -1]), [0, 0])
    assert np.allclose(apply_signless(k2(), [1, 1]), [2, 2])
    assert np.allclose(apply_signless(c4(), [1, 0, -1, 0]), [1, 0, -1, 0])


def test_operators_match_dense_matrices(rng):
    G = random_graph(rng, 30)
    A = G.to_dense()
    Dm = np.diag(G.degrees ** -0.5)
    N = Dm @ A @ Dm
    X = rng.standard_normal((30, 3))
    assert np.allclose(apply_normalized_laplacian(G, X), X - N @ X)
    assert np.allclose(apply_signless(G, X), X + N @ X)


def test_k2_signless_bottom_is_zero():
    emb = extreme_eigenpairs(k2(), 1, SIGNLESS)
    assert abs(emb.eigenvalues[0]) < 1e-10


def test_c4_laplacian_bottom():
    emb = extreme_eigenpairs(c4(), 2, LAPLACIAN)
    assert np.allclose(emb.eigenvalues, [0, 1], atol=1e-9)


def test_rayleigh_of_indicator_is_conductance(rng):
    for _ in range(10):
        G = random_graph(rng, 15)
        S = np.flatnonzero(rng.random(15) < 0.4)
        if len(S) == 0:
            continue
        x = np.zeros(15)
        x[S] = 1
        assert rayleigh(G, x) == pytest.approx(conductance(G, S), rel=1e-12)


def test_signless_rayleigh_is_mean_eigenvalue(rng):
    G = random_graph(rng, 40)
    emb = extreme_eigenpairs(G, 4, SIGNLESS)
    assert signless_rayleigh(G, emb.F) == pytest.approx(emb.eigenvalues.mean(), abs=1e-6)
    assert signless_rayleigh(k2(), np.array([[1.0], [-1.0]])) == 0.0


def test_embedding_mass_is_k(rng):
    G = random_graph(rng, 50)
    emb = extreme_eigenpairs(G, 5, SIGNLESS)
    assert emb.masses().sum() == pytest.approx(5.0, abs=1e-9)


@pytest.mark.parametrize("which", [SIGNLESS, LAPLACIAN])
def test_dense_oracle_agreement(rng, which):
    for n in (8, 20, 64):
        G = random_graph(rng, n, 0.2)
        k = min(6, n - 1)
        emb = extreme_eigenpairs(G, k, which, seed=1)
        vals, _ = dense_spectrum(G, which)
        assert np.allclose(emb.eigenvalues, vals[:k], atol=1e-6)
        assert (emb.residuals <= 1e-8 * 10).all()


def test_eigenvectors_are_eigenvectors(rng):
    G = random_graph(rng, 60, 0.1)
    emb = extreme_eigenpairs(G, 5, SIGNLESS)
    R = apply_signless(G, emb.eigenvectors) - emb.eigenvectors * emb.eigenvalues
    assert np.abs(R).max() < 1e-7
    assert np.allclose(emb.eigenvectors.T @ emb.eigenvectors, np.eye(5), atol=1e-9)


def test_degenerate_cluster_hypercube():
    from bipcomm.hypercube import HypercubeSpec, exact_spectrum, generate

    spec = HypercubeSpec.from_c(8, 1)
    G = generate(spec)
    emb = extreme_eigenpairs(G, 12, SIGNLESS)
    want = np.sort(2 - exact_spectrum(spec))[:12]
    assert np.allclose(emb.eigenvalues, want, atol=1e-8)


def test_multiplicity_of_two_counts_bipartite_components():
    G = graph(9, [(0, 1), (2, 3), (3, 4), (4, 5), (5, 2), (6, 7), (7, 8), (6, 8)])
    emb = extreme_eigenpairs(G, 3, SIGNLESS)
    assert np.sum(np.abs(emb.eigenvalues) < 1e-8) == 2


def test_sign_convention_and_determinism(rng):
    G = random_graph(rng, 30)
    a = extreme_eigenpairs(G, 3, SIGNLESS, seed=7)
    b = extreme_eigenpairs(G, 3, SIGNLESS, seed=7)
    assert np.array_equal(a.F, b.F)
    for col in a.eigenvectors.T:
        i = int(np.argmax(np.abs(col)))
        assert col[i] > 0
    c = extreme_eigenpairs(G, 3, SIGNLESS, seed=8)
    assert np.allclose(np.abs(a.F), np.abs(c.F), atol=1e-6)


def test_bad_arguments():
    with pytest.raises(ValueError):
        extreme_eigenpairs(k2(), 2)
    with pytest.raises(ValueError):
        extreme_eigenpairs(k2(), 1, which="largest")


def test_convergence_error_carries_residuals(rng):
    G = random_graph(rng, 200, 0.05)
    A = G.to_dense()
    Dm = np.diag(G.degrees ** -0.5)
    M = np.eye(200) + Dm @ A @ Dm
    with pytest.raises(ConvergenceError) as exc:
        lanczos_smallest(lambda X: M @ X, 200, 4, tol=1e-14, rng=0, basis=12, max_matvecs=40)
    assert len(exc.value.residuals) == 4


def test_embedding_tsv_and_header(rng):
    G = random_graph(rng, 10)
    emb = extreme_eigenpairs(G, 2, SIGNLESS, seed=3)
    buf = io.StringIO()
    emb.write_tsv(buf, G.labels)
    lines = buf.getvalue().splitlines()
    header = json.loads(lines[0].lstrip("# "))
    assert header["seed"] == 3 and len(header["eigenvalues"]) == 2
    assert len(lines) == 1 + 1 + G.n
