"""Normalized Laplacian operators, extreme eigenpairs and the spectral embedding.

The eigensolver is a block Lanczos iteration with full reorthogonalization
and thick restarts.  It only needs products with the normalized adjacency
``D^{-1/2} A D^{-1/2}``, applied matrix-free from the CSR arrays.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from bipcomm._backend import kernels
from bipcomm.graph import GraphError, WeightedGraph

log = logging.getLogger(__name__)

SIGNLESS = "smallest_of_signless"
LAPLACIAN = "smallest_of_laplacian"
ORIGIN_TOL = 1e-8
DEFAULT_TOL = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


def _normalized_adjacency(G: WeightedGraph, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != G.n:
        raise ValueError(f"vector length {X.shape[0]} does not match n={G.n}")
    flat = X.ndim == 1
    X2 = np.ascontiguousarray(X.reshape(G.n, -1))
    Y = kernels.csr_matmat(G.indptr, G.indices, G.scaled_weights(), X2)
    return Y[:, 0] if flat else Y


def apply_normalized_laplacian(G: WeightedGraph, x) -> np.ndarray:
    """``L x = x - D^{-1/2} A D^{-1/2} x`` in O(e)."""
    x = np.asarray(x, dtype=np.float64)
    return x - _normalized_adjacency(G, x)


def apply_signless(G: WeightedGraph, x) -> np.ndarray:
    """``L~ x = x + D^{-1/2} A D^{-1/2} x``, i.e. ``2x - Lx``."""
    x = np.asarray(x, dtype=np.float64)
    return x + _normalized_adjacency(G, x)


def rayleigh(G: WeightedGraph, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    u, v, w = G.edges()
    den = float(np.dot(x * x, G.degrees))
    if den <= 0:
        raise ValueError("zero denominator in Rayleigh quotient")
    return float(np.dot(w, (x[u] - x[v]) ** 2)) / den


def signless_rayleigh(G: WeightedGraph, F) -> float:
    """Sum of ``w ||F(u) + F(v)||^2`` over edges over ``sum d(u) ||F(u)||^2``."""
    F = np.asarray(F, dtype=np.float64).reshape(G.n, -1)
    u, v, w = G.edges()
    den = float(np.dot((F * F).sum(axis=1), G.degrees))
    if den <= 0:
        raise ValueError("zero denominator in Rayleigh quotient")
    return float(np.dot(w, ((F[u] + F[v]) ** 2).sum(axis=1))) / den


# -- eigensolver ---------------------------------------------------------------

def _orthonormal_block(V: np.ndarray, Q: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """Orthonormalize the columns of V against Q and each other.

    Columns that collapse are replaced by random directions; fewer columns
    come back once the basis fills the whole space.
    """
    room = n - Q.shape[1]
    V = np.array(V[:, :room], dtype=np.float64)
    if V.shape[1] == 0:
        return np.empty((n, 0))
    scale = np.linalg.norm(V, axis=0)
    for _ in range(2):
        if Q.shape[1]:
            V -= Q @ (Q.T @ V)
    U, R = np.linalg.qr(V)
    diag = np.abs(np.diag(R))
    if (diag > 1e-10 * np.maximum(scale, 1e-300)).all():
        U -= Q @ (Q.T @ U)
        U, _ = np.linalg.qr(U)
        return U
    # rank deficient block: fall back to one column at a time
    out = []
    for j in range(V.shape[1]):
        v = V[:, j].copy()
        for attempt in range(4):
            ref = np.linalg.norm(v)
            for _ in range(2):
                if Q.shape[1]:
                    v -= Q @ (Q.T @ v)
                for q in out:
                    v -= q * (q @ v)
            norm = np.linalg.norm(v)
            if ref > 0 and norm > 1e-10 * ref:
                out.append(v / norm)
                break
            v = rng.standard_normal(n)
    if not out:
        return np.empty((n, 0))
    return np.column_stack(out)


def lanczos_smallest(matvec, n: int, k: int, *, tol: float = DEFAULT_TOL, rng=None,
                     block: int | None = None, basis: int | None = None, max_matvecs: int | None = None):
    """k smallest eigenpairs of a symmetric operator given by ``matvec``.

    ``matvec`` maps an ``(n, b)`` block to an ``(n, b)`` block.  Returns
    ``(values, vectors, residual_norms)`` with values ascending.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(rng)
    b = min(n, block or max(k, 2))
    m = min(n, basis or max(k + 6 * b, 2 * k + 16))
    max_matvecs = max_matvecs or max(5000, 200 * m)

    Qbuf = np.empty((n, m))
    AQbuf = np.empty((n, m))
    filled = 0
    V = rng.standard_normal((n, b))
    used = 0
    best = np.full(k, np.inf)
    while True:
        while filled < m:
            V = _orthonormal_block(V, Qbuf[:, :filled], rng, n)[:, : m - filled]
            c = V.shape[1]
            if c == 0:
                break
            W = matvec(np.ascontiguousarray(V))
            used += c
            Qbuf[:, filled:filled + c] = V
            AQbuf[:, filled:filled + c] = W
            filled += c
            V = W
        Q, AQ = Qbuf[:, :filled], AQbuf[:, :filled]
        H = Q.T @ AQ
        theta, Y = np.linalg.eigh(0.5 * (H + H.T))
        X = Q @ Y
        AX = AQ @ Y
        R = AX - X * theta
        res = np.linalg.norm(R, axis=0)
        if (res[:k] <= tol).all():
            # confirm against a fresh product; the recurrence can drift
            R_true = matvec(np.ascontiguousarray(X[:, :k])) - X[:, :k] * theta[:k]
            used += k
            res_true = np.linalg.norm(R_true, axis=0)
            if (res_true <= tol).all():
                return theta[:k], X[:, :k], res_true
            res[:k] = res_true
        best = np.minimum(best, res[:k])
        if Q.shape[1] >= n:
            raise ConvergenceError("full basis reached without meeting tolerance", best)
        if used >= max_matvecs:
            raise ConvergenceError(f"no convergence after {used} operator applications", best)
        keep = min(Q.shape[1] - b, k + max(b // 2, 1))
        Qbuf[:, :keep] = X[:, :keep]
        AQbuf[:, :keep] = AX[:, :keep]
        filled = keep
        pending = [i for i in range(len(theta)) if res[i] > tol][:b]
        V = R[:, pending] if pending else rng.standard_normal((n, b))


# -- embedding -----------------------------------------------------------------

@dataclass(frozen=True)
class SpectralEmbedding:
    """k eigenpairs of ``L~`` (or ``L``) and the degree-scaled vertex map.

    ``eigenvalues`` are those of the operator named by ``which``, ascending.
    ``F[u, i] = e_i(u) / sqrt(d(u))``.
    """

    which: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    F: np.ndarray
    degrees: np.ndarray
    residuals: np.ndarray
    seed: int | None = None
    origin_tol: float = ORIGIN_TOL
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.F.shape[1]

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.F, axis=1)

    @property
    def at_origin(self) -> np.ndarray:
        return self.norms < self.origin_tol

    @property
    def unit(self) -> np.ndarray:
        """``F(u)/||F(u)||``; rows at the origin are zero."""
        norms = self.norms
        out = np.zeros_like(self.F)
        ok = norms >= self.origin_tol
        out[ok] = self.F[ok] / norms[ok, None]
        return out

    @property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """The corresponding eigenvalues of L (``2 - value`` for the signless operator)."""
        return 2.0 - self.eigenvalues if self.which == SIGNLESS else self.eigenvalues

    def masses(self) -> np.ndarray:
        return self.degrees * (self.F * self.F).sum(axis=1)

    def support_counts(self, threshold: float = 1e-4) -> list[tuple[int, int]]:
        return [(int((f > threshold).sum()), int((-f > threshold).sum())) for f in self.F.T]

    def with_F(self, F: np.ndarray) -> "SpectralEmbedding":
        """Same eigenvalues, different vertex map (used after projections or sign flips)."""
        return SpectralEmbedding(self.which, self.eigenvalues, self.eigenvectors, np.asarray(F, dtype=np.float64),
                                 self.degrees, self.residuals, self.seed, self.origin_tol, dict(self.meta))

    def header(self) -> dict:
        return {
            "which": self.which,
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
            "seed": self.seed,
            "origin_tol": self.origin_tol,
            "at_origin": int(self.at_origin.sum()),
        }

    def write_tsv(self, fh, labels=None) -> None:
        fh.write("# " + json.dumps(self.header()) + "\n")
        k = self.k
        cols = [f"lambda_{i + 1}" for i in range(k)] + [f"f_{i + 1}" for i in range(k)]
        fh.write("vertex\t" + "\t".join(cols) + "\n")
        lam = "\t".join(f"{x:.12g}" for x in self.eigenvalues)
        for u in range(self.n):
            name = labels[u] if labels is not None else str(u)
            fh.write(f"{name}\t{lam}\t" + "\t".join(f"{x:.12g}" for x in self.F[u]) + "\n")


def _fix_signs(E: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(E), axis=0)
    signs = np.sign(E[idx, np.arange(E.shape[1])])
    signs[signs == 0] = 1.0
    return E * signs


def extreme_eigenpairs(G: WeightedGraph, k: int, which: str = SIGNLESS, tol: float = DEFAULT_TOL,
                       seed: int | None = 0, origin_tol: float = ORIGIN_TOL) -> SpectralEmbedding:
    """The k smallest eigenpairs of ``L~`` (or of ``L``) and the embedding F.

    Deterministic for a fixed seed.  Raises ``ConvergenceError`` when the
    residual tolerance cannot be met within the iteration budget.
    """
    if which not in (SIGNLESS, LAPLACIAN):
        raise ValueError(f"which must be {SIGNLESS!r} or {LAPLACIAN!r}")
    if not 1 <= k < G.n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={G.n}")
    if (G.degrees <= 0).any():
        raise GraphError("graph has isolated vertices; remove them first")
    sign = 1.0 if which == SIGNLESS else -1.0

    def matvec(X):
        return X + sign * _normalized_adjacency(G, X)

    vals, vecs, res = lanczos_smallest(matvec, G.n, k, tol=tol, rng=seed)
    vecs = _fix_signs(vecs)
    F = vecs / np.sqrt(G.degrees)[:, None]
    emb = SpectralEmbedding(which, vals, vecs, F, np.asarray(G.degrees), res, seed, origin_tol)
    log.debug("eigenpairs %s: %s (max residual %.2e)", which, np.round(vals, 6), res.max())
    return emb


def dense_spectrum(G: WeightedGraph, which: str = LAPLACIAN) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of L (or L~) with numpy; the reference oracle."""
    N = G.to_dense()
    inv = 1.0 / np.sqrt(G.degrees)
    N = N * inv[:, None] * inv[None, :]
    M = np.eye(G.n) - N if which == LAPLACIAN else np.eye(G.n) + N
    return np.linalg.eigh(M)
