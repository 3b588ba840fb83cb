"""Practical detector: r-means on the embedding followed by per-cluster threshold search.

In ``bipartite`` mode the embedding uses the smallest eigenpairs of the
signless Laplacian and clusters with the mirror distance ``d'`` (x and -x are
the same point).  Each cluster centre c scores its members by
``z_u = F(u).c`` and the two tails of z form the pair.  ``classical`` mode
uses the smallest eigenpairs of L, Euclidean distance and a one-sided
threshold.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bipcomm.graph import (
    BipartitePair,
    VertexSet,
    WeightedGraph,
    bipartite_conductance,
    conductance,
    trivial_bipartite_components,
)
from bipcomm.spectral import LAPLACIAN, ORIGIN_TOL, SIGNLESS, SpectralEmbedding, extreme_eigenpairs
from bipcomm.sweep import one_sided_search, threshold_search

log = logging.getLogger(__name__)

BIPARTITE = "bipartite"
CLASSICAL = "classical"
OUTLIER = -1
ORIGIN = -2
DEFAULT_RADIUS = 2 ** -0.5


class DetectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class HeuristicConfig:
    k: int
    r: int
    iters: int = 30
    seed: int | None = 0
    radius: float = DEFAULT_RADIUS
    mode: str = BIPARTITE
    strip_trivial: bool = True
    trivial_max_size: int | None = None
    min_side: int = 2
    search: str = "both"
    max_small: int = 30
    max_symmetric: int = 3000
    threshold: bool = True
    origin_tol: float = ORIGIN_TOL
    tol: float = 1e-8

    def __post_init__(self):
        if self.k < 1 or self.r < 1 or self.iters < 1:
            raise ValueError("k, r and iters must be at least 1")
        if not 0 < self.radius <= math.sqrt(2) + 1e-12:
            raise ValueError("radius must lie in (0, sqrt(2)]")
        if self.mode not in (BIPARTITE, CLASSICAL):
            raise ValueError(f"mode must be {BIPARTITE!r} or {CLASSICAL!r}")
        if self.min_side < 1:
            raise ValueError("min_side must be at least 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ClusterState:
    """Unit centres and the cluster of every vertex.

    ``assignment`` holds a cluster index, ``OUTLIER`` for points farther than
    the radius from every centre, or ``ORIGIN`` for vertices at the origin.
    """

    centers: np.ndarray
    assignment: np.ndarray
    iterations: int
    reseeded: int = 0

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)

    def sizes(self) -> list[int]:
        return [int((self.assignment == i).sum()) for i in range(len(self.centers))]


def _distances(X: np.ndarray, C: np.ndarray, mirror: bool) -> np.ndarray:
    dots = X @ C.T
    if mirror:
        dots = np.abs(dots)
    return np.sqrt(np.clip(2.0 - 2.0 * dots, 0.0, 4.0))


def _assign(X, C, radius, mirror):
    D = _distances(X, C, mirror)
    nearest = np.argmin(D, axis=1)
    close = D[np.arange(len(X)), nearest] < radius
    return np.where(close, nearest, OUTLIER)


def random_centers(r: int, k: int, rng) -> np.ndarray:
    g = np.random.default_rng(rng).standard_normal((r, k))
    norms = np.linalg.norm(g, axis=1)
    g[norms == 0] = 1.0
    return g / np.linalg.norm(g, axis=1)[:, None]


def rmeans(F, weights, r: int, iters: int, rng=None, radius: float = DEFAULT_RADIUS, mirror: bool = True,
           origin_tol: float = ORIGIN_TOL, initial_centers=None) -> ClusterState:
    """r-means on the unit directions of F with an outlier cluster.

    Each sweep assigns every point to its nearest centre when closer than
    ``radius`` (otherwise to the outlier cluster), then moves each centre to
    the normalized mass-weighted mean of its points.  With ``mirror`` the
    distance is ``min(||x - c||, ||x + c||)`` and points are flipped onto
    the side of the old centre before averaging.  A centre whose cluster is
    empty jumps to a random outlier (or a random point if there is none).  A
    last assignment with the final centres makes clusters Voronoi-consistent.
    """
    rng = np.random.default_rng(rng)
    F = np.asarray(F, dtype=np.float64)
    norms = np.linalg.norm(F, axis=1)
    live = np.flatnonzero(norms >= origin_tol)
    if len(live) == 0:
        raise DetectionError("all points are at the origin")
    X = F[live] / norms[live, None]
    w = np.asarray(weights, dtype=np.float64)[live]
    C = random_centers(r, F.shape[1], rng) if initial_centers is None else np.array(initial_centers, dtype=np.float64)
    if C.shape != (r, F.shape[1]):
        raise ValueError("initial centres must have shape (r, k)")
    reseeded = 0
    for _ in range(iters):
        a = _assign(X, C, radius, mirror)
        outliers = np.flatnonzero(a == OUTLIER)
        new = C.copy()
        for i in range(r):
            idx = np.flatnonzero(a == i)
            if len(idx) == 0:
                pool = outliers if len(outliers) else np.arange(len(X))
                new[i] = X[pool[rng.integers(len(pool))]]
                reseeded += 1
                continue
            pts = X[idx]
            if mirror:
                signs = np.where(pts @ C[i] >= 0, 1.0, -1.0)
                pts = pts * signs[:, None]
            s = w[idx] @ pts
            ns = np.linalg.norm(s)
            if ns > 0:
                new[i] = s / ns
        C = new
    assignment = np.full(len(F), ORIGIN, dtype=np.int64)
    assignment[live] = _assign(X, C, radius, mirror)
    return ClusterState(C, assignment, iters, reseeded)


def rmeans_mirror(embedding: SpectralEmbedding, config: HeuristicConfig, rng=None, initial_centers=None) -> ClusterState:
    return rmeans(embedding.F, embedding.masses(), config.r, config.iters, rng if rng is not None else config.seed,
                  config.radius, True, config.origin_tol, initial_centers)


@dataclass(frozen=True)
class Community:
    cluster: int
    score: float
    pair: BipartitePair | None = None
    community: VertexSet | None = None
    thresholds: tuple = ()
    condition: str | None = None
    z: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.pair.size if self.pair is not None else len(self.community)

    def to_dict(self, labels=None, center=None) -> dict:
        name = (lambda i: labels[i]) if labels is not None else (lambda i: i)
        d = {"cluster": self.cluster, "score": self.score, "condition": self.condition}
        if self.pair is not None:
            d.update(self.pair.to_dict(labels))
            if len(self.thresholds) == 2:
                d["p_star"], d["n_star"] = self.thresholds
            d["size_S"], d["size_S_prime"] = len(self.pair.S), len(self.pair.S_prime)
        else:
            d["S"] = [name(i) for i in self.community]
            d["volume"] = self.community.volume
            d["phi"] = self.score
            if self.thresholds:
                d["p_star"] = self.thresholds[0]
            d["size_S"] = len(self.community)
        d["z"] = {str(name(u)): z for u, z in self.z.items()}
        if center is not None:
            d["center"] = [float(x) for x in center]
        return d


@dataclass
class DetectionResult:
    config: HeuristicConfig
    communities: list
    trivial: list
    skipped: list
    eigenvalues: np.ndarray
    state: ClusterState | None
    kept: np.ndarray
    embedding: SpectralEmbedding | None = None

    @property
    def best(self) -> Community | None:
        return self.communities[0] if self.communities else None

    def to_dict(self, labels=None) -> dict:
        centers = self.state.centers if self.state is not None else None
        return {
            "config": self.config.to_dict(),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "communities": [c.to_dict(labels, centers[c.cluster] if centers is not None else None)
                            for c in self.communities],
            "trivial": [p.to_dict(labels) for p in self.trivial],
            "skipped_clusters": list(self.skipped),
            "cluster_sizes": self.state.sizes() if self.state is not None else [],
            "centers": centers.tolist() if centers is not None else [],
        }


def _strip(G: WeightedGraph, config: HeuristicConfig):
    if not (config.strip_trivial and config.mode == BIPARTITE):
        return [], G, np.arange(G.n)
    trivial = trivial_bipartite_components(G, config.trivial_max_size)
    gone = np.zeros(G.n, dtype=bool)
    for p in trivial:
        gone[p.S.array()] = True
        gone[p.S_prime.array()] = True
    if not gone.any():
        return trivial, G, np.arange(G.n)
    H, kept = G.subgraph(np.flatnonzero(~gone))
    return trivial, H, kept


def _detect(G: WeightedGraph, config: HeuristicConfig, embedding=None, initial_centers=None) -> DetectionResult:
    trivial, H, kept = _strip(G, config)
    which = SIGNLESS if config.mode == BIPARTITE else LAPLACIAN
    if H.n == 0:
        return DetectionResult(config, [], trivial, [], np.empty(0), None, kept)
    if embedding is None:
        if config.k >= H.n:
            raise DetectionError(f"k={config.k} must be below the number of remaining vertices ({H.n})")
        embedding = extreme_eigenpairs(H, config.k, which, tol=config.tol, seed=config.seed,
                                       origin_tol=config.origin_tol)
    elif embedding.n != H.n or embedding.which != which:
        raise ValueError("embedding does not match the graph left after stripping")
    mirror = config.mode == BIPARTITE
    state = rmeans(embedding.F, embedding.masses(), config.r, config.iters, config.seed, config.radius, mirror,
                   config.origin_tol, initial_centers)
    communities, skipped = [], []
    for i in range(config.r):
        local = state.members(i)
        if len(local) == 0:
            skipped.append(i)
            continue
        z = embedding.F[local] @ state.centers[i]
        if config.mode == BIPARTITE:
            res = threshold_search(z, local, H, config.search, config.min_side, config.max_small, config.max_symmetric)
            if res is None:
                skipped.append(i)
                continue
            S, Sp = kept[res.pair.S.array()], kept[res.pair.S_prime.array()]
            pair = bipartite_conductance(G, S, Sp)
            inside = set(res.pair.S.ids) | set(res.pair.S_prime.ids)
            zmap = {int(kept[u]): float(zu) for u, zu in zip(local, z) if u in inside}
            communities.append(Community(i, pair.score, pair=pair, thresholds=res.thresholds,
                                         condition=res.condition, z=zmap))
        elif not config.threshold:
            members = kept[local]
            communities.append(Community(i, conductance(G, members), community=VertexSet.of(G, members),
                                         z={int(kept[u]): float(zu) for u, zu in zip(local, z)}))
        else:
            res = one_sided_search(z, local, H, config.min_side)
            if res is None:
                skipped.append(i)
                continue
            members = kept[res.community.array()]
            inside = set(res.community.ids)
            communities.append(Community(i, conductance(G, members), community=VertexSet.of(G, members),
                                         thresholds=res.thresholds,
                                         z={int(kept[u]): float(zu) for u, zu in zip(local, z) if u in inside}))
    communities.sort(key=lambda c: (c.score, -c.size, c.cluster))
    return DetectionResult(config, communities, trivial, skipped, np.asarray(embedding.eigenvalues), state, kept,
                           embedding)


def detect_bipartite(G: WeightedGraph, config: HeuristicConfig, embedding=None, initial_centers=None) -> DetectionResult:
    """Bipartite communities, best first.

    Bipartite connected components are split off first and reported in
    ``trivial``; the embedding is computed on the rest of the graph.
    """
    if config.mode != BIPARTITE:
        config = HeuristicConfig(**{**config.to_dict(), "mode": BIPARTITE})
    return _detect(G, config, embedding, initial_centers)


def detect_classical(G: WeightedGraph, config: HeuristicConfig, embedding=None, initial_centers=None) -> DetectionResult:
    """Ordinary communities from the smallest eigenpairs of L, best first.

    With ``config.threshold`` false the clusters are returned as they are.
    """
    if config.mode != CLASSICAL:
        config = HeuristicConfig(**{**config.to_dict(), "mode": CLASSICAL})
    return _detect(G, config, embedding, initial_centers)


def detect(G: WeightedGraph, config: HeuristicConfig, embedding=None) -> DetectionResult:
    if config.mode == BIPARTITE:
        return detect_bipartite(G, config, embedding)
    return detect_classical(G, config, embedding)


def quality_targets(eigenvalues) -> np.ndarray:
    """``10 (2 - lambda_i)`` for each computed eigenvalue of the signless operator."""
    return 10.0 * np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
