"""Weighted undirected graphs, edge-list ingestion and stub accounting.

All conductance bookkeeping is done at the level of stubs (half-edges):
an edge ``uv`` of weight ``w`` contributes one stub of weight ``w`` at each
endpoint, so the stub weight incident to a set equals its volume.
"""
from __future__ import annotations

import io
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from bipcomm._backend import kernels

log = logging.getLogger(__name__)

COLLAPSE_MODES = ("sum", "union", "error")


class GraphError(ValueError):
    """Invalid graph construction or malformed input."""


class EdgeListError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class WeightedGraph:
    """Immutable sparse weighted undirected graph in CSR form.

    ``indptr``/``indices``/``weights`` hold both orientations of every edge.
    ``labels[i]`` is the original identifier of dense vertex ``i``.
    """

    __slots__ = ("n", "indptr", "indices", "weights", "degrees", "total_volume", "labels", "_scaled")

    def __init__(self, indptr, indices, weights, labels: Sequence[str] | None = None, *, check: bool = True):
        self.indptr = _frozen(np.ascontiguousarray(indptr, dtype=np.int64))
        self.indices = _frozen(np.ascontiguousarray(indices, dtype=np.int64))
        self.weights = _frozen(np.ascontiguousarray(weights, dtype=np.float64))
        self.n = len(self.indptr) - 1
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        deg = np.bincount(rows, weights=self.weights, minlength=self.n)
        self.degrees = _frozen(np.ascontiguousarray(deg, dtype=np.float64))
        self.total_volume = float(self.degrees.sum())
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(self.n))
        self._scaled = None
        if check:
            self.validate()

    @classmethod
    def from_edges(cls, n: int, u, v, w=None, labels=None) -> "WeightedGraph":
        """Build from undirected edges given once each; duplicates are summed."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.ones(len(u)) if w is None else np.asarray(w, dtype=np.float64)
        if len(u) and (u == v).any():
            raise GraphError("self-loops are not allowed")
        if len(w) and (w <= 0).any():
            raise GraphError("edge weights must be strictly positive")
        A = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n)
        ).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr, A.indices, A.data, labels)

    @classmethod
    def from_dense(cls, W, labels=None) -> "WeightedGraph":
        W = np.asarray(W, dtype=np.float64)
        if not np.allclose(W, W.T, rtol=0, atol=0):
            raise GraphError("adjacency matrix must be symmetric")
        iu, ju = np.nonzero(np.triu(W, 1))
        return cls.from_edges(len(W), iu, ju, W[iu, ju], labels)

    def validate(self) -> None:
        n = self.n
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise GraphError("neighbour index out of range")
        if (self.weights <= 0).any():
            raise GraphError("edge weights must be strictly positive")
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        if (rows == self.indices).any():
            raise GraphError("self-loops are not allowed")
        A = self.to_scipy()
        if A.nnz != len(self.indices):
            raise GraphError("duplicate neighbour entries")
        if (A != A.T).nnz:
            raise GraphError("adjacency is not symmetric")
        if len(self.labels) != n:
            raise GraphError("one label per vertex required")

    # -- views -------------------------------------------------------------
    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[u], self.indptr[u + 1]
        return self.indices[a:b], self.weights[a:b]

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once, as ``(u, v, w)`` with ``u < v``."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = rows < self.indices
        return rows[keep], self.indices[keep], self.weights[keep]

    def scaled_weights(self) -> np.ndarray:
        """Entries of ``D^{-1/2} A D^{-1/2}`` aligned with ``indices``."""
        if self._scaled is None:
            rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
            with np.errstate(divide="ignore"):
                inv = np.where(self.degrees > 0, 1.0 / np.sqrt(self.degrees), 0.0)
            object.__setattr__(self, "_scaled", _frozen(self.weights * inv[rows] * inv[self.indices]))
        return self._scaled

    def isolated(self) -> np.ndarray:
        return np.flatnonzero(self.degrees <= 0)

    def subgraph(self, keep: Iterable[int]) -> tuple["WeightedGraph", np.ndarray]:
        """Induced subgraph and the array mapping new ids to old ids."""
        keep = np.unique(np.asarray(list(keep) if not isinstance(keep, np.ndarray) else keep, dtype=np.int64))
        A = self.to_scipy()[keep][:, keep].tocsr()
        A.sort_indices()
        labels = [self.labels[i] for i in keep]
        return WeightedGraph(A.indptr, A.indices, A.data, labels, check=False), keep

    def components(self) -> np.ndarray:
        _, comp = sp.csgraph.connected_components(self.to_scipy(), directed=False)
        return comp

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, edges={self.num_edges}, volume={self.total_volume:g})"


# -- ingestion -------------------------------------------------------------

def _open_text(source) -> list[str]:
    """Accept a path, raw bytes, or a text/binary stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    return io.StringIO(data.decode("utf-8")).readlines()


def _intern_order(labels: list[str]) -> list[str]:
    uniq = list(dict.fromkeys(labels))
    try:
        return sorted(uniq, key=int)
    except ValueError:
        return uniq


def load_edge_list(source, weighted: bool = True, collapse: str = "sum") -> WeightedGraph:
    """Parse ``u v [w]`` lines into an undirected simple weighted graph.

    ``collapse`` decides how repeated or reversed lines combine: ``sum``
    accumulates weights (a directed multigraph becomes edge counts),
    ``union`` keeps weight 1 for any pair seen at least once, and ``error``
    rejects duplicates.  Self-loops are dropped with a warning and vertices
    left without edges are removed; the returned graph's ``labels`` are the
    dense-id to original-id table.

    Lines that are empty or start with ``#`` or ``%`` are ignored.
    """
    if collapse not in COLLAPSE_MODES:
        raise ValueError(f"collapse must be one of {COLLAPSE_MODES}")
    rows: list[tuple[int, str, str, float]] = []
    seen_labels: list[str] = []
    for lineno, raw in enumerate(_open_text(source), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"expected 'u v [w]', got {line!r}", lineno)
        a, b = parts[0], parts[1]
        w = 1.0
        if len(parts) == 3 and weighted:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListError(f"bad weight {parts[2]!r}", lineno) from None
            if not math.isfinite(w) or w <= 0:
                raise EdgeListError(f"nonpositive or non-finite weight {parts[2]}", lineno)
        seen_labels.extend((a, b))
        if a == b:
            log.warning("line %d: dropping self-loop on %s", lineno, a)
            continue
        rows.append((lineno, a, b, w))

    acc: dict[tuple[str, str], float] = {}
    for lineno, a, b, w in rows:
        key = (a, b) if a <= b else (b, a)
        if key in acc:
            if collapse == "error":
                raise EdgeListError(f"duplicate edge {a} {b}", lineno)
            if collapse == "sum":
                acc[key] += w
        else:
            acc[key] = 1.0 if collapse == "union" else w

    connected = {x for key in acc for x in key}
    dropped = [x for x in dict.fromkeys(seen_labels) if x not in connected]
    if dropped:
        log.info("removed %d isolated vertices", len(dropped))
    labels = _intern_order([x for x in seen_labels if x in connected])
    index = {lab: i for i, lab in enumerate(labels)}
    if acc:
        u, v = zip(*((index[a], index[b]) for a, b in acc))
        w = list(acc.values())
    else:
        u, v, w = (), (), ()
    return WeightedGraph.from_edges(len(labels), u, v, w, labels)


def load_directed_edges(source, graph: WeightedGraph) -> np.ndarray:
    """Directed arcs as an ``(m, 2)`` array of dense ids of ``graph``.

    Arcs touching vertices absent from ``graph`` (isolated or stripped) and
    self-loops are skipped.
    """
    index = {lab: i for i, lab in enumerate(graph.labels)}
    arcs = []
    for lineno, raw in enumerate(_open_text(source), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EdgeListError(f"expected 'u v', got {line!r}", lineno)
        a, b = index.get(parts[0]), index.get(parts[1])
        if a is not None and b is not None and a != b:
            arcs.append((a, b))
    return np.asarray(arcs, dtype=np.int64).reshape(-1, 2)


def write_edge_list(graph: WeightedGraph, fh) -> None:
    u, v, w = graph.edges()
    for a, b, x in zip(u, v, w):
        fh.write(f"{graph.labels[a]} {graph.labels[b]} {x:.17g}\n")


# -- vertex sets and pairs ---------------------------------------------------

@dataclass(frozen=True)
class VertexSet:
    ids: tuple[int, ...]
    volume: float

    @classmethod
    def of(cls, graph: WeightedGraph, ids: Iterable[int]) -> "VertexSet":
        arr = np.unique(np.fromiter((int(i) for i in ids), dtype=np.int64))
        if len(arr) and (arr[0] < 0 or arr[-1] >= graph.n):
            raise GraphError("vertex id out of range")
        return cls(tuple(int(i) for i in arr), float(graph.degrees[arr].sum()))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __contains__(self, u) -> bool:
        return u in set(self.ids)

    def array(self) -> np.ndarray:
        return np.asarray(self.ids, dtype=np.int64)


@dataclass(frozen=True)
class BipartitePair:
    """Disjoint pair ``(S, S')`` with its stub norms.

    ``volume`` is ||C(S u S')||, ``boundary`` is ||B(S u S')||,
    ``internal`` is ||B'(S, S')|| (twice the weight of edges inside S or
    inside S'), ``bad = boundary + internal`` and ``score = bad / volume``.
    """

    S: VertexSet
    S_prime: VertexSet
    volume: float
    boundary: float
    internal: float
    cross: float
    score: float = field(default=math.nan)

    @property
    def bad(self) -> float:
        return self.boundary + self.internal

    @property
    def union_conductance(self) -> float:
        return self.boundary / self.volume

    @property
    def size(self) -> int:
        return len(self.S) + len(self.S_prime)

    def swapped(self) -> "BipartitePair":
        return BipartitePair(self.S_prime, self.S, self.volume, self.boundary, self.internal, self.cross, self.score)

    def to_dict(self, labels: Sequence[str] | None = None) -> dict:
        name = (lambda i: labels[i]) if labels is not None else (lambda i: i)
        return {
            "S": [name(i) for i in self.S],
            "S_prime": [name(i) for i in self.S_prime],
            "volume": self.volume,
            "boundary": self.boundary,
            "internal": self.internal,
            "bad": self.bad,
            "phi_tilde": self.score,
        }


def _as_ids(graph: WeightedGraph, s) -> np.ndarray:
    if isinstance(s, VertexSet):
        return s.array()
    arr = np.unique(np.asarray(list(s) if not isinstance(s, np.ndarray) else s, dtype=np.int64))
    if len(arr) and (arr[0] < 0 or arr[-1] >= graph.n):
        raise GraphError("vertex id out of range")
    return arr


def _labelled(graph: WeightedGraph, S: np.ndarray, T: np.ndarray):
    label = np.zeros(graph.n, dtype=np.int8)
    label[S] = 1
    if len(T) and (label[T] != 0).any():
        raise GraphError("S and S' overlap")
    label[T] = 2
    members = np.concatenate([S, T])
    return kernels.pair_weights(graph.indptr, graph.indices, graph.weights, members, label)


def conductance(graph: WeightedGraph, S) -> float:
    """||B(S)|| / ||C(S)||, without complementing large sets."""
    ids = _as_ids(graph, S)
    if len(ids) == 0:
        raise GraphError("empty community")
    vol, _, _, boundary = _labelled(graph, ids, np.empty(0, dtype=np.int64))
    if vol <= 0:
        raise GraphError("community has zero volume")
    return boundary / vol


def bipartite_conductance(graph: WeightedGraph, S, S_prime) -> BipartitePair:
    """Bipartite conductance of the disjoint pair ``(S, S')``."""
    a, b = _as_ids(graph, S), _as_ids(graph, S_prime)
    if len(a) + len(b) == 0:
        raise GraphError("empty community")
    vol, cross, inside, boundary = _labelled(graph, a, b)
    if vol <= 0:
        raise GraphError("community has zero volume")
    internal = 2.0 * inside
    return BipartitePair(
        VertexSet(tuple(int(i) for i in a), float(graph.degrees[a].sum())),
        VertexSet(tuple(int(i) for i in b), float(graph.degrees[b].sum())),
        volume=vol,
        boundary=boundary,
        internal=internal,
        cross=cross,
        score=(boundary + internal) / vol,
    )


def two_coloring(graph: WeightedGraph, component: np.ndarray) -> np.ndarray | None:
    """BFS 2-colouring of one component; ``None`` if it has an odd cycle."""
    color = {int(component[0]): 0}
    queue = deque([int(component[0])])
    while queue:
        u = queue.popleft()
        nbrs, _ = graph.neighbors(u)
        for v in nbrs.tolist():
            if v not in color:
                color[v] = 1 - color[u]
                queue.append(v)
            elif color[v] == color[u]:
                return None
    return np.array([color[int(u)] for u in component], dtype=np.int8)


def trivial_bipartite_components(graph: WeightedGraph, max_size: int | None = None) -> list[BipartitePair]:
    """Connected components that are bipartite, as zero-score pairs.

    These carry the eigenvalue 2 of the normalized Laplacian and are
    stripped before spectral detection.  Isolated vertices are ignored.
    Components with more than ``max_size`` vertices are left alone when a
    limit is given.
    """
    comp = graph.components()
    out = []
    for c in range(comp.max() + 1 if graph.n else 0):
        members = np.flatnonzero(comp == c)
        if len(members) < 2 or (max_size is not None and len(members) > max_size):
            continue
        colors = two_coloring(graph, members)
        if colors is None:
            continue
        out.append(bipartite_conductance(graph, members[colors == 0], members[colors == 1]))
    return out


# -- directed diagnostics ------------------------------------------------------

def authority_hub_scores(arcs: np.ndarray, pair: BipartitePair, labels: Sequence | None = None) -> dict:
    """Orientation and label-mixing statistics of the arcs crossing a pair.

    ``arcs`` is an ``(m, 2)`` array of directed edges (multiplicity kept).
    Ratios are ``None`` when no arc crosses between the two sides.
    """
    arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
    if len(pair.S) == 0 or len(pair.S_prime) == 0:
        raise GraphError("both sides of the pair must be nonempty")
    n = int(max(arcs.max(initial=-1), max(pair.S.ids), max(pair.S_prime.ids))) + 1
    side = np.zeros(n, dtype=np.int8)
    side[pair.S.array()] = 1
    side[pair.S_prime.array()] = 2
    src, dst = side[arcs[:, 0]], side[arcs[:, 1]]
    forward = (src == 1) & (dst == 2)
    backward = (src == 2) & (dst == 1)
    crossing = forward | backward
    total = int(crossing.sum())

    out_deg = np.bincount(arcs[:, 0], minlength=n)
    in_deg = np.bincount(arcs[:, 1], minlength=n)
    result = {
        "crossing_arcs": total,
        "S_out": float(out_deg[pair.S.array()].mean()),
        "S_in": float(in_deg[pair.S.array()].mean()),
        "S_prime_out": float(out_deg[pair.S_prime.array()].mean()),
        "S_prime_in": float(in_deg[pair.S_prime.array()].mean()),
        "flame": None,
        "h_value": None,
        "h_score": None,
    }
    if total == 0:
        return result
    h_value = float(forward.sum()) / total
    result["h_value"] = h_value
    result["h_score"] = 4.0 * (0.5 - h_value) ** 2
    if labels is not None:
        lab = np.asarray(labels, dtype=object)
        mixed = lab[arcs[crossing, 0]] != lab[arcs[crossing, 1]]
        result["flame"] = float(np.count_nonzero(mixed)) / total
    return result
