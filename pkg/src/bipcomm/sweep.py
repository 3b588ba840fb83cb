"""Threshold rounding of one-dimensional vertex scores.

``trevisan_sweep`` cuts ``{f < -t}`` against ``{f > t}`` for every realized
``t``; ``cheeger_sweep`` takes prefixes of the vertices sorted by f; and
``threshold_search`` is the two-sided search used on r-means clusters,
where ``S = {z >= p*}`` and ``S' = {z <= n*}``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from bipcomm._backend import kernels
from bipcomm.graph import BipartitePair, GraphError, VertexSet, WeightedGraph, bipartite_conductance, conductance

SMALL = "small"
SYMMETRIC = "symmetric"
SEARCH_MODES = ("both", SMALL, SYMMETRIC)
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SweepResult:
    """Best cut of a sweep with its full curve.

    ``curve`` rows are ``(threshold, score, |S|, |S'|)``; for the two-sided
    search they are ``(p*, n*, score, |S|, |S'|)``.  ``pair`` is set for the
    bipartite sweeps and ``community`` for the classical ones.
    """

    score: float
    thresholds: tuple
    curve: np.ndarray
    pair: BipartitePair | None = None
    community: VertexSet | None = None
    condition: str | None = None
    extra: dict = field(default_factory=dict)

    def write_curve(self, fh) -> None:
        w = csv.writer(fh)
        if self.curve.shape[1] == 5:
            w.writerow(["p_star", "n_star", "score", "size_S", "size_S_prime"])
        else:
            w.writerow(["threshold", "score", "size_S", "size_S_prime"])
        for row in self.curve:
            w.writerow([f"{x:.12g}" for x in row[:-2]] + [int(row[-2]), int(row[-1])])


def _group_ends(sorted_keys: np.ndarray) -> np.ndarray:
    """Positions i such that the prefix [0, i] ends a run of equal keys."""
    if len(sorted_keys) == 0:
        return np.empty(0, dtype=np.int64)
    last = np.ones(len(sorted_keys), dtype=bool)
    last[:-1] = sorted_keys[1:] != sorted_keys[:-1]
    return np.flatnonzero(last)


def _signed_prefix_scores(G: WeightedGraph, order: np.ndarray, side: np.ndarray):
    """Cumulative volume and cross weight as vertices of ``order`` join their side."""
    side8 = np.ascontiguousarray(side, dtype=np.int8)
    _, opp = kernels.sweep_links(G.indptr, G.indices, G.weights, np.ascontiguousarray(order, dtype=np.int64), side8)
    vol = np.cumsum(G.degrees[order])
    cross = np.cumsum(opp)
    return vol, cross


def trevisan_sweep(G: WeightedGraph, f) -> SweepResult:
    """Best ``({f >= t}, {f <= -t})`` over all realized ``t > 0``.

    ``f`` is the degree-scaled vector ``D^{-1/2} e``.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (G.n,):
        raise ValueError("f must have one entry per vertex")
    live = np.flatnonzero(f != 0)
    if len(live) == 0:
        raise ValueError("f is identically zero")
    a = np.abs(f[live])
    order = live[np.argsort(-a, kind="stable")]
    keys = np.abs(f[order])
    side = np.zeros(len(order), dtype=np.int8)
    side[f[order] > 0] = 1
    vol, cross = _signed_prefix_scores(G, order, side)
    ends = _group_ends(-keys)
    scores = 1.0 - 2.0 * cross[ends] / vol[ends]
    neg = np.cumsum(side == 0)[ends]
    pos = (ends + 1) - neg
    best = int(np.argmin(scores))
    cut = ends[best] + 1
    members = order[:cut]
    S = members[f[members] > 0]
    Sp = members[f[members] < 0]
    pair = bipartite_conductance(G, S, Sp)
    curve = np.column_stack([keys[ends], scores, pos, neg])
    return SweepResult(pair.score, (float(keys[ends[best]]),), curve, pair=pair)


def cheeger_sweep(G: WeightedGraph, f) -> SweepResult:
    """Best prefix cut of the vertices sorted by ``f``, scored by ``cut / min(vol, vol of complement)``.

    All n-1 prefixes of the stable sort are scanned, so tied values may be
    split.  The reported community is the side of the cut with the smaller volume.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (G.n,):
        raise ValueError("f must have one entry per vertex")
    if np.ptp(f) == 0:
        raise ValueError("f is constant")
    order = np.argsort(f, kind="stable")
    same, _ = kernels.sweep_links(G.indptr, G.indices, G.weights, order, np.zeros(G.n, dtype=np.int8))
    deg = G.degrees[order]
    vol = np.cumsum(deg)
    cut = np.cumsum(deg - 2.0 * same)
    ends = np.arange(G.n - 1)
    denom = np.minimum(vol[ends], G.total_volume - vol[ends])
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, cut[ends] / denom, np.inf)
    best = int(np.argmin(scores))
    prefix = order[: ends[best] + 1]
    if vol[ends[best]] > G.total_volume / 2:
        mask = np.ones(G.n, dtype=bool)
        mask[prefix] = False
        prefix = np.flatnonzero(mask)
    community = VertexSet.of(G, prefix)
    score = conductance(G, community)
    curve = np.column_stack([f[order][ends], scores, ends + 1, G.n - ends - 1])
    return SweepResult(score, (float(f[order][ends[best]]),), curve, community=community)


def _better(score, size, spread, best) -> bool:
    if best is None:
        return True
    bs, bsize, bspread = best
    if score < bs - TIE_TOL:
        return True
    if score > bs + TIE_TOL:
        return False
    if size != bsize:
        return size > bsize
    return spread < bspread


def threshold_search(z, members, G: WeightedGraph, mode: str = "both", min_side: int = 2,
                     max_small: int = 30, max_symmetric: int = 3000) -> SweepResult | None:
    """Best ``S = {z >= p*}``, ``S' = {z <= n*}`` inside the cluster ``members``.

    Candidates are those with ``min_side <= |S|, |S'| <= max_small`` (``small``)
    or those with ``|n*| = p*`` and sides up to ``max_symmetric``
    (``symmetric``).  Thresholds are reported as the realized boundary values
    (smallest z in S, largest z in S').  Returns ``None`` when no candidate
    qualifies.
    """
    if mode not in SEARCH_MODES:
        raise ValueError(f"mode must be one of {SEARCH_MODES}")
    z = np.asarray(z, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    if z.shape != members.shape:
        raise ValueError("z and members must align")
    pos_idx = np.flatnonzero(z > 0)
    neg_idx = np.flatnonzero(z < 0)
    pos_idx = pos_idx[np.argsort(-z[pos_idx], kind="stable")]
    neg_idx = neg_idx[np.argsort(z[neg_idx], kind="stable")]
    zp, zn = z[pos_idx], z[neg_idx]
    rows = []
    best = None
    choice = None

    if mode in ("both", SMALL) and len(zp) >= min_side and len(zn) >= min_side:
        a_max, b_max = min(len(zp), max_small), min(len(zn), max_small)
        pv, nv = members[pos_idx[:a_max]], members[neg_idx[:b_max]]
        W = G.to_scipy()[pv][:, nv].toarray()
        C = W.cumsum(axis=0).cumsum(axis=1)
        volp = np.cumsum(G.degrees[pv])
        voln = np.cumsum(G.degrees[nv])
        okp = [a for a in range(min_side, a_max + 1) if a == len(zp) or zp[a - 1] != zp[a]]
        okn = [b for b in range(min_side, b_max + 1) if b == len(zn) or zn[b - 1] != zn[b]]
        for a in okp:
            for b in okn:
                score = 1.0 - 2.0 * C[a - 1, b - 1] / (volp[a - 1] + voln[b - 1])
                p_star, n_star = zp[a - 1], zn[b - 1]
                rows.append((p_star, n_star, score, a, b))
                key = (score, a + b, abs(p_star) + abs(n_star))
                if _better(*key, best):
                    best, choice = key, (a, b, SMALL)

    if mode in ("both", SYMMETRIC) and len(zp) >= min_side and len(zn) >= min_side:
        live = np.concatenate([pos_idx, neg_idx])
        order_local = live[np.argsort(-np.abs(z[live]), kind="stable")]
        keys = np.abs(z[order_local])
        side = (z[order_local] > 0).astype(np.int8)
        vol, cross = _signed_prefix_scores(G, members[order_local], side)
        npos = np.cumsum(side)
        for e in _group_ends(-keys):
            a = int(npos[e])
            b = int(e + 1 - a)
            if not (min_side <= a <= max_symmetric and min_side <= b <= max_symmetric):
                continue
            score = 1.0 - 2.0 * cross[e] / vol[e]
            p_star, n_star = zp[a - 1], zn[b - 1]
            rows.append((p_star, n_star, score, a, b))
            key = (score, a + b, abs(p_star) + abs(n_star))
            if _better(*key, best):
                best, choice = key, (a, b, SYMMETRIC)

    if choice is None:
        return None
    a, b, condition = choice
    S = members[pos_idx[:a]]
    Sp = members[neg_idx[:b]]
    pair = bipartite_conductance(G, S, Sp)
    curve = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
    return SweepResult(pair.score, (float(zp[a - 1]), float(zn[b - 1])), curve, pair=pair, condition=condition)


def one_sided_search(z, members, G: WeightedGraph, min_size: int = 2, max_size: int | None = None) -> SweepResult | None:
    """Best ``S = {z >= p*}`` inside ``members`` by plain conductance.

    Only positive scores are thresholded and sets are not complemented.
    """
    z = np.asarray(z, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    idx = np.flatnonzero(z > 0)
    if len(idx) < min_size:
        return None
    idx = idx[np.argsort(-z[idx], kind="stable")]
    order = members[idx]
    same, _ = kernels.sweep_links(G.indptr, G.indices, G.weights, order, np.zeros(len(order), dtype=np.int8))
    deg = G.degrees[order]
    vol = np.cumsum(deg)
    cut = np.cumsum(deg - 2.0 * same)
    ends = _group_ends(-z[idx])
    ends = ends[ends + 1 >= min_size]
    if max_size is not None:
        ends = ends[ends + 1 <= max_size]
    if len(ends) == 0:
        return None
    scores = cut[ends] / vol[ends]
    best = int(np.argmin(scores))
    community = VertexSet.of(G, order[: ends[best] + 1])
    score = conductance(G, community)
    curve = np.column_stack([z[idx][ends], scores, ends + 1, np.zeros(len(ends))])
    return SweepResult(score, (float(z[idx][ends[best]]),), curve, community=community)


def sweep_bound_trevisan(eigenvalue: float) -> float:
    """``sqrt(2 (2 - lambda))``."""
    return float(np.sqrt(max(0.0, 2.0 * (2.0 - eigenvalue))))


def sweep_bound_cheeger(eigenvalue: float) -> float:
    """``sqrt(2 lambda)``."""
    return float(np.sqrt(max(0.0, 2.0 * eigenvalue)))


__all__ = [
    "SweepResult",
    "trevisan_sweep",
    "cheeger_sweep",
    "threshold_search",
    "one_sided_search",
    "sweep_bound_trevisan",
    "sweep_bound_cheeger",
    "GraphError",
]
