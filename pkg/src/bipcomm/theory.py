"""Certified detection: ball partition, coordinate choice and threshold rounding.

This is the constructive pipeline with explicit per-index guarantees.  Every
random choice of the argument (partition, coordinate, threshold) is replaced
by a minimization over the realized choices, so each returned pair is at
least as good as the corresponding expectation bound.

Variant ``A`` partitions the embedding itself with diameter ``1/(2 sqrt k)``.
Variant ``B`` first maps the embedding through a random Gaussian projection
to ``h`` dimensions and partitions there with diameter 0.27.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bipcomm.graph import BipartitePair, GraphError, WeightedGraph, bipartite_conductance
from bipcomm.metric import (
    ball_partition,
    merge_small_parts,
    mirror_distances,
    sample_bounded_sets,
    spreading_violations,
    vertex_masses,
)
from bipcomm.spectral import SIGNLESS, SpectralEmbedding, extreme_eigenpairs, signless_rayleigh
from bipcomm.sweep import _group_ends, _signed_prefix_scores

log = logging.getLogger(__name__)

VARIANTS = ("A", "B")
MASS_RTOL = 1e-12


class TheoryError(RuntimeError):
    pass


def default_h(k: int) -> int:
    return int(math.ceil(1200 * (2 * math.log(k) + math.log(200))))


def constants(k: int, variant: str = "A", delta: float | None = None, h: int | None = None) -> dict:
    """``C1``, ``C2``, ``delta``, ``r`` and ``h`` for a variant."""
    if variant == "A":
        return {
            "C1": 4.0 * k,
            "C2": 1.0 / (2.0 * (k - 0.25)),
            "delta": delta if delta is not None else 1.0 / (2.0 * math.sqrt(k)),
            "r": k,
            "h": None,
        }
    if variant == "B":
        return {
            "C1": 2.0 * math.sqrt(1200.0 * math.log(200.0 * k * k)) / 0.27,
            "C2": 1.0 / k,
            "delta": delta if delta is not None else 0.27,
            "r": k // 2,
            "h": h if h is not None else default_h(k),
        }
    raise ValueError(f"variant must be one of {VARIANTS}")


def theorem_bound(k: int, i: int, rayleigh_value: float, variant: str = "A") -> float:
    """Explicit bound on the i-th best pair (1-based) given ``sum(lambda~)/k``."""
    root = math.sqrt(max(0.0, rayleigh_value))
    if variant == "A":
        return 2.0 * (8 * k + 1) * (4 * k - 1) / (k + 1 - i) * root
    if variant == "B":
        coef = 10 ** 1.5 * (1280.0 * math.sqrt(3.0 * math.log(200.0 * k * k)) + 4.0) * k
        return coef / (9.0 * (k / 2.0 + 1 - i)) * root
    raise ValueError(f"variant must be one of {VARIANTS}")


def generic_bound(C1: float, C2: float, r: int, i: int, rayleigh_value: float) -> float:
    """``(8 C1 + 4) / (C2 (r - i + 1)) * sqrt(R)``."""
    return (8.0 * C1 + 4.0) / (C2 * (r - i + 1)) * math.sqrt(max(0.0, rayleigh_value))


@dataclass(frozen=True)
class TheoryConfig:
    k: int
    variant: str = "A"
    delta: float | None = None
    h: int | None = None
    seed: int | None = 0
    rounds: int = 8
    strict: bool = False
    spreading_samples: int = 200

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.variant == "B" and self.k < 4:
            raise ValueError("variant B needs k >= 4")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.h is not None and self.h < 1:
            raise ValueError("h must be at least 1")
        if self.delta is not None and not 0 < self.delta <= 2 ** -0.5:
            raise ValueError("delta must lie in (0, 2^-1/2]")

    def constants(self) -> dict:
        return constants(self.k, self.variant, self.delta, self.h)


def gaussian_project(F, h: int, rng=None) -> np.ndarray:
    """``x -> h^{-1/2} (g_1.x, ..., g_h.x)`` applied to every row of F."""
    if h < 1:
        raise ValueError("h must be at least 1")
    F = np.asarray(F, dtype=np.float64)
    F2 = F.reshape(F.shape[0], -1) if F.ndim > 1 else F[None, :]
    g = np.random.default_rng(rng).standard_normal((F2.shape[1], h))
    out = F2 @ g / math.sqrt(h)
    return out if F.ndim > 1 else out[0]


# -- partition objective ---------------------------------------------------------

def _entries(G: WeightedGraph):
    rows = np.repeat(np.arange(G.n), np.diff(G.indptr))
    return rows, G.indices, G.weights


def partition_objective(G: WeightedGraph, F, labels) -> tuple[float, float, float]:
    """Cut mass ``sum_u sum_v w chi(P(u) != P(v)) ||F(u)||^2`` and ``sum w d_M ||F(u)||^2``.

    Returns ``(cut, spread)`` together with ``cut / spread`` (0 when both vanish).
    """
    rows, cols, w = _entries(G)
    sq = (np.asarray(F) ** 2).sum(axis=1)
    labels = np.asarray(labels)
    chi = (labels[rows] != labels[cols]) | (labels[rows] < 0)
    cut = float(np.dot(w * chi, sq[rows]))
    spread = float(np.dot(w * mirror_distances(F, rows, cols), sq[rows]))
    return cut, spread, (cut / spread if spread > 0 else 0.0)


# -- coordinate and threshold --------------------------------------------------

@dataclass(frozen=True)
class CoordinateChoice:
    j: int
    alpha: float
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-9) + 1e-300


def select_coordinate(G: WeightedGraph, F, members, labels, C1: float, rayleigh_value: float,
                      chunk: int = 256) -> CoordinateChoice | None:
    """Coordinate j of F minimizing the averaged per-part inequality.

    For each j with ``sum_{u in P} d(u) f_j(u)^2 = alpha_j M(P) != 0`` the left
    side is ``alpha_j^-1 sum_{u in P} sum_v w (c (f_j(u)+f_j(v))^2 + chi f_j(u)^2)``
    with ``c = C1 R^{-1/2}``; the right side is the same with ``||F(u)+F(v)||^2``
    and ``||F(u)||^2``.  The alpha-weighted average of the left sides equals the
    right side, so the minimizer satisfies the inequality.  When R is zero the
    comparison is lexicographic in the two terms.  Returns ``None`` when F
    vanishes on the part.
    """
    F = np.asarray(F, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    labels = np.asarray(labels)
    deg = G.degrees[members]
    Fp = F[members]
    part_mass = float(np.dot(deg, (Fp * Fp).sum(axis=1)))
    if part_mass <= 0:
        return None
    in_part = np.zeros(G.n, dtype=bool)
    in_part[members] = True
    rows, cols, w = _entries(G)
    sel = in_part[rows]
    rows, cols, w = rows[sel], cols[sel], w[sel]
    chi = (labels[rows] != labels[cols]).astype(np.float64)
    k = F.shape[1]
    coef = math.inf if rayleigh_value <= 0 else C1 / math.sqrt(rayleigh_value)

    A = np.empty(k)
    B = np.empty(k)
    alpha = np.empty(k)
    for lo in range(0, k, chunk):
        hi = min(k, lo + chunk)
        Fu, Fv = F[rows, lo:hi], F[cols, lo:hi]
        A[lo:hi] = w @ (Fu + Fv) ** 2
        B[lo:hi] = (w * chi) @ (Fu * Fu)
        alpha[lo:hi] = deg @ (Fp[:, lo:hi] ** 2) / part_mass
    A_tot, B_tot = float(A.sum()), float(B.sum())
    ok = np.flatnonzero(alpha > 0)
    if len(ok) == 0:
        return None
    Ar, Br = A[ok] / alpha[ok], B[ok] / alpha[ok]
    if math.isinf(coef):
        # the first term dominates; the second only breaks ties
        best = ok[np.lexsort((Br, Ar))[0]]
        if A_tot > 0:
            return CoordinateChoice(int(best), float(alpha[best]), float(Ar[ok == best][0]), A_tot)
        return CoordinateChoice(int(best), float(alpha[best]), float(Br[ok == best][0]), B_tot)
    obj = coef * Ar + Br
    best_pos = int(np.argmin(obj))
    best = ok[best_pos]
    return CoordinateChoice(int(best), float(alpha[best]), float(obj[best_pos]), coef * A_tot + B_tot)


@dataclass(frozen=True)
class RoundedPair:
    pair: BipartitePair
    threshold: float
    expected_ratio: float


def threshold_round(G: WeightedGraph, members, fj, alpha: float) -> RoundedPair | None:
    """Best ``({u in P: f_j(u) >= sqrt(t alpha)}, {u in P: f_j(u) <= -sqrt(t alpha)})``.

    ``fj`` holds the coordinate values on ``members``.  All realized sets (one
    per distinct ``|f_j|`` value) are scored.  ``expected_ratio`` is the ratio
    of the expected bad-stub weight to the expected volume for t uniform,
    which the best realized pair never exceeds.  Returns ``None`` when every
    threshold gives an empty pair.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    members = np.asarray(members, dtype=np.int64)
    fj = np.asarray(fj, dtype=np.float64)
    live = np.flatnonzero(fj != 0)
    if len(live) == 0:
        return None
    order_local = live[np.argsort(-np.abs(fj[live]), kind="stable")]
    keys = np.abs(fj[order_local])
    side = (fj[order_local] > 0).astype(np.int8)
    vol, cross = _signed_prefix_scores(G, members[order_local], side)
    ends = _group_ends(-keys)
    bad = vol[ends] - 2.0 * cross[ends]
    if not vol[ends][-1] > 0:
        return None
    # prefixes made only of zero-degree vertices have no score
    scores = np.full(len(ends), np.inf)
    np.divide(bad, vol[ends], out=scores, where=vol[ends] > 0)
    levels = keys[ends] ** 2
    lengths = levels - np.append(levels[1:], 0.0)
    expected_ratio = float(np.dot(lengths, bad) / np.dot(lengths, vol[ends]))
    best = int(np.argmin(scores))
    chosen = order_local[: ends[best] + 1]
    vals = fj[chosen]
    pair = bipartite_conductance(G, members[chosen[vals > 0]], members[chosen[vals < 0]])
    return RoundedPair(pair, float(levels[best] / alpha), expected_ratio)


# -- pipeline ------------------------------------------------------------------

@dataclass(frozen=True)
class CertifiedPair:
    pair: BipartitePair
    rank: int
    bound: float
    within_bound: bool
    part: int
    coordinate: int
    alpha: float
    threshold: float
    expected_ratio: float
    coordinate_ok: bool

    def to_dict(self, labels=None) -> dict:
        d = self.pair.to_dict(labels)
        d.update(rank=self.rank, bound=self.bound, within_bound=self.within_bound, part=self.part,
                 coordinate=self.coordinate + 1, alpha=self.alpha, threshold=self.threshold,
                 expected_ratio=self.expected_ratio)
        return d


@dataclass
class TheoryResult:
    config: TheoryConfig
    pairs: list
    eigenvalues: np.ndarray
    rayleigh_value: float
    working_rayleigh: float
    partition_cut: float
    partition_spread: float
    qualifying_parts: int
    shortfall: bool
    extra: dict = field(default_factory=dict)

    @property
    def all_within_bound(self) -> bool:
        return all(p.within_bound for p in self.pairs)

    def to_dict(self, labels=None) -> dict:
        c = self.config
        return {
            "k": c.k,
            "variant": c.variant,
            "seed": c.seed,
            "rounds": c.rounds,
            "constants": c.constants(),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "rayleigh": self.rayleigh_value,
            "working_rayleigh": self.working_rayleigh,
            "partition_cut": self.partition_cut,
            "partition_spread": self.partition_spread,
            "qualifying_parts": self.qualifying_parts,
            "shortfall": self.shortfall,
            "pairs": [p.to_dict(labels) for p in self.pairs],
            **self.extra,
        }


def _best_partition(G, F, delta, C1, C2, rounds, rng, degrees):
    weights = vertex_masses(F, degrees)
    total = float(weights.sum())
    best = None
    for _ in range(rounds):
        P = ball_partition(F, delta, rng, degrees)
        P = merge_small_parts(P, C2 * total) if P.num_parts else P
        cut, spread, _ = partition_objective(G, F, P.labels)
        if best is None or cut < best[1]:
            best = (P, cut, spread)
    return best


def theory_detect(G: WeightedGraph, config: TheoryConfig, embedding: SpectralEmbedding | None = None) -> TheoryResult:
    """Pairs with their explicit per-index guarantees, best first."""
    k = config.k
    consts = config.constants()
    C1, C2, delta, r = consts["C1"], consts["C2"], consts["delta"], consts["r"]
    emb = embedding if embedding is not None else extreme_eigenpairs(G, k, SIGNLESS, seed=config.seed)
    if emb.which != SIGNLESS or emb.k != k:
        raise ValueError("embedding must hold the k smallest signless eigenpairs")
    rng = np.random.default_rng(config.seed)
    rayleigh_value = float(np.clip(emb.eigenvalues, 0.0, None).sum() / k)
    extra = {}

    F = emb.F
    if config.variant == "B":
        attempts = 0
        while True:
            attempts += 1
            Fw = gaussian_project(F, consts["h"], rng)
            sets = sample_bounded_sets(Fw, delta, config.spreading_samples, rng)
            bad = spreading_violations(Fw, delta, sets, G.degrees, eta=2.0 / k)
            if not bad:
                break
            if attempts >= config.rounds:
                idx, m, lim = bad[0]
                raise TheoryError(f"projected embedding not spreading: a set of mass {m:.4g} exceeds {lim:.4g}")
        extra["projection_attempts"] = attempts
        F = Fw
    working_rayleigh = signless_rayleigh(G, F)

    P, cut, spread = _best_partition(G, F, delta, C1, C2, config.rounds, rng, G.degrees)
    total = float(vertex_masses(F, G.degrees).sum())
    qualifying = [i for i, m in enumerate(P.masses) if m >= C2 * total * (1 - MASS_RTOL)]
    log.debug("partition: %d parts, %d qualifying, cut %.4g vs %.4g", P.num_parts, len(qualifying), cut, C1 * spread)

    found = []
    for part in qualifying:
        members = P.members(part)
        choice = select_coordinate(G, F, members, P.labels, C1, working_rayleigh)
        if choice is None:
            continue
        rounded = threshold_round(G, members, F[members, choice.j], choice.alpha)
        if rounded is None:
            continue
        found.append((rounded, part, choice))
    found.sort(key=lambda t: (t[0].pair.score, -t[0].pair.size))
    pairs = []
    for i, (rounded, part, choice) in enumerate(found[:r], start=1):
        bound = theorem_bound(k, i, rayleigh_value, config.variant)
        pairs.append(CertifiedPair(rounded.pair, i, bound, rounded.pair.score <= bound + 1e-12, part, choice.j,
                                   choice.alpha, rounded.threshold, rounded.expected_ratio, choice.satisfied))
    result = TheoryResult(config, pairs, np.asarray(emb.eigenvalues), rayleigh_value, working_rayleigh, cut,
                          C1 * spread, len(qualifying), len(pairs) < r, extra)
    if config.strict and not result.all_within_bound:
        worst = max(pairs, key=lambda p: p.pair.score - p.bound)
        raise TheoryError(f"pair {worst.rank} has score {worst.pair.score:.6g} above its bound {worst.bound:.6g}")
    return result


__all__ = [
    "TheoryConfig",
    "TheoryResult",
    "CertifiedPair",
    "CoordinateChoice",
    "RoundedPair",
    "TheoryError",
    "GraphError",
    "constants",
    "theorem_bound",
    "generic_bound",
    "gaussian_project",
    "partition_objective",
    "select_coordinate",
    "threshold_round",
    "theory_detect",
]
