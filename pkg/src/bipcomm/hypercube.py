"""The noisy hypercube family and its closed-form spectrum.

Vertices are the integers ``0 .. 2^k - 1``; bit ``j`` of a vertex is its
``j``-th coordinate.  The edge between x and y has weight
``eps ** popcount(x ^ y)``.  The ``odd_only`` graph keeps odd Hamming
distances (so it is bipartite by parity), ``even_only`` keeps even nonzero
distances, and ``full`` keeps every pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bipcomm._backend import kernels
from bipcomm.graph import WeightedGraph, bipartite_conductance

FULL = "full"
ODD = "odd_only"
EVEN = "even_only"
PARITIES = (FULL, ODD, EVEN)
MAX_K = 14
LOG_BASE = 2.2


class HypercubeError(ValueError):
    pass


@dataclass(frozen=True)
class HypercubeSpec:
    k: int
    eps: float
    parity: str = ODD
    c: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise HypercubeError("k must be at least 1")
        if not self.eps > 0:
            raise HypercubeError("eps must be positive")
        if self.parity not in PARITIES:
            raise HypercubeError(f"parity must be one of {PARITIES}")

    @classmethod
    def from_c(cls, k: int, c: float, parity: str = ODD) -> "HypercubeSpec":
        """``eps = 1 / log_2.2(k / c)`` with ``1 <= c <= 10k/22``."""
        if not 1 <= c <= 10 * k / 22:
            raise HypercubeError(f"c={c} outside [1, 10k/22] for k={k}")
        return cls(k, math.log(LOG_BASE) / math.log(k / c), parity, c)

    @property
    def n(self) -> int:
        return 1 << self.k

    def to_dict(self) -> dict:
        return {"k": self.k, "eps": self.eps, "parity": self.parity, "c": self.c}


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while x.any():
        out += x & 1
        x = x >> 1
    return out


def _masks(spec: HypercubeSpec) -> np.ndarray:
    m = np.arange(1, spec.n, dtype=np.int64)
    pc = popcount(m)
    if spec.parity == ODD:
        m = m[pc % 2 == 1]
    elif spec.parity == EVEN:
        m = m[pc % 2 == 0]
    return m


def generate(spec: HypercubeSpec) -> WeightedGraph:
    """The weighted graph of ``spec`` in CSR form."""
    if spec.k > MAX_K:
        entries = spec.n * (spec.n // 2)
        raise HypercubeError(
            f"k={spec.k} too large: about {entries * 16 / 2**30:.1f} GiB of adjacency (limit k <= {MAX_K})"
        )
    masks = _masks(spec)
    n = spec.n
    if len(masks) == 0:
        raise HypercubeError("graph has no edges")
    w_mask = spec.eps ** popcount(masks).astype(np.float64)
    x = np.arange(n, dtype=np.int64)
    nbrs = x[:, None] ^ masks[None, :]
    order = np.argsort(nbrs, axis=1)
    indices = np.take_along_axis(nbrs, order, axis=1).ravel()
    weights = w_mask[order].ravel()
    indptr = np.arange(n + 1, dtype=np.int64) * len(masks)
    labels = [format(i, f"0{spec.k}b")[::-1] for i in range(n)]
    return WeightedGraph(indptr, indices, weights, labels, check=False)


def exact_degree(spec: HypercubeSpec, parity: str | None = None) -> float:
    """Closed-form degree of every vertex for the given parity."""
    parity = parity or spec.parity
    a, b = (1 + spec.eps) ** spec.k, (1 - spec.eps) ** spec.k
    if parity == ODD:
        return (a - b) / 2
    if parity == EVEN:
        return (a + b) / 2 - 1
    if parity == FULL:
        return a - 1
    raise HypercubeError(f"unknown parity {parity}")


def exact_normalized_eigenvalue(spec: HypercubeSpec, s: int) -> float:
    """Normalized Laplacian eigenvalue on the Walsh functions of weight ``s`` (odd graph)."""
    if spec.parity != ODD:
        raise HypercubeError("closed form is for the odd_only graph")
    if not 0 <= s <= spec.k:
        raise HypercubeError("s must lie in 0..k")
    k, e = spec.k, spec.eps
    num = (1 + e) ** (k - s) * (1 - e) ** s - (1 - e) ** (k - s) * (1 + e) ** s
    den = (1 + e) ** k - (1 - e) ** k
    return 1.0 - num / den


def exact_spectrum(spec: HypercubeSpec) -> np.ndarray:
    """All ``2^k`` normalized Laplacian eigenvalues, ascending, with multiplicity."""
    vals = []
    for s in range(spec.k + 1):
        vals.extend([exact_normalized_eigenvalue(spec, s)] * math.comb(spec.k, s))
    return np.sort(np.asarray(vals))


def gap_terms(spec: HypercubeSpec) -> dict:
    """The quantities compared by ``eigenvalue_gap_check``."""
    k, e = spec.k, spec.eps
    a, b = (1 + e) ** k, (1 - e) ** k
    # 2 - lambda(k-1) written without cancellation
    gap = 2 * e * ((1 + e) ** (k - 1) + (1 - e) ** (k - 1)) / (a - b)
    middle = 2 * e + (1 - e) ** (k - 1) * (1 + e) / (a - b)
    return {"two_minus_lambda": gap, "middle": middle, "limit": 3 * e}


def eigenvalue_gap_check(spec: HypercubeSpec) -> bool:
    """Whether the top ``k+1`` eigenvalues (weights k-1 and k) satisfy ``2 - lambda <= 3 eps``."""
    t = gap_terms(spec)
    top = 2.0 - exact_normalized_eigenvalue(spec, spec.k)
    return bool(top <= t["limit"] and t["two_minus_lambda"] <= t["middle"] <= t["limit"])


def fourier_coefficients(values) -> np.ndarray:
    """``fhat(S) = 2^-k sum_x f(x) (-1)^{|S & x|}``, indexed by the bitmask of S."""
    f = np.array(values, dtype=np.float64)
    n = len(f)
    if n == 0 or n & (n - 1):
        raise HypercubeError("length must be a power of two")
    if n > 1 << MAX_K:
        raise HypercubeError(f"k > {MAX_K} not supported")
    kernels.fwht(f)
    return f / n


def walsh(k: int, S: int) -> np.ndarray:
    x = np.arange(1 << k, dtype=np.int64)
    return np.where(popcount(x & S) % 2 == 0, 1.0, -1.0)


def fourier_weight_bound(spec: HypercubeSpec, T) -> tuple[float, float]:
    """Both sides of ``<1_T, A 1_T> / d <= 1.1 sum_S ((1-eps)/(1+eps))^|S| fhat(S)^2``.

    The inner product is the normalized one, ``2^-k sum_x``.
    """
    G = generate(spec)
    ind = np.zeros(spec.n)
    ind[np.asarray(T, dtype=np.int64)] = 1.0
    Ax = kernels.csr_matmat(G.indptr, G.indices, G.weights, ind[:, None])[:, 0]
    lhs = float(ind @ Ax) / spec.n / exact_degree(spec, ODD)
    fh = fourier_coefficients(ind)
    rho = (1 - spec.eps) / (1 + spec.eps)
    rhs = 1.1 * float(np.sum(rho ** popcount(np.arange(spec.n)) * fh * fh))
    return lhs, rhs


def conductance_lower_bound(spec: HypercubeSpec, size: int) -> float:
    """``1 - 1.1 (|T| / n)^eps``."""
    return 1.0 - 1.1 * (size / spec.n) ** spec.eps


@dataclass(frozen=True)
class ProbeResult:
    min_score: float
    worst: tuple
    samples: int
    max_size: int
    fourier_violations: int


def small_set_conductance_probe(spec: HypercubeSpec, samples: int, rng=None, G: WeightedGraph | None = None,
                                max_size: int | None = None) -> ProbeResult:
    """Smallest bipartite conductance over random small disjoint pairs.

    Sets have ``|T u T'| <= (c/k) 2^k`` (or ``max_size``).  Half the samples
    are uniform random vertex sets; the rest are subcubes split by parity,
    which are the sets with the most internal weight.  Also counts samples
    where ``phi(T u T') < 1 - 1.1 (|T u T'|/n)^eps``.
    """
    if spec.parity != ODD:
        raise HypercubeError("probe is defined on the odd_only graph")
    rng = np.random.default_rng(rng)
    G = G if G is not None else generate(spec)
    if max_size is None:
        if spec.c is None:
            raise HypercubeError("max_size is required when eps is given directly")
        max_size = int(math.floor(spec.c / spec.k * spec.n))
    max_size = max(1, max_size)
    n, k = spec.n, spec.k
    label = np.zeros(n, dtype=np.int8)
    worst, worst_pair = math.inf, ()
    violations = 0
    for i in range(samples):
        if i % 2 == 0:
            size = int(rng.integers(1, max_size + 1))
            members = rng.choice(n, size=size, replace=False)
        else:
            dim = int(rng.integers(0, max(1, int(math.log2(max_size))) + 1))
            free = rng.choice(k, size=dim, replace=False)
            base = int(rng.integers(n))
            for j in free:
                base &= ~(1 << int(j))
            sub = np.zeros(1, dtype=np.int64) + base
            for j in free:
                sub = np.concatenate([sub, sub | (1 << int(j))])
            members = sub
        members = np.asarray(members, dtype=np.int64)
        par = popcount(members) % 2
        if rng.random() < 0.25:
            par = rng.integers(0, 2, size=len(members))
        label[:] = 0
        label[members] = np.where(par == 0, 1, 2)
        vol, cross, inside, boundary = kernels.pair_weights(G.indptr, G.indices, G.weights, members, label)
        score = (boundary + 2 * inside) / vol
        if score < worst:
            worst, worst_pair = score, (members[par == 0].tolist(), members[par == 1].tolist())
        if boundary / vol < conductance_lower_bound(spec, len(members)) - 1e-12:
            violations += 1
    return ProbeResult(worst, worst_pair, samples, max_size, violations)


def antipodal_pair_score(spec: HypercubeSpec, x: int = 0) -> float:
    """Bipartite conductance of ``({x}, {complement of x})`` computed from the graph."""
    G = generate(spec)
    return bipartite_conductance(G, [x], [x ^ (spec.n - 1)]).score
