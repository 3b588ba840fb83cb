"""Mirror radial-projection geometry, mass accounting and random ball partitions.

Rays through the origin are identified with their negatives, so the distance
between two embedded vertices only depends on the angle between the lines
they span.  Points closer to the origin than ``origin_tol`` have no direction;
by convention they sit at distance 1 from everything.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from bipcomm.spectral import ORIGIN_TOL

OUTLIER = -1


def _unit_rows(F: np.ndarray, origin_tol: float) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    norms = np.linalg.norm(F, axis=1)
    ok = norms >= origin_tol
    U = np.zeros_like(F)
    U[ok] = F[ok] / norms[ok, None]
    return U, ok


def _chord_from_abs_cos(c):
    # sqrt(2 - 2|cos|) is ill-conditioned near |cos| = 1 but accurate to ~1e-8,
    # which is the resolution of the origin threshold anyway
    return np.sqrt(np.clip(2.0 - 2.0 * np.abs(c), 0.0, 2.0))


def mirror_distance(x, y, origin_tol: float = ORIGIN_TOL) -> float:
    """``min(||x' - y'||, ||x' + y'||)`` for the unit vectors x', y'; 1 at the origin."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx < origin_tol or ny < origin_tol:
        return 1.0
    xu, yu = x / nx, y / ny
    return float(min(np.linalg.norm(xu - yu), np.linalg.norm(xu + yu)))


def mirror_distances(F, u, v, origin_tol: float = ORIGIN_TOL) -> np.ndarray:
    """Vectorized d_M between rows ``F[u[i]]`` and ``F[v[i]]``."""
    U, ok = _unit_rows(F, origin_tol)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    a, b = U[u], U[v]
    d = np.minimum(np.linalg.norm(a - b, axis=1), np.linalg.norm(a + b, axis=1))
    d[~(ok[u] & ok[v])] = 1.0
    return d


def mirror_distance_matrix(F, origin_tol: float = ORIGIN_TOL) -> np.ndarray:
    U, ok = _unit_rows(F, origin_tol)
    D = _chord_from_abs_cos(U @ U.T)
    D[~ok, :] = 1.0
    D[:, ~ok] = 1.0
    return D


def diameter(F, members, origin_tol: float = ORIGIN_TOL) -> float:
    members = np.asarray(members, dtype=np.int64)
    if len(members) < 2:
        return 0.0
    return float(mirror_distance_matrix(np.asarray(F)[members], origin_tol).max())


def mirror_angle_distance(x, y) -> float:
    """``2 sin(theta/2)`` for the angle theta between x and the closer of +-y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c = float(np.dot(x, y) / (np.linalg.norm(x) * np.linalg.norm(y)))
    theta = math.acos(min(1.0, abs(c)))
    return 2.0 * math.sin(theta / 2.0)


def vertex_masses(F, degrees) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64).reshape(len(degrees), -1)
    return np.asarray(degrees, dtype=np.float64) * (F * F).sum(axis=1)


def mass(G, F, T) -> float:
    """``sum over u in T of d(u) ||F(u)||^2``."""
    T = np.asarray(list(T) if not isinstance(T, np.ndarray) else T, dtype=np.int64)
    if len(T) == 0:
        return 0.0
    return float(vertex_masses(np.asarray(F)[T], G.degrees[T]).sum())


# -- partitions ----------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Part id per vertex (``OUTLIER`` for unassigned) with cached part masses."""

    labels: np.ndarray
    masses: tuple
    delta: float | None = None

    @classmethod
    def from_labels(cls, labels, weights, delta=None) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        r = int(labels.max()) + 1 if len(labels) and labels.max() >= 0 else 0
        ok = labels >= 0
        m = np.bincount(labels[ok], weights=np.asarray(weights, dtype=np.float64)[ok], minlength=r)
        return cls(labels, tuple(float(x) for x in m), delta)

    @property
    def num_parts(self) -> int:
        return len(self.masses)

    def members(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.labels == part)

    def parts(self) -> list[np.ndarray]:
        return [self.members(i) for i in range(self.num_parts)]

    def write_tsv(self, fh, labels=None) -> None:
        fh.write("vertex\tpart_id\n")
        for u, p in enumerate(self.labels):
            fh.write(f"{labels[u] if labels is not None else u}\t{p}\n")

    def diagnostics(self, F, origin_tol: float = ORIGIN_TOL) -> str:
        parts = [{"part": i, "mass": self.masses[i], "size": int(len(m)), "diameter": diameter(F, m, origin_tol)}
                 for i, m in enumerate(self.parts())]
        return json.dumps({"delta": self.delta, "parts": parts}, indent=2)


def _sample_cap(center: np.ndarray, angle_max: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform point of the unit sphere within angle ``angle_max`` of ``center``.

    The polar angle has density proportional to ``sin(theta)^(k-2)``.  Since
    ``log sin`` is concave, its tangent at ``angle_max`` bounds it from above,
    which gives a truncated exponential proposal that stays efficient in
    high dimension.
    """
    k = len(center)
    if k == 1:
        return center.copy()
    m = k - 2
    rate = m / math.tan(angle_max) if m else 0.0
    log_top = math.log(math.sin(angle_max))
    while True:
        u = rng.random()
        if rate * angle_max > 1e-12:
            s = -math.log1p(u * math.expm1(-rate * angle_max)) / rate
        else:
            s = u * angle_max
        theta = angle_max - s
        if theta <= 0.0:
            continue
        log_ratio = m * (math.log(math.sin(theta)) - log_top + s / math.tan(angle_max))
        if m == 0 or math.log(rng.random()) <= log_ratio:
            break
    w = rng.standard_normal(k)
    w -= center * np.dot(w, center)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return center.copy()
    return math.cos(theta) * center + math.sin(theta) * (w / nw)


def ball_partition(F, delta: float, rng=None, degrees=None, origin_tol: float = ORIGIN_TOL) -> Partition:
    """Random partition into parts of mirror diameter at most ``delta``.

    Each step places a uniformly random point x of the sphere and makes a new
    part of the unassigned vertices within d_M of ``delta/2`` of x.  Steps
    whose ball catches nothing are not simulated: x is drawn directly from the
    uniform law on the union of the balls around the remaining points, which
    is the law of the first ball that catches something.  Origin vertices stay
    unassigned.
    """
    if not 0 < delta <= math.sqrt(2) + 1e-12:
        raise ValueError(f"delta must be in (0, sqrt(2)], got {delta}")
    rng = np.random.default_rng(rng)
    U, ok = _unit_rows(F, origin_tol)
    n, k = U.shape
    weights = vertex_masses(F, degrees if degrees is not None else np.ones(n))
    labels = np.full(n, OUTLIER, dtype=np.int64)
    remaining = np.flatnonzero(ok)
    if k == 1:
        labels[remaining] = 0
        return Partition.from_labels(labels, weights, delta)
    radius = delta / 2.0
    angle_max = 2.0 * math.asin(min(1.0, radius / 2.0))
    part = 0
    while len(remaining):
        u = remaining[rng.integers(len(remaining))]
        center = U[u] if rng.random() < 0.5 else -U[u]
        x = _sample_cap(center, angle_max, rng)
        d = _chord_from_abs_cos(U[remaining] @ x)
        caught = d <= radius
        caught[remaining == u] = True
        # accept with probability 1/(number of balls covering x)
        if rng.random() * caught.sum() > 1.0:
            continue
        labels[remaining[caught]] = part
        remaining = remaining[~caught]
        part += 1
    return Partition.from_labels(labels, weights, delta)


def merge_small_parts(partition: Partition, threshold_mass: float) -> Partition:
    """Merge the two lightest parts below ``threshold_mass`` until at most one remains.

    Returns a partition with parts renumbered 0..m-1 in order of first part id.
    """
    if threshold_mass <= 0:
        raise ValueError("threshold_mass must be positive")
    groups = [[i] for i in range(partition.num_parts)]
    masses = list(partition.masses)
    while True:
        small = sorted((masses[g], g) for g in range(len(groups)) if masses[g] < threshold_mass)
        if len(small) < 2:
            break
        (ma, a), (mb, b) = small[0], small[1]
        a, b = min(a, b), max(a, b)
        groups[a] = groups[a] + groups[b]
        masses[a] = ma + mb
        del groups[b], masses[b]
    remap = np.full(partition.num_parts, OUTLIER, dtype=np.int64)
    for new, g in enumerate(groups):
        remap[g] = new
    labels = np.where(partition.labels >= 0, remap[np.maximum(partition.labels, 0)], OUTLIER)
    return Partition(labels, tuple(masses), partition.delta)


def spreading_limit(total_mass: float, k: int, delta: float) -> float:
    return total_mass / (k * (1.0 - delta * delta))


def spreading_violations(F, delta: float, candidate_sets, degrees=None, origin_tol: float = ORIGIN_TOL,
                         rtol: float = 1e-9, eta: float | None = None) -> list[tuple[int, float, float]]:
    """Candidate sets carrying more than ``M(V)/(k(1 - delta^2))`` mass.

    ``eta`` replaces the limit by ``eta * M(V)``.  Returns ``(index, mass,
    limit)`` triples.  A candidate whose mirror diameter
    exceeds ``delta`` raises ``ValueError`` naming the measured diameter.
    """
    if not 0 < delta <= 2 ** -0.5 + 1e-12:
        raise ValueError("delta must be in (0, 2^-1/2]")
    F = np.asarray(F, dtype=np.float64)
    F2 = F.reshape(F.shape[0], -1)
    n, k = F2.shape
    weights = vertex_masses(F2, degrees if degrees is not None else np.ones(n))
    total = float(weights.sum())
    limit = eta * total if eta is not None else spreading_limit(total, k, delta)
    out = []
    for idx, T in enumerate(candidate_sets):
        T = np.asarray(T, dtype=np.int64)
        diam = diameter(F2, T, origin_tol)
        if diam > delta + 1e-12:
            raise ValueError(f"candidate {idx} has diameter {diam:.6g} > {delta:.6g}")
        m = float(weights[T].sum())
        if m > limit * (1 + rtol):
            out.append((idx, m, limit))
    return out


def sample_bounded_sets(F, delta: float, count: int, rng=None, origin_tol: float = ORIGIN_TOL) -> list[np.ndarray]:
    """Random vertex sets of mirror diameter at most ``delta``.

    Each set is every non-origin vertex within ``delta/2`` of a random anchor
    (a vertex or a sphere point), optionally thinned at random.
    """
    rng = np.random.default_rng(rng)
    U, ok = _unit_rows(F, origin_tol)
    live = np.flatnonzero(ok)
    out = []
    for _ in range(count):
        if rng.random() < 0.5 and len(live):
            x = U[live[rng.integers(len(live))]]
        else:
            x = rng.standard_normal(U.shape[1])
            x /= np.linalg.norm(x)
        members = live[_chord_from_abs_cos(U[live] @ x) <= delta / 2.0]
        if len(members) > 1 and rng.random() < 0.3:
            members = members[rng.random(len(members)) < 0.5]
        if len(members) and diameter(F, members, origin_tol) <= delta:
            out.append(members)
    return out


def mirror_edge_inequality(Fu, Fv, origin_tol: float = ORIGIN_TOL) -> tuple[float, float]:
    """Both sides of ``d_M(u,v) ||F(u)|| <= 2 ||F(u) + F_uv(v)||``.

    ``F_uv(v)`` is ``F(v)`` flipped to the side of ``F(u)``.
    """
    Fu = np.asarray(Fu, dtype=np.float64)
    Fv = np.asarray(Fv, dtype=np.float64)
    lhs = mirror_distance(Fu, Fv, origin_tol) * np.linalg.norm(Fu)
    flip = 1.0 if np.dot(Fu, Fv) >= 0 else -1.0
    return float(lhs), float(2.0 * np.linalg.norm(Fu - flip * Fv))


def aggregate_edge_inequality(G, F, origin_tol: float = ORIGIN_TOL) -> tuple[float, float]:
    """Both sides of the summed edge bound.

    Left: sum over ordered neighbour pairs of ``w d_M(u,v) ||F(u)||^2``.
    Right: ``sqrt(8 / R) * sum over edges of w ||F(u) + F(v)||^2`` with R the
    signless Rayleigh quotient of F, evaluated as ``sqrt(8 * num * den)``.
    """
    F = np.asarray(F, dtype=np.float64).reshape(G.n, -1)
    rows = np.repeat(np.arange(G.n), np.diff(G.indptr))
    d = mirror_distances(F, rows, G.indices, origin_tol)
    sq = (F * F).sum(axis=1)
    lhs = float(np.dot(G.weights * d, sq[rows]))
    u, v, w = G.edges()
    num = float(np.dot(w, ((F[u] + F[v]) ** 2).sum(axis=1)))
    den = float(np.dot(sq, G.degrees))
    return lhs, math.sqrt(8.0 * num * den)
