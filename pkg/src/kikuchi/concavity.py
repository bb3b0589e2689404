"""Deciding concavity of the weighted region entropy.

The sufficient condition is that every region subset S has nonnegative
total weight over its forebear closure; on two-layer graphs it reduces to
nonnegative factor weights plus one inequality per vertex subset, and
there the condition is also necessary.  Besides the exhaustive checkers,
this module carries the machinery the necessity argument rests on: a
saturating edge labeling for weighted bipartite graphs (a generalized
marriage lemma), a finite-difference curvature probe on the tangent space
of the local polytope, and the one-parameter symmetric pseudomarginal
family whose closed-form Hessian witnesses non-concavity.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.linalg import null_space

from . import tables
from .errors import (
    BoundaryPoint,
    HallConditionViolated,
    InfeasiblePoint,
    NonPositiveWeight,
    NotTwoLayer,
    ScopeMismatch,
    TooManyRegions,
    TooManyVertices,
)
from .objective import kikuchi_entropy
from .region_graph import RegionGraph, TwoLayerView, build_region_graph, two_layer_view
from .tables import FactorTable, Pseudomarginals

_SUBSET_CHUNK = 1 << 18


@dataclass(frozen=True)
class ConcavityReport:
    satisfied: bool
    violating_set: tuple[int, ...] | None
    min_value: float


def _min_bethe_subsets(vertex_weights: np.ndarray, factor_masks: Sequence[int],
                       factor_weights: np.ndarray):
    """Minimize sum of vertex weights in U plus factor weights meeting U,
    over nonempty U.  Returns (min value, best mask)."""
    nv = len(vertex_weights)
    fmasks = np.array(factor_masks, dtype=np.uint64)
    best_val = np.inf
    best_mask = 0
    for start in range(1, 1 << nv, _SUBSET_CHUNK):
        stop = min(start + _SUBSET_CHUNK, 1 << nv)
        m = np.arange(start, stop, dtype=np.uint64)
        total = np.zeros(m.shape)
        for k in range(nv):
            total += vertex_weights[k] * ((m >> np.uint64(k)) & np.uint64(1)).astype(float)
        for w, fm in zip(factor_weights, fmasks):
            total += w * ((m & fm) != 0)
        i = int(np.argmin(total))
        if total[i] < best_val:
            best_val = float(total[i])
            best_mask = int(m[i])
    return best_val, best_mask


def check_bethe_concavity(view: TwoLayerView, weights,
                          max_vertices: int = 24) -> ConcavityReport:
    """Two-layer check: factor weights must be nonnegative and every vertex
    subset U must satisfy  sum_{s in U} rho_s + sum_{a meets U} rho_a >= 0.

    The violating set reported is U (vertex ids); a negative factor weight
    is reported as that factor's member set.
    """
    rho = np.asarray(weights, dtype=float)
    if rho.shape != (view.graph.num_regions,):
        raise ScopeMismatch("need one weight per region")
    worst_factor = None
    for f in view.factors:
        if rho[f] < 0 and (worst_factor is None or rho[f] < rho[worst_factor]):
            worst_factor = f
    if worst_factor is not None:
        return ConcavityReport(False, view.graph.regions[worst_factor],
                               float(rho[worst_factor]))
    nv = len(view.vertices)
    if nv > max_vertices:
        raise TooManyVertices(f"{nv} vertices exceeds cap {max_vertices}")
    if nv == 0:
        return ConcavityReport(True, None, 0.0)
    vertex_w = np.array([rho[view.singleton_region[s]] for s in view.vertices])
    masks = []
    pos = {v: k for k, v in enumerate(view.vertices)}
    for f in view.factors:
        m = 0
        for s in view.factor_members(f):
            if s in pos:
                m |= 1 << pos[s]
        masks.append(m)
    best_val, best_mask = _min_bethe_subsets(vertex_w, masks, rho[list(view.factors)])
    best_val = min(best_val, 0.0)   # the empty subset always contributes zero
    if best_val >= 0.0:
        return ConcavityReport(True, None, best_val)
    subset = tuple(view.vertices[k] for k in range(nv) if best_mask >> k & 1)
    return ConcavityReport(False, subset, best_val)


def check_kikuchi_concavity(graph: RegionGraph, weights,
                            max_regions: int = 24) -> ConcavityReport:
    """General check of nonnegative forebear-closure weight over all region
    subsets.  Two-layer graphs are reduced to the vertex-subset form; other
    graphs are enumerated exhaustively (capped).

    The violating set is reported as region indices.
    """
    rho = np.asarray(weights, dtype=float)
    if rho.shape != (graph.num_regions,):
        raise ScopeMismatch("need one weight per region")
    try:
        view = two_layer_view(graph)
    except NotTwoLayer:
        view = None

    if view is not None:
        # reduction: singleton factor sets plus vertex subsets suffice
        if len(view.vertices) > max_regions:
            raise TooManyRegions(
                f"{len(view.vertices)} singleton regions exceeds cap {max_regions}"
            )
        best_val = 0.0
        best_set: tuple[int, ...] | None = None
        for f in view.factors:
            if rho[f] < best_val:
                best_val = float(rho[f])
                best_set = (f,)
        if view.vertices:
            vertex_w = np.array([rho[view.singleton_region[s]] for s in view.vertices])
            pos = {v: k for k, v in enumerate(view.vertices)}
            masks = []
            for f in view.factors:
                m = 0
                for s in view.factor_members(f):
                    if s in pos:
                        m |= 1 << pos[s]
                masks.append(m)
            val, mask = _min_bethe_subsets(vertex_w, masks, rho[list(view.factors)])
            if val < best_val:
                best_val = float(val)
                best_set = tuple(
                    view.singleton_region[view.vertices[k]]
                    for k in range(len(view.vertices)) if mask >> k & 1
                )
        if best_val >= 0.0:
            return ConcavityReport(True, None, min(best_val, 0.0))
        return ConcavityReport(False, best_set, best_val)

    n = graph.num_regions
    if n > max_regions:
        raise TooManyRegions(f"{n} regions exceeds cap {max_regions}")
    # region t is in the forebear closure of S iff S meets t's descendants
    dmasks = np.zeros(n, dtype=np.uint64)
    for t in range(n):
        m = 1 << t
        for r in range(n):
            if graph.strictly_contains(t, r):
                m |= 1 << r
        dmasks[t] = m
    best_val = np.inf
    best_mask = 0
    for start in range(1, 1 << n, _SUBSET_CHUNK):
        stop = min(start + _SUBSET_CHUNK, 1 << n)
        m = np.arange(start, stop, dtype=np.uint64)
        total = np.zeros(m.shape)
        for t in range(n):
            total += rho[t] * ((m & dmasks[t]) != 0)
        i = int(np.argmin(total))
        if total[i] < best_val:
            best_val = float(total[i])
            best_mask = int(m[i])
    best_val = min(best_val, 0.0)
    if best_val >= 0.0:
        return ConcavityReport(True, None, best_val)
    subset = tuple(r for r in range(n) if best_mask >> r & 1)
    return ConcavityReport(False, subset, best_val)


# ----------------------------------------------------------------------
# saturating edge labelings (generalized marriage lemma)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeLabeling:
    edges: tuple[tuple[int, int], ...]   # (left node, right node)
    labels: np.ndarray                   # nonnegative, one per edge


def hall_labeling(v1_weights, v2_weights, edges) -> EdgeLabeling:
    """Nonnegative edge labels meeting every left weight exactly and every
    right weight at most.

    Solved as a max-flow problem in exact rational arithmetic (floats are
    rationals), so the existence boundary w(U) = w(N(U)) is decided
    exactly.  When no labeling exists, the reachable left nodes of the
    final residual graph form a violating subset, raised as
    ``HallConditionViolated``.
    """
    w1 = [Fraction(float(w)) for w in v1_weights]
    w2 = [Fraction(float(w)) for w in v2_weights]
    if any(w <= 0 for w in w1) or any(w <= 0 for w in w2):
        raise NonPositiveWeight("weights must be positive")
    edges = [(int(a), int(b)) for a, b in edges]
    n1, n2 = len(w1), len(w2)
    for a, b in edges:
        if not (0 <= a < n1 and 0 <= b < n2):
            raise ScopeMismatch(f"edge ({a},{b}) out of range")

    source = 0
    sink = n1 + n2 + 1
    left = lambda i: 1 + i
    right = lambda j: 1 + n1 + j
    big = sum(w1, Fraction(0)) + 1

    cap = defaultdict(Fraction)
    adj = defaultdict(set)

    def add(u, v, c):
        cap[(u, v)] += c
        adj[u].add(v)
        adj[v].add(u)

    for i, w in enumerate(w1):
        add(source, left(i), w)
    for j, w in enumerate(w2):
        add(right(j), sink, w)
    for a, b in edges:
        add(left(a), right(b), big)

    while True:
        parent = {source: None}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            if u == sink:
                break
            for v in adj[u]:
                if v not in parent and cap[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            break
        path = []
        v = sink
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        bottleneck = min(cap[e] for e in path)
        for u, v in path:
            cap[(u, v)] -= bottleneck
            cap[(v, u)] += bottleneck

    unsaturated = [i for i in range(n1) if cap[(source, left(i))] > 0]
    if unsaturated:
        reachable = {source}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in reachable and cap[(u, v)] > 0:
                    reachable.add(v)
                    queue.append(v)
        violating = [i for i in range(n1) if left(i) in reachable]
        raise HallConditionViolated(violating)

    labels = np.array([float(cap[(right(b), left(a))]) for a, b in edges])
    return EdgeLabeling(tuple(edges), labels)


# ----------------------------------------------------------------------
# curvature probe
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HessianProbe:
    max_curvature: float
    direction: list[np.ndarray] | None   # per-region perturbation, unit norm


def _constraint_matrix(graph: RegionGraph, sizes: list[int]) -> np.ndarray:
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    dim = int(offsets[-1])
    rows = []
    for p, c in graph.hasse_edges:
        restrict = tables.restriction_index(
            graph.regions[p], graph.region_card(p), graph.regions[c]
        )
        for j in range(sizes[c]):
            row = np.zeros(dim)
            row[offsets[p]:offsets[p] + sizes[p]][restrict == j] = 1.0
            row[offsets[c] + j] = -1.0
            rows.append(row)
    for r in range(graph.num_regions):
        row = np.zeros(dim)
        row[offsets[r]:offsets[r] + sizes[r]] = 1.0
        rows.append(row)
    return np.array(rows)


def _weighted_entropy(flat: np.ndarray, offsets, sizes, rho) -> float:
    total = 0.0
    for r in range(len(sizes)):
        if rho[r] == 0.0:
            continue
        p = flat[offsets[r]:offsets[r] + sizes[r]]
        total -= rho[r] * float(np.sum(np.where(p > 0, p * np.log(np.maximum(p, 1e-300)), 0.0)))
    return total


def hessian_probe(graph: RegionGraph, tau: Pseudomarginals, weights,
                  step: float = 1e-4, num_random: int = 20,
                  seed: int = 0) -> HessianProbe:
    """Largest second directional difference of the weighted entropy over
    the tangent space of the local polytope at an interior point.

    Directions probed: an orthonormal tangent basis, the top eigendirection
    of the analytically projected Hessian, and seeded random tangent
    combinations.  All are unit vectors; curvature is a central second
    difference with the given step.
    """
    rho = np.asarray(weights, dtype=float)
    sizes = [t.size for t in tau]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = np.concatenate([t.values.reshape(-1) for t in tau])
    if flat.min() < 10.0 * step:
        raise BoundaryPoint(f"entry {flat.min():.3g} below 10*step")

    basis = null_space(_constraint_matrix(graph, sizes))
    if basis.size == 0:
        return HessianProbe(-np.inf, None)

    directions = [basis[:, k] for k in range(basis.shape[1])]
    # entrywise Hessian of the weighted entropy is diagonal: -rho_r / tau
    diag = np.concatenate([
        np.full(sizes[r], -rho[r]) / flat[offsets[r]:offsets[r] + sizes[r]]
        for r in range(len(sizes))
    ])
    projected = basis.T @ (diag[:, None] * basis)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (projected + projected.T))
    top = basis @ eigvecs[:, -1]
    directions.append(top / np.linalg.norm(top))
    rng = np.random.default_rng(seed)
    for _ in range(num_random):
        d = basis @ rng.standard_normal(basis.shape[1])
        directions.append(d / np.linalg.norm(d))

    h0 = _weighted_entropy(flat, offsets, sizes, rho)
    best = -np.inf
    best_dir = None
    for d in directions:
        plus = _weighted_entropy(flat + step * d, offsets, sizes, rho)
        minus = _weighted_entropy(flat - step * d, offsets, sizes, rho)
        curv = (plus + minus - 2.0 * h0) / step ** 2
        if curv > best:
            best = curv
            best_dir = d
    split = [best_dir[offsets[r]:offsets[r] + sizes[r]].reshape(tau[r].card)
             for r in range(len(sizes))]
    return HessianProbe(float(best), split)


# ----------------------------------------------------------------------
# symmetric pseudomarginal family
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricPoint:
    """Odd-moment and even-moment parameters of the symmetric family."""

    q1: float
    q2: float


def symmetric_tables(graph: RegionGraph, q: SymmetricPoint) -> Pseudomarginals:
    """One table per region of a binary graph: every odd spin product has
    mean q1 and every even one mean q2.  Entries: the two all-equal
    assignments get (1 +- 2^{k-1} q1 + (2^{k-1}-1) q2) / 2^k, everything
    else (1 - q2) / 2^k."""
    if any(d != 2 for d in graph.domain_sizes):
        raise ScopeMismatch("symmetric family needs binary variables")
    out = []
    for i, r in enumerate(graph.regions):
        k = len(r)
        scale = 2.0 ** k
        vals = np.full(2 ** k, (1.0 - q.q2) / scale)
        half = 2.0 ** (k - 1)
        vals[-1] = (1.0 + half * q.q1 + (half - 1.0) * q.q2) / scale   # all +1
        vals[0] = (1.0 - half * q.q1 + (half - 1.0) * q.q2) / scale    # all -1
        low = vals.min()
        if low < -1e-12:
            raise InfeasiblePoint(
                f"entry {low:.3g} negative for region {r} at (q1,q2)=({q.q1},{q.q2})"
            )
        vals = np.maximum(vals, 0.0)
        out.append(FactorTable(r, graph.region_card(i), vals))
    return out


def symmetric_pseudomarginal(view: TwoLayerView, q: SymmetricPoint) -> Pseudomarginals:
    return symmetric_tables(view.graph, q)


class ZetaHessian(NamedTuple):
    d11: float
    d22: float


def zeta_hessian(size_weights: Mapping[int, float], q2: float) -> ZetaHessian:
    """Diagonal Hessian, at q1 = 0, of the weighted entropy restricted to
    the symmetric family.  ``size_weights`` maps region cardinality k to
    the summed weight of regions of that size.  The first entry tends to
    minus the total weight as q2 -> 1; the second is singular there."""
    d11 = -float(size_weights.get(1, 0.0))
    d22 = 0.0
    for k, ck in size_weights.items():
        if k < 2:
            continue
        half = 2.0 ** (k - 1)
        denom = 1.0 + (half - 1.0) * q2
        d11 -= half * ck / denom
        d22 -= (half - 1.0) * ck / (denom * (1.0 - q2))
    return ZetaHessian(d11, d22)


def size_class_weights(graph: RegionGraph, weights) -> dict[int, float]:
    """Total weight per region cardinality."""
    rho = np.asarray(weights, dtype=float)
    out: dict[int, float] = {}
    for i, r in enumerate(graph.regions):
        out[len(r)] = out.get(len(r), 0.0) + float(rho[i])
    return out


def restrict_to_vertices(view: TwoLayerView, weights, subset) -> tuple[RegionGraph, np.ndarray]:
    """Collapse a two-layer graph onto a vertex subset: keep those
    singletons, intersect every factor with the subset, merge regions that
    become equal sets, and sum their weights."""
    rho = np.asarray(weights, dtype=float)
    keep = sorted(set(int(s) for s in subset))
    if not set(keep) <= set(view.vertices):
        raise ScopeMismatch("subset must consist of singleton-owning vertices")
    merged: dict[tuple[int, ...], float] = {}
    for s in keep:
        merged[(s,)] = float(rho[view.singleton_region[s]])
    for f in view.factors:
        inter = tuple(v for v in view.factor_members(f) if v in set(keep))
        if inter:
            merged[inter] = merged.get(inter, 0.0) + float(rho[f])
    regions = list(merged.keys())
    sub = build_region_graph(view.graph.num_vertices, view.graph.domain_sizes, regions)
    return sub, np.array([merged[r] for r in regions])


def symmetric_slice_curvature(graph: RegionGraph, weights, q2: float,
                              step: float = 1e-4) -> float:
    """Second difference of the weighted entropy along the odd-moment axis
    of the symmetric family, at (0, q2)."""
    def value(q1: float) -> float:
        return kikuchi_entropy(graph, symmetric_tables(graph, SymmetricPoint(q1, q2)), weights)

    return (value(step) + value(-step) - 2.0 * value(0.0)) / step ** 2
