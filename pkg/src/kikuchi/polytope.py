"""Concavity region of two-layer factor weights and its cycle-structure geometry.

The admissible factor weights (vertex weights pinned by the all-ones
reparametrization) form the polytope

    C = { rho in [0,1]^F : sum over factors meeting U of
          (|a * U| - 1) rho_a  <=  |U|   for every vertex subset U }.

Its integral skeleton is the family of factor subsets whose incidence
graph is a single-cycle forest: every connected component carries at most
one cycle, equivalently has no more edges than vertices.  On pairwise
graphs the convex hull of that family equals C exactly; with larger
factors the hull can be strictly smaller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import (
    BadFamilyParameter,
    NonIntegerWeight,
    NonPositiveWeight,
    TooManyFactors,
    TooManyVertices,
)
from .models import Graph
from .region_graph import TwoLayerView

_SUBSET_CHUNK = 1 << 18


class _DSU:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.n_vertices = [1] * n
        self.n_edges = [0] * n

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def add_edge(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            self.n_edges[ra] += 1
            return
        self.parent[rb] = ra
        self.n_vertices[ra] += self.n_vertices[rb]
        self.n_edges[ra] += self.n_edges[rb] + 1


def _components(num_nodes: int, edges) -> list[tuple[int, int]]:
    """(vertex count, edge count) of every connected component."""
    dsu = _DSU(num_nodes)
    for a, b in edges:
        dsu.add_edge(a, b)
    return [
        (dsu.n_vertices[r], dsu.n_edges[r])
        for r in range(num_nodes)
        if dsu.find(r) == r
    ]


def is_single_cycle_forest(graph: Graph, subset: Sequence[int] | None = None) -> bool:
    """True iff every component of the chosen edges has #edges <= #vertices."""
    if subset is None:
        edges = graph.edges
    else:
        edges = [graph.edges[i] for i in subset]
    return all(ne <= nv for nv, ne in _components(graph.num_vertices, edges))


def _incidence_edges(view: TwoLayerView, factor_positions):
    """Bipartite incidence of the chosen factors with their member vertices.

    Nodes 0..num_vertices-1 are graph vertices; node num_vertices + p is
    the factor at position p in view.factors.
    """
    n = view.graph.num_vertices
    edges = []
    for p in factor_positions:
        f = view.factors[p]
        for s in view.factor_members(f):
            edges.append((s, n + p))
    return n + len(view.factors), edges


def incidence_single_cycle_forest(view: TwoLayerView, factor_positions) -> bool:
    """Single-cycle-forest test on the factor/vertex incidence graph."""
    num_nodes, edges = _incidence_edges(view, factor_positions)
    return all(ne <= nv for nv, ne in _components(num_nodes, edges))


@dataclass(frozen=True)
class PolytopeMembership:
    member: bool
    violating_U: tuple[int, ...] | None   # vertex ids of a violated inequality


def _factor_vertex_masks(view: TwoLayerView) -> list[int]:
    pos = {v: k for k, v in enumerate(view.vertices)}
    masks = []
    for f in view.factors:
        m = 0
        for s in view.factor_members(f):
            if s in pos:
                m |= 1 << pos[s]
        masks.append(m)
    return masks


def in_concavity_polytope(view: TwoLayerView, factor_weights,
                          max_vertices: int = 24,
                          tol: float = 1e-9) -> PolytopeMembership:
    """Exhaustively test every vertex-subset inequality of the polytope.

    On violation, reports the most violated subset (ties broken toward
    fewer vertices, then lexicographically).
    """
    rho = np.asarray(factor_weights, dtype=float)
    if rho.shape != (len(view.factors),):
        raise TooManyFactors("need one weight per factor")
    if rho.min() < -tol or rho.max() > 1.0 + tol:
        return PolytopeMembership(False, None)
    nv = len(view.vertices)
    if nv > max_vertices:
        raise TooManyVertices(f"{nv} vertices exceeds cap {max_vertices}")

    fmasks = np.array(_factor_vertex_masks(view), dtype=np.uint64)
    best = None   # (violation, popcount, mask)
    for start in range(1, 1 << nv, _SUBSET_CHUNK):
        stop = min(start + _SUBSET_CHUNK, 1 << nv)
        m = np.arange(start, stop, dtype=np.uint64)
        lhs = np.zeros(m.shape)
        for w, fm in zip(rho, fmasks):
            cnt = np.bitwise_count(m & fm).astype(np.int64)
            lhs += w * np.maximum(cnt - 1, 0)
        sizes = np.bitwise_count(m).astype(np.int64)
        violation = lhs - sizes
        top = float(violation.max())
        if top <= tol:
            continue
        cand = np.nonzero(violation >= top - 1e-12)[0]
        cand = cand[np.lexsort((m[cand], sizes[cand]))]
        pick = cand[0]
        key = (float(violation[pick]), int(sizes[pick]), int(m[pick]))
        if best is None or (key[0] > best[0] + 1e-12) or (
            abs(key[0] - best[0]) <= 1e-12 and key[1:] < best[1:]
        ):
            best = key
    if best is None:
        return PolytopeMembership(True, None)
    mask = best[2]
    subset = tuple(view.vertices[k] for k in range(nv) if mask >> k & 1)
    return PolytopeMembership(False, subset)


def enumerate_F(view: TwoLayerView, max_factors: int = 20) -> list[tuple[int, ...]]:
    """All factor-subset indicators whose incidence is a single-cycle forest."""
    nf = len(view.factors)
    if nf > max_factors:
        raise TooManyFactors(f"{nf} factors exceeds cap {max_factors}")
    out = []
    for mask in range(1 << nf):
        chosen = [p for p in range(nf) if mask >> p & 1]
        if incidence_single_cycle_forest(view, chosen):
            out.append(tuple((mask >> p) & 1 for p in range(nf)))
    return out


def _random_maximal_forest(view: TwoLayerView, rng) -> np.ndarray:
    nf = len(view.factors)
    chosen: list[int] = []
    for p in rng.permutation(nf):
        if incidence_single_cycle_forest(view, chosen + [int(p)]):
            chosen.append(int(p))
    ind = np.zeros(nf)
    ind[chosen] = 1.0
    return ind


def sample_conv_F(view: TwoLayerView, count: int, seed: int, mix: int = 4) -> list[np.ndarray]:
    """Random points of the single-cycle-forest hull: each sample averages
    ``mix`` randomized-greedy maximal indicators with Dirichlet weights."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        indicators = [_random_maximal_forest(view, rng) for _ in range(mix)]
        coeffs = rng.dirichlet(np.ones(mix))
        samples.append(sum(c * v for c, v in zip(coeffs, indicators)))
    return samples


class MaxWeightForest(NamedTuple):
    subset: tuple[int, ...]   # edge indices, ascending
    value: float


def max_weight_single_cycle_forest(graph: Graph, edge_weights) -> MaxWeightForest:
    """Greedy maximum-weight single-cycle forest of a pairwise graph.

    Edges are taken in decreasing weight (ties toward lower index); an edge
    enters iff its component keeps at most one cycle.  The admissible sets
    are the independent sets of a matroid, so the greedy value is optimal.
    """
    w = np.asarray(edge_weights, dtype=float)
    if w.shape != (len(graph.edges),):
        raise NonPositiveWeight("need one weight per edge")
    if w.min() <= 0:
        raise NonPositiveWeight("weights must be positive")
    order = sorted(range(len(graph.edges)), key=lambda i: (-w[i], i))
    dsu = _DSU(graph.num_vertices)
    chosen = []
    for i in order:
        s, t = graph.edges[i]
        rs, rt = dsu.find(s), dsu.find(t)
        if rs == rt:
            admissible = dsu.n_edges[rs] < dsu.n_vertices[rs]
        else:
            admissible = (
                dsu.n_edges[rs] + dsu.n_edges[rt] + 1
                <= dsu.n_vertices[rs] + dsu.n_vertices[rt]
            )
        if admissible:
            dsu.add_edge(s, t)
            chosen.append(i)
    chosen.sort()
    return MaxWeightForest(tuple(chosen), float(w[chosen].sum()))


def lp_upper_bound(graph: Graph, integer_weights) -> int:
    """Threshold-decomposition bound on the maximum-weight single-cycle forest.

    For each level i, the subgraph of edges with weight >= i contributes
    its incident-vertex count minus its number of tree components; the
    greedy optimum attains the summed bound.
    """
    w = np.asarray(integer_weights)
    if w.shape != (len(graph.edges),):
        raise NonIntegerWeight("need one weight per edge")
    if not np.all(w == np.floor(w)) or w.min() < 1:
        raise NonIntegerWeight("weights must be integers >= 1")
    w = w.astype(int)
    bound = 0
    for level in range(1, int(w.max()) + 1):
        edges = [graph.edges[i] for i in range(len(w)) if w[i] >= level]
        comps = [
            (nv, ne) for nv, ne in _components(graph.num_vertices, edges) if ne > 0
        ]
        n_vertices = sum(nv for nv, _ in comps)
        n_trees = sum(1 for nv, ne in comps if ne == nv - 1)
        bound += n_vertices - n_trees
    return bound


class Thresholds(NamedTuple):
    rho_tree: float
    rho_cycle: float


def uniform_weight_thresholds(family: str, n: int) -> Thresholds:
    """Largest uniform edge weight inside the spanning-forest hull and the
    single-cycle-forest hull, for the two benchmark families."""
    if family == "complete":
        if n < 3:
            raise BadFamilyParameter("complete family needs n >= 3")
        return Thresholds(2.0 / n, 2.0 / (n - 1))
    if family == "torus":
        side = int(round(n ** 0.5))
        if side * side != n or side < 3:
            raise BadFamilyParameter("torus family needs a perfect square n >= 9")
        return Thresholds((n - 1) / (2.0 * n), 0.5)
    raise BadFamilyParameter(f"unknown family {family!r}")


def uniform_thresholds_exhaustive(graph: Graph, max_vertices: int = 20) -> Thresholds:
    """Thresholds of an arbitrary pairwise graph by subset enumeration.

    rho_tree is the reciprocal fractional arboricity, rho_cycle the
    reciprocal maximum edge density |E(U)|/|U|; both capped at 1.
    """
    n = graph.num_vertices
    if n > max_vertices:
        raise TooManyVertices(f"{n} vertices exceeds cap {max_vertices}")
    rho_tree = 1.0
    rho_cycle = 1.0
    for mask in range(1, 1 << n):
        edges = [e for e in graph.edges if mask >> e[0] & 1 and mask >> e[1] & 1]
        if not edges:
            continue
        comps = [(nv, ne) for nv, ne in _components(n, edges) if ne > 0]
        rank = sum(nv - 1 for nv, _ in comps)
        ne_total = sum(ne for _, ne in comps)
        size = bin(mask).count("1")
        if rank > 0:
            rho_tree = min(rho_tree, rank / ne_total)
        rho_cycle = min(rho_cycle, size / ne_total)
    return Thresholds(rho_tree, rho_cycle)


@dataclass(frozen=True)
class HullMembership:
    member: bool
    distance_upper: float     # distance of the best convex combination found
    separation_lower: float   # positive => certified outside the hull


def convex_hull_membership(points, x, tol: float = 1e-9) -> HullMembership:
    """Decide whether x lies in the convex hull of the given points.

    Solves the nonnegative least-squares relaxation with a penalty row
    enforcing the coefficients to sum to one, then certifies: membership
    by the residual of the renormalized combination, non-membership by a
    separating direction evaluated on every point.
    """
    P = np.asarray(points, dtype=float)
    x = np.asarray(x, dtype=float)
    if P.ndim != 2 or P.shape[1] != x.shape[0]:
        raise TooManyFactors("points and query dimension mismatch")
    kappa = 1e6
    A = np.vstack([P.T, kappa * np.ones((1, P.shape[0]))])
    b = np.concatenate([x, [kappa]])
    lam, _ = nnls(A, b)
    total = lam.sum()
    if total <= 0:
        lam = np.full(P.shape[0], 1.0 / P.shape[0])
    else:
        lam = lam / total
    closest = P.T @ lam
    diff = closest - x
    upper = float(np.sqrt(diff @ diff))
    norm = float(np.sqrt(diff @ diff))
    if norm > 0:
        margins = P @ diff - float(x @ diff)
        separation = float(margins.min()) / norm
    else:
        separation = 0.0
    return HullMembership(upper <= tol, upper, separation)


def proposition1_witness(view: TwoLayerView) -> np.ndarray | None:
    """Weight vector inside the polytope but outside the single-cycle hull.

    Exists when the full incidence graph is not a single-cycle forest and
    some maximal admissible factor subset induces a forest: put weight one
    on that subset and 1/(|a*|-1) on one remaining factor a*.
    """
    nf = len(view.factors)
    if incidence_single_cycle_forest(view, range(nf)):
        return None
    family = enumerate_F(view)
    family_sets = [frozenset(p for p in range(nf) if ind[p]) for ind in family]
    maximal = [
        fs for fs in family_sets
        if not any(fs < other for other in family_sets)
    ]
    for fs in sorted(maximal, key=lambda s: sorted(s)):
        num_nodes, edges = _incidence_edges(view, sorted(fs))
        comps = [(nv, ne) for nv, ne in _components(num_nodes, edges) if ne > 0]
        if any(ne > nv - 1 for nv, ne in comps):
            continue
        outside = [p for p in range(nf) if p not in fs]
        if not outside:
            continue
        star = outside[0]
        size = len(view.factor_members(view.factors[star]))
        rho = np.zeros(nf)
        rho[sorted(fs)] = 1.0
        rho[star] = 1.0 / (size - 1)
        if not in_concavity_polytope(view, rho).member:
            continue
        hull = convex_hull_membership(np.array(family, dtype=float), rho)
        if hull.member:
            continue
        return rho
    return None
