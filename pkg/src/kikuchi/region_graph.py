"""Region graphs: vertex-subset regions ordered by containment.

Regions are stored as sorted vertex tuples with a canonical index; every
other module refers to regions by index.  The containment order, its
transitive reduction (the Hasse diagram), and the derived ancestor /
forebear / neighbor sets are computed once at construction and never
mutated, so a graph can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateRegion, EmptyRegion, NotTwoLayer, VertexOutOfRange


class RegionGraph:
    """Immutable region graph over vertices ``0..num_vertices-1``.

    ``domain_size`` may be a single integer (uniform alphabet) or one
    integer per vertex.  Regions keep the order in which they were given;
    that order defines the region indices used everywhere else.
    """

    def __init__(self, num_vertices: int, domain_size, regions: Iterable[Sequence[int]]):
        if num_vertices < 1:
            raise VertexOutOfRange("num_vertices must be positive")
        self.num_vertices = int(num_vertices)

        if isinstance(domain_size, (int, np.integer)):
            sizes = (int(domain_size),) * self.num_vertices
        else:
            sizes = tuple(int(d) for d in domain_size)
            if len(sizes) != self.num_vertices:
                raise VertexOutOfRange("need one domain size per vertex")
        if any(d < 2 for d in sizes):
            raise VertexOutOfRange("domain sizes must be >= 2")
        self.domain_sizes = sizes

        canon = []
        seen = set()
        for raw in regions:
            r = tuple(sorted(int(v) for v in raw))
            if not r:
                raise EmptyRegion("regions must be nonempty")
            if len(set(r)) != len(r):
                raise DuplicateRegion(f"repeated vertex inside region {r}")
            if r[0] < 0 or r[-1] >= self.num_vertices:
                raise VertexOutOfRange(f"region {r} leaves 0..{self.num_vertices - 1}")
            if r in seen:
                raise DuplicateRegion(f"region {r} listed twice")
            seen.add(r)
            canon.append(r)
        if not canon:
            raise EmptyRegion("need at least one region")
        self.regions = tuple(canon)
        self._region_index = {r: i for i, r in enumerate(self.regions)}
        self._region_sets = [frozenset(r) for r in self.regions]

        n = len(self.regions)
        # strict containment: contains[i][j] iff regions[j] < regions[i]
        strict = [[False] * n for _ in range(n)]
        for i, si in enumerate(self._region_sets):
            for j, sj in enumerate(self._region_sets):
                strict[i][j] = i != j and sj < si
        self._strict = strict

        # Hasse edge (p, c): c strictly inside p with no region between.
        hasse = []
        for p in range(n):
            for c in range(n):
                if not strict[p][c]:
                    continue
                if any(strict[p][t] and strict[t][c] for t in range(n)):
                    continue
                hasse.append((p, c))
        self.hasse_edges = tuple(sorted(hasse))

        self._parents = tuple(
            tuple(sorted(p for p, c in self.hasse_edges if c == i)) for i in range(n)
        )
        self._children = tuple(
            tuple(sorted(c for p, c in self.hasse_edges if p == i)) for i in range(n)
        )
        self._ancestors = tuple(
            frozenset(j for j in range(n) if strict[j][i]) for i in range(n)
        )
        self._forebears = tuple(fs | {i} for i, fs in enumerate(self._ancestors))
        self._neighbors = tuple(
            frozenset(j for j in range(n) if i == j or strict[j][i] or strict[i][j])
            for i in range(n)
        )

    @property
    def num_regions(self) -> int:
        return len(self.regions)

    def region_index(self, region: Sequence[int]) -> int:
        return self._region_index[tuple(sorted(region))]

    def region_card(self, i: int) -> tuple[int, ...]:
        """Domain sizes of region i's variables, in scope order."""
        return tuple(self.domain_sizes[v] for v in self.regions[i])

    def contains(self, i: int, j: int) -> bool:
        """True iff region j is a subset (possibly equal) of region i."""
        return i == j or self._strict[i][j]

    def strictly_contains(self, i: int, j: int) -> bool:
        return self._strict[i][j]

    def ancestors(self, i: int) -> frozenset[int]:
        return self._ancestors[i]

    def forebears(self, i: int) -> frozenset[int]:
        return self._forebears[i]

    def neighbors(self, i: int) -> frozenset[int]:
        return self._neighbors[i]

    def parents(self, i: int) -> tuple[int, ...]:
        return self._parents[i]

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def containment_pairs(self) -> list[tuple[int, int]]:
        """All (larger, smaller) index pairs with strict containment."""
        n = self.num_regions
        return [(u, t) for u in range(n) for t in range(n) if self._strict[u][t]]

    def __repr__(self) -> str:
        return (
            f"RegionGraph(num_vertices={self.num_vertices}, "
            f"num_regions={self.num_regions}, hasse_edges={len(self.hasse_edges)})"
        )


@dataclass(frozen=True)
class TwoLayerView:
    """A region graph split into singleton vertices and larger factors.

    Exists only when every containment in the graph relates a singleton to
    a larger region, i.e. no factor sits inside another factor.
    """

    graph: RegionGraph
    vertices: tuple[int, ...]                 # vertex ids that own a singleton region
    singleton_region: dict[int, int]          # vertex id -> region index
    factors: tuple[int, ...]                  # region indices with |r| >= 2

    def factor_members(self, f: int) -> tuple[int, ...]:
        return self.graph.regions[f]

    def factors_containing(self, vertex: int) -> tuple[int, ...]:
        return tuple(f for f in self.factors if vertex in self.graph._region_sets[f])


def build_region_graph(num_vertices: int, domain_size, regions) -> RegionGraph:
    """Validate the inputs and construct an immutable region graph."""
    return RegionGraph(num_vertices, domain_size, regions)


def overcounting_numbers(graph: RegionGraph) -> np.ndarray:
    """Recursive counting weights: each region's weight is one minus the
    total weight of its ancestors, resolved from maximal regions down."""
    n = graph.num_regions
    c = np.zeros(n)
    for i in sorted(range(n), key=lambda i: -len(graph.regions[i])):
        c[i] = 1.0 - sum(c[j] for j in graph.ancestors(i))
    return c


def two_layer_view(graph: RegionGraph) -> TwoLayerView:
    """Split into singletons and factors, or raise ``NotTwoLayer``."""
    for u, t in graph.containment_pairs():
        if len(graph.regions[t]) > 1:
            raise NotTwoLayer(
                f"region {graph.regions[t]} sits inside {graph.regions[u]}"
            )
    vertices = []
    singleton_region = {}
    factors = []
    for i, r in enumerate(graph.regions):
        if len(r) == 1:
            vertices.append(r[0])
            singleton_region[r[0]] = i
        else:
            factors.append(i)
    return TwoLayerView(
        graph=graph,
        vertices=tuple(vertices),
        singleton_region=singleton_region,
        factors=tuple(factors),
    )


def from_ising(model) -> RegionGraph:
    """Region graph of a pairwise spin model: all singletons, then all edges.

    Region order (singletons ascending, then edges in model order) defines
    the indices that potential tables and weights must follow.
    """
    regions = [(v,) for v in range(model.graph.num_vertices)]
    regions.extend(tuple(e) for e in model.graph.edges)
    return RegionGraph(model.graph.num_vertices, 2, regions)


def to_json_dict(graph: RegionGraph) -> dict:
    sizes = set(graph.domain_sizes)
    domain = graph.domain_sizes[0] if len(sizes) == 1 else list(graph.domain_sizes)
    return {
        "num_vertices": graph.num_vertices,
        "domain_size": domain,
        "regions": [list(r) for r in graph.regions],
    }


def from_json_dict(data: dict) -> RegionGraph:
    """Region order in the file defines the region indices."""
    return RegionGraph(data["num_vertices"], data["domain_size"], data["regions"])
