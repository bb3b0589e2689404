"""Graph generators and random spin-model instances.

Spins live in {-1, +1}; assignment index 0 means -1 and index 1 means +1
everywhere tables are built.  Sampling uses numpy's PCG64 generator with
``random()`` (53-bit mantissa scaling), so a seed reproduces the same
model on any platform.  Draw order: vertex fields ascending, then edge
fields in edge order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotPerfectSquare, NonPositiveWeight, TooSmall, VertexOutOfRange
from .tables import FactorTable


class Graph(NamedTuple):
    """Simple undirected graph; edges stored as sorted (s, t) with s < t."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]


def _validate_graph(num_vertices: int, edges) -> Graph:
    out = []
    seen = set()
    for e in edges:
        s, t = int(e[0]), int(e[1])
        if s == t:
            raise VertexOutOfRange(f"self loop at {s}")
        if not (0 <= s < num_vertices and 0 <= t < num_vertices):
            raise VertexOutOfRange(f"edge ({s},{t}) leaves 0..{num_vertices - 1}")
        key = (min(s, t), max(s, t))
        if key in seen:
            raise VertexOutOfRange(f"duplicate edge {key}")
        seen.add(key)
        out.append(key)
    return Graph(int(num_vertices), tuple(out))


@dataclass(frozen=True)
class IsingModel:
    """Pairwise binary model with fields gamma_s * x_s and gamma_st * x_s * x_t."""

    graph: Graph
    gamma_s: np.ndarray
    gamma_st: np.ndarray

    def __post_init__(self):
        gs = np.asarray(self.gamma_s, dtype=float)
        ge = np.asarray(self.gamma_st, dtype=float)
        if gs.shape != (self.graph.num_vertices,):
            raise VertexOutOfRange("need one vertex field per vertex")
        if ge.shape != (len(self.graph.edges),):
            raise VertexOutOfRange("need one coupling per edge")
        if not (np.all(np.isfinite(gs)) and np.all(np.isfinite(ge))):
            raise VertexOutOfRange("potentials must be finite")
        object.__setattr__(self, "gamma_s", gs)
        object.__setattr__(self, "gamma_st", ge)


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise TooSmall("complete graph needs n >= 2")
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Graph(n, tuple(edges))


def torus_grid(n: int) -> Graph:
    """sqrt(n) x sqrt(n) grid with wraparound; every vertex has degree 4."""
    side = int(round(n ** 0.5))
    if side * side != n:
        raise NotPerfectSquare(f"{n} is not a perfect square")
    if side < 3:
        raise TooSmall("wraparound duplicates edges below 3x3")
    edges = set()
    for i in range(side):
        for j in range(side):
            v = i * side + j
            right = i * side + (j + 1) % side
            down = ((i + 1) % side) * side + j
            edges.add((min(v, right), max(v, right)))
            edges.add((min(v, down), max(v, down)))
    return Graph(n, tuple(sorted(edges)))


def sample_ising(graph: Graph, kind: str, omega_s: float = 0.1,
                 omega_st: float = 2.0, seed: int = 0) -> IsingModel:
    """Draw i.i.d. fields: vertex fields uniform on [0, omega_s]; couplings
    uniform on [0, omega_st] (attractive) or [-omega_st, omega_st] (mixed)."""
    if omega_s <= 0 or omega_st <= 0:
        raise NonPositiveWeight("omegas must be positive")
    if kind not in ("attractive", "mixed"):
        raise ValueError(f"unknown kind {kind!r}")
    rng = np.random.default_rng(seed)
    gamma_s = omega_s * rng.random(graph.num_vertices)
    u = rng.random(len(graph.edges))
    if kind == "attractive":
        gamma_st = omega_st * u
    else:
        gamma_st = omega_st * (2.0 * u - 1.0)
    return IsingModel(graph, gamma_s, gamma_st)


def ising_log_potentials(model: IsingModel) -> list[FactorTable]:
    """Log-potential tables aligned with the singletons-then-edges region order."""
    theta = []
    for v in range(model.graph.num_vertices):
        g = model.gamma_s[v]
        theta.append(FactorTable((v,), (2,), np.array([-g, g])))
    for e, (s, t) in enumerate(model.graph.edges):
        g = model.gamma_st[e]
        # rows: x_s in (-1, +1); columns: x_t in (-1, +1)
        theta.append(FactorTable((s, t), (2, 2), np.array([[g, -g], [-g, g]])))
    return theta


def to_json_dict(model: IsingModel) -> dict:
    return {
        "n": model.graph.num_vertices,
        "edges": [list(e) for e in model.graph.edges],
        "gamma_s": list(map(float, model.gamma_s)),
        "gamma_st": list(map(float, model.gamma_st)),
    }


def from_json_dict(data: dict) -> IsingModel:
    graph = _validate_graph(data["n"], data["edges"])
    return IsingModel(graph, np.asarray(data["gamma_s"], dtype=float),
                      np.asarray(data["gamma_st"], dtype=float))


def save_ising(model: IsingModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(model), fh, indent=1)


def load_ising(path) -> IsingModel:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
