"""Reweighted sum-product solvers.

Two fixed-point iterations maximize the weighted region objective:

* ``run_kikuchi_rsp`` passes one message per Hasse edge of an arbitrary
  region graph, with parent-to-child updates whose exponents come from the
  region weights; it requires every weight and every parent+child weight
  sum to be safely nonzero.

* ``run_pairwise_rsp`` is the classical edge-reweighted sum product on a
  pairwise binary model, whose updates involve only the (positive) edge
  weights; the vertex weights are pinned to 1 - sum of incident edge
  weights.

All message arithmetic is in the log domain with log-sum-exp; messages are
renormalized after every update, damping mixes log messages, and the
convergence diagnostic is the mean absolute change of the normalized
messages in the linear domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import tables
from .errors import (
    InvalidWeights,
    NonFiniteMessage,
    NonPositiveEdgeWeight,
    ScopeMismatch,
)
from .models import IsingModel, ising_log_potentials
from .objective import ObjectiveValue, inner_product, kikuchi_entropy, objective_value
from .region_graph import RegionGraph, from_ising
from .tables import FactorTable, Pseudomarginals

_WEIGHT_FLOOR = 1e-9


@dataclass
class SolverOptions:
    damping: float = 0.5          # fraction of the old log message retained
    tol: float = 1e-10            # mean absolute message change at convergence
    max_iters: int = 2500
    schedule: str = "parallel"    # or "sequential"
    init: str = "uniform"         # or "random"
    seed: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping must lie in [0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.schedule not in ("parallel", "sequential"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.init not in ("uniform", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class MessageSet:
    """Log-domain messages keyed by Hasse edge (parent index, child index).

    Each exponentiated message sums to one.  ``kind`` records which solver
    produced the set and therefore which belief reconstruction applies.
    """

    kind: str                                        # "kikuchi" | "pairwise"
    log_messages: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)


@dataclass
class SolverResult:
    messages: MessageSet
    tau: Pseudomarginals
    objective: ObjectiveValue
    delta_final: float
    delta_history: list[float]
    iterations: int
    converged: bool


def _normalize_log(values: np.ndarray) -> np.ndarray:
    return values - logsumexp(values)


def _init_messages(shapes, init: str, seed) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for key, shape in shapes.items():
        if init == "uniform":
            m = np.zeros(shape)
        else:
            m = rng.uniform(-1.0, 1.0, size=shape)
        out[key] = _normalize_log(m)
    return out


def _mean_abs_change(new: dict, old: dict) -> float:
    total = 0.0
    count = 0
    for key, m in new.items():
        total += float(np.abs(np.exp(m) - np.exp(old[key])).sum())
        count += m.size
    return total / count if count else 0.0


# ----------------------------------------------------------------------
# generalized region-graph solver
# ----------------------------------------------------------------------

def _check_kikuchi_weights(graph: RegionGraph, rho: np.ndarray) -> None:
    small = np.abs(rho) < _WEIGHT_FLOOR
    if small.any():
        raise InvalidWeights(f"region {int(np.argmax(small))} has weight ~ 0")
    for p, c in graph.hasse_edges:
        if abs(rho[p] + rho[c]) < _WEIGHT_FLOOR:
            raise InvalidWeights(f"weights cancel on Hasse edge ({p},{c})")


def _embedded(graph: RegionGraph, region: int, child: int, values: np.ndarray) -> np.ndarray:
    t = FactorTable(graph.regions[child], graph.region_card(child), values)
    return tables.embed(t, graph.regions[region], graph.region_card(region))


def _kikuchi_update(graph: RegionGraph, theta, rho, log_m, parent: int, child: int) -> np.ndarray:
    s, r = parent, child
    up = theta[s].values / rho[s]
    for v in graph.parents(s):
        up = up + (rho[v] / rho[s]) * log_m[(v, s)]
    for w in graph.children(s):
        if w != r:
            up = up - _embedded(graph, s, w, log_m[(s, w)])
    sum_axes = tuple(
        k for k, v in enumerate(graph.regions[s]) if v not in graph.regions[r]
    )
    log_num = logsumexp(up, axis=sum_axes) if sum_axes else up

    down = theta[r].values / rho[r]
    for u in graph.parents(r):
        if u != s:
            down = down + (rho[u] / rho[r]) * log_m[(u, r)]
    for t in graph.children(r):
        down = down - _embedded(graph, r, t, log_m[(r, t)])

    new = (rho[r] / (rho[r] + rho[s])) * (log_num - down)
    return _normalize_log(new)


def _kikuchi_tau(graph: RegionGraph, theta, rho, log_m) -> Pseudomarginals:
    out = []
    for r in range(graph.num_regions):
        logt = theta[r].values / rho[r]
        for s in graph.parents(r):
            logt = logt + (rho[s] / rho[r]) * log_m[(s, r)]
        for t in graph.children(r):
            logt = logt - _embedded(graph, r, t, log_m[(r, t)])
        logt = _normalize_log(logt)
        out.append(FactorTable(graph.regions[r], graph.region_card(r), np.exp(logt)))
    return out


def run_kikuchi_rsp(graph: RegionGraph, theta: list[FactorTable], weights,
                    opts: SolverOptions | None = None) -> SolverResult:
    """Iterate the generalized reweighted updates over all Hasse edges."""
    opts = opts or SolverOptions()
    rho = np.asarray(weights, dtype=float)
    if rho.shape != (graph.num_regions,):
        raise ScopeMismatch("need one weight per region")
    _check_kikuchi_weights(graph, rho)
    for r, t in enumerate(theta):
        if t.scope != graph.regions[r] or not np.all(np.isfinite(t.values)):
            raise ScopeMismatch(f"bad log potential for region {r}")

    shapes = {(p, c): tuple(graph.region_card(c)) for p, c in graph.hasse_edges}
    log_m = _init_messages(shapes, opts.init, opts.seed)
    order = sorted(shapes)

    deltas: list[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        snapshot = {k: v.copy() for k, v in log_m.items()}
        if opts.schedule == "parallel":
            fresh = {
                key: _kikuchi_update(graph, theta, rho, snapshot, *key)
                for key in order
            }
            for key in order:
                log_m[key] = _normalize_log(
                    (1.0 - opts.damping) * fresh[key] + opts.damping * snapshot[key]
                )
        else:
            # damped messages become visible to later updates in the sweep
            for key in order:
                fresh = _kikuchi_update(graph, theta, rho, log_m, *key)
                log_m[key] = _normalize_log(
                    (1.0 - opts.damping) * fresh + opts.damping * log_m[key]
                )
        for key in order:
            if not np.all(np.isfinite(log_m[key])):
                raise NonFiniteMessage(iteration)
        delta = _mean_abs_change(log_m, snapshot)
        deltas.append(delta)
        if delta <= opts.tol:
            converged = True
            break

    tau = _kikuchi_tau(graph, theta, rho, log_m)
    obj = objective_value(inner_product(theta, tau), kikuchi_entropy(graph, tau, rho))
    return SolverResult(
        messages=MessageSet("kikuchi", log_m),
        tau=tau,
        objective=obj,
        delta_final=deltas[-1] if deltas else 0.0,
        delta_history=deltas,
        iterations=iteration if deltas else 0,
        converged=converged or not shapes,
    )


# ----------------------------------------------------------------------
# pairwise solver
# ----------------------------------------------------------------------

def pairwise_weights(model: IsingModel, rho_edges) -> np.ndarray:
    """Full region weight vector: edge weights as given, vertex weights
    1 - sum of incident edge weights (singletons-then-edges order)."""
    rho_e = np.asarray(rho_edges, dtype=float)
    n = model.graph.num_vertices
    full = np.zeros(n + len(model.graph.edges))
    full[n:] = rho_e
    vertex = np.ones(n)
    for e, (s, t) in enumerate(model.graph.edges):
        vertex[s] -= rho_e[e]
        vertex[t] -= rho_e[e]
    full[:n] = vertex
    return full


def pairwise_problem(model: IsingModel, rho_edges):
    """(region graph, log potentials, full weights) matching the pairwise solver."""
    return from_ising(model), ising_log_potentials(model), pairwise_weights(model, rho_edges)


def run_pairwise_rsp(model: IsingModel, rho_edges,
                     opts: SolverOptions | None = None) -> SolverResult:
    """Edge-reweighted sum product on a pairwise binary model.

    The update into vertex s along edge (s,t) with weight rho_e is, in the
    linear domain,

        M_ts(x_s) ~ sum_{x_t} exp(g_st x_s x_t / rho_e + g_t x_t)
                    * prod_{u in N(t)\\s} M_ut(x_t)^{rho_ut} / M_st(x_t)^{1-rho_e}.
    """
    opts = opts or SolverOptions()
    rho_e = np.asarray(rho_edges, dtype=float)
    edges = model.graph.edges
    if rho_e.shape != (len(edges),):
        raise ScopeMismatch("need one weight per edge")
    if len(edges) and rho_e.min() <= 0:
        raise NonPositiveEdgeWeight(f"min edge weight {rho_e.min()}")

    n = model.graph.num_vertices
    n_dir = 2 * len(edges)
    # directed slot 2e points into s, slot 2e+1 into t, for edge e = (s, t)
    to_node = np.empty(n_dir, dtype=int)
    from_node = np.empty(n_dir, dtype=int)
    edge_of = np.repeat(np.arange(len(edges)), 2)
    for e, (s, t) in enumerate(edges):
        to_node[2 * e], from_node[2 * e] = s, t
        to_node[2 * e + 1], from_node[2 * e + 1] = t, s
    reverse = np.arange(n_dir) ^ 1

    # node_field[v] = (-g_v, +g_v); pair[d][x_to, x_from] = g_e x_to x_from / rho_e
    node_field = np.stack([-model.gamma_s, model.gamma_s], axis=1)
    g = model.gamma_st[edge_of] / rho_e[edge_of]
    pair = np.empty((n_dir, 2, 2))
    pair[:, 0, 0] = pair[:, 1, 1] = g
    pair[:, 0, 1] = pair[:, 1, 0] = -g

    rng = np.random.default_rng(opts.seed)
    if opts.init == "uniform":
        log_m = np.full((n_dir, 2), -np.log(2.0))
    else:
        log_m = rng.uniform(-1.0, 1.0, size=(n_dir, 2))
        log_m -= logsumexp(log_m, axis=1, keepdims=True)

    # A[v](x_v) = sum of rho-weighted incoming log messages, as a matmul
    agg_matrix = np.zeros((n, n_dir))
    agg_matrix[to_node, np.arange(n_dir)] = rho_e[edge_of]

    def aggregate(messages: np.ndarray) -> np.ndarray:
        return agg_matrix @ messages

    deltas: list[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        old = log_m.copy()
        if opts.schedule == "parallel":
            incoming = node_field[from_node] + aggregate(old)[from_node] - old[reverse]
            # two-state log-sum-exp over x_from, then row normalization
            new = np.logaddexp(pair[:, :, 0] + incoming[:, 0, None],
                               pair[:, :, 1] + incoming[:, 1, None])
            new -= np.logaddexp(new[:, 0], new[:, 1])[:, None]
            log_m = (1.0 - opts.damping) * new + opts.damping * old
            log_m -= np.logaddexp(log_m[:, 0], log_m[:, 1])[:, None]
        else:
            # damped messages become visible to later updates in the sweep
            for d in range(n_dir):
                f = from_node[d]
                a = np.zeros(2)
                for d2 in np.nonzero(to_node == f)[0]:
                    a += rho_e[edge_of[d2]] * log_m[d2]
                inc = node_field[f] + a - log_m[reverse[d]]
                row = logsumexp(pair[d] + inc[None, :], axis=1)
                row -= logsumexp(row)
                damped = (1.0 - opts.damping) * row + opts.damping * log_m[d]
                log_m[d] = damped - logsumexp(damped)
        if not np.all(np.isfinite(log_m)):
            raise NonFiniteMessage(iteration)
        delta = float(np.abs(np.exp(log_m) - np.exp(old)).mean()) if n_dir else 0.0
        deltas.append(delta)
        if delta <= opts.tol:
            converged = True
            break

    agg = aggregate(log_m)
    tau: Pseudomarginals = []
    node_log = node_field + agg
    node_log -= logsumexp(node_log, axis=1, keepdims=True)
    for v in range(n):
        tau.append(FactorTable((v,), (2,), np.exp(node_log[v])))
    for e, (s, t) in enumerate(edges):
        side_s = node_field[s] + agg[s] - log_m[2 * e]
        side_t = node_field[t] + agg[t] - log_m[2 * e + 1]
        # pair[2e] is indexed [x_s, x_t] since slot 2e points into s
        logt = pair[2 * e] + side_s[:, None] + side_t[None, :]
        logt -= logsumexp(logt)
        tau.append(FactorTable((s, t), (2, 2), np.exp(logt)))

    graph, theta, full_weights = pairwise_problem(model, rho_e)
    obj = objective_value(inner_product(theta, tau), kikuchi_entropy(graph, tau, full_weights))

    n_vertices = model.graph.num_vertices
    message_dict = {}
    for e, (s, t) in enumerate(edges):
        message_dict[(n_vertices + e, s)] = log_m[2 * e].copy()
        message_dict[(n_vertices + e, t)] = log_m[2 * e + 1].copy()
    return SolverResult(
        messages=MessageSet("pairwise", message_dict),
        tau=tau,
        objective=obj,
        delta_final=deltas[-1] if deltas else 0.0,
        delta_history=deltas,
        iterations=iteration if deltas else 0,
        converged=converged or not edges,
    )


# ----------------------------------------------------------------------
# stationarity diagnostics
# ----------------------------------------------------------------------

def _pairwise_reconstruction(graph: RegionGraph, theta, rho, log_m) -> Pseudomarginals:
    singletons = [r for r in range(graph.num_regions) if len(graph.regions[r]) == 1]
    agg = {}
    for r in singletons:
        a = theta[r].values.copy()
        for p in graph.parents(r):
            a += rho[p] * log_m[(p, r)]
        agg[r] = a
    out: dict[int, FactorTable] = {}
    for r in singletons:
        logt = _normalize_log(agg[r])
        out[r] = FactorTable(graph.regions[r], graph.region_card(r), np.exp(logt))
    for f in range(graph.num_regions):
        if len(graph.regions[f]) == 1:
            continue
        s_idx, t_idx = (
            next(r for r in singletons if graph.regions[r] == (v,))
            for v in graph.regions[f]
        )
        side_s = agg[s_idx] - log_m[(f, s_idx)]
        side_t = agg[t_idx] - log_m[(f, t_idx)]
        logt = theta[f].values / rho[f] + side_s[:, None] + side_t[None, :]
        logt = _normalize_log(logt)
        out[f] = FactorTable(graph.regions[f], graph.region_card(f), np.exp(logt))
    return [out[r] for r in range(graph.num_regions)]


def stationarity_residual(graph: RegionGraph, theta, weights,
                          messages: MessageSet, tau: Pseudomarginals) -> float:
    """How far a solver state is from a stationary point: the largest of
    the consistency residuals, the normalization residuals, and the gap
    between tau and its reconstruction from the messages."""
    rho = np.asarray(weights, dtype=float)
    worst = 0.0
    for p, c in graph.hasse_edges:
        marg = tables.marginalize(tau[p], graph.regions[c])
        worst = max(worst, float(np.abs(marg.values - tau[c].values).max()))
    for t in tau:
        worst = max(worst, abs(float(t.values.sum()) - 1.0))
    if messages.kind == "kikuchi":
        rebuilt = _kikuchi_tau(graph, theta, rho, messages.log_messages)
    elif messages.kind == "pairwise":
        rebuilt = _pairwise_reconstruction(graph, theta, rho, messages.log_messages)
    else:
        raise ValueError(f"unknown message kind {messages.kind!r}")
    for a, b in zip(rebuilt, tau):
        worst = max(worst, float(np.abs(a.values - b.values).max()))
    return worst
