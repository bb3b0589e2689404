"""The reweighted region free-energy objective and exact small-model oracles.

The objective of a weight vector rho and pseudomarginals tau is

    total = <theta, tau> + sum_r rho_r * H_r(tau_r)

maximized over the locally consistent polytope.  The brute-force oracles
enumerate the full joint state space (capped), giving ground truth for the
log partition function, marginals, and entropy on desk-scale models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tables
from .errors import InvalidPseudomarginals, NotNormalized, NotTwoLayer, ScopeMismatch, TooLarge
from .region_graph import RegionGraph, TwoLayerView
from .tables import FactorTable, Pseudomarginals

# Tolerance for accepting pseudomarginals as input; fixed points from a
# converged solver sit well inside this.
ACCEPT_TOL = 1e-6
FIXED_POINT_TOL = 1e-8

DEFAULT_STATE_CAP = 2 ** 26
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ObjectiveValue:
    inner_product: float
    entropy: float
    total: float


def objective_value(inner_product: float, entropy: float) -> ObjectiveValue:
    return ObjectiveValue(inner_product, entropy, inner_product + entropy)


@dataclass(frozen=True)
class LocalPolytopeReport:
    ok: bool
    max_residual: float
    violating_pair: tuple[int, int] | None   # (larger region, smaller region)
    min_entry: float
    max_normalization_error: float


def _check_tables(graph: RegionGraph, tau: Pseudomarginals) -> None:
    if len(tau) != graph.num_regions:
        raise ScopeMismatch("need one table per region")
    for i, t in enumerate(tau):
        if t.scope != graph.regions[i]:
            raise ScopeMismatch(
                f"table {i} has scope {t.scope}, region is {graph.regions[i]}"
            )


def validate_local_polytope(graph: RegionGraph, tau: Pseudomarginals,
                            tol: float = ACCEPT_TOL) -> LocalPolytopeReport:
    """Check normalization, nonnegativity, and marginal consistency of tau.

    Residuals are measured on every containment pair, not just Hasse edges.
    """
    _check_tables(graph, tau)
    min_entry = min(float(t.values.min()) for t in tau)
    max_norm_err = max(abs(float(t.values.sum()) - 1.0) for t in tau)
    max_residual = 0.0
    worst = None
    for u, t in graph.containment_pairs():
        marg = tables.marginalize(tau[u], graph.regions[t])
        residual = float(np.abs(marg.values - tau[t].values).max())
        if residual > max_residual:
            max_residual = residual
            worst = (u, t)
    ok = max_residual <= tol and min_entry >= -tol and max_norm_err <= tol
    return LocalPolytopeReport(ok, max_residual, worst, min_entry, max_norm_err)


def kikuchi_entropy(graph: RegionGraph, tau: Pseudomarginals, weights) -> float:
    """Weighted sum of per-region entropies."""
    _check_tables(graph, tau)
    rho = np.asarray(weights, dtype=float)
    if rho.shape != (graph.num_regions,):
        raise ScopeMismatch("need one weight per region")
    total = 0.0
    for i, t in enumerate(tau):
        if rho[i] != 0.0:
            total += rho[i] * tables.entropy(t)
    return total


def inner_product(theta: list[FactorTable], tau: Pseudomarginals) -> float:
    total = 0.0
    for th, t in zip(theta, tau):
        if th.scope != t.scope:
            raise ScopeMismatch(f"scopes differ: {th.scope} vs {t.scope}")
        total += float(np.sum(th.values * t.values))
    return total


def kikuchi_objective(graph: RegionGraph, theta: list[FactorTable], weights,
                      tau: Pseudomarginals, tol: float = ACCEPT_TOL) -> ObjectiveValue:
    """Evaluate the reweighted objective at locally consistent tau."""
    report = validate_local_polytope(graph, tau, tol)
    if not report.ok:
        raise InvalidPseudomarginals(
            f"max residual {report.max_residual:.3g}, min entry {report.min_entry:.3g}"
        )
    return objective_value(inner_product(theta, tau), kikuchi_entropy(graph, tau, weights))


@dataclass(frozen=True)
class BetheEntropyForms:
    plain: float
    mi_form: float
    ones_form: float | None


def bethe_entropy_forms(view: TwoLayerView, tau: Pseudomarginals, weights,
                        tol: float = 1e-12) -> BetheEntropyForms:
    """The two-layer entropy in its three equivalent writings.

    plain     : sum_s rho_s H_s + sum_a rho_a H_a
    mi_form   : sum_s rho_s' H_s - sum_a rho_a I_a, with
                rho_s' = rho_s + sum_{a owning s} rho_a and
                I_a = sum_{s in a} H_s - H_a
    ones_form : the factor-weight-only writing, defined when rho_s' = 1.
    """
    graph = view.graph
    _check_tables(graph, tau)
    rho = np.asarray(weights, dtype=float)
    h = [tables.entropy(t) for t in tau]

    plain = float(sum(rho[i] * h[i] for i in range(graph.num_regions)))

    mi_form = 0.0
    rho_prime = {}
    for s in view.vertices:
        i = view.singleton_region[s]
        rp = rho[i] + sum(rho[f] for f in view.factors_containing(s))
        rho_prime[s] = rp
        mi_form += rp * h[i]
    for f in view.factors:
        info = sum(h[view.singleton_region[s]] for s in view.factor_members(f)) - h[f]
        mi_form -= rho[f] * info
    mi_form = float(mi_form)

    ones_form = None
    if view.vertices and all(abs(rho_prime[s] - 1.0) <= tol for s in view.vertices):
        ones = 0.0
        for s in view.vertices:
            ones += (1.0 - sum(rho[f] for f in view.factors_containing(s))) * h[view.singleton_region[s]]
        for f in view.factors:
            ones += rho[f] * h[f]
        ones_form = float(ones)

    return BetheEntropyForms(plain, mi_form, ones_form)


# ----------------------------------------------------------------------
# brute-force oracles
# ----------------------------------------------------------------------

def _state_layout(graph: RegionGraph):
    """Per-vertex strides of the global assignment index (last vertex fastest)."""
    sizes = graph.domain_sizes
    n = graph.num_vertices
    strides = [1] * n
    for v in range(n - 2, -1, -1):
        strides[v] = strides[v + 1] * sizes[v + 1]
    total = strides[0] * sizes[0]
    return total, strides


def _region_flat_indices(graph: RegionGraph, r: int, idx: np.ndarray,
                         strides) -> np.ndarray:
    """Flat table index of region r for each global assignment in idx."""
    scope = graph.regions[r]
    card = graph.region_card(r)
    out = np.zeros(idx.shape, dtype=np.int64)
    stride = 1
    for k in range(len(scope) - 1, -1, -1):
        v = scope[k]
        digit = (idx // strides[v]) % graph.domain_sizes[v]
        out += digit * stride
        stride *= card[k]
    return out


def _chunk_energies(graph: RegionGraph, theta_flat, idx, strides) -> np.ndarray:
    e = np.zeros(idx.shape)
    for r in range(graph.num_regions):
        e += theta_flat[r][_region_flat_indices(graph, r, idx, strides)]
    return e


def _prepare(graph: RegionGraph, theta, max_states):
    _check_tables(graph, theta)
    total, strides = _state_layout(graph)
    if total > max_states:
        raise TooLarge(f"{total} states exceeds cap {max_states}")
    theta_flat = [np.ascontiguousarray(t.values).reshape(-1) for t in theta]
    return total, strides, theta_flat


def exact_log_partition(graph: RegionGraph, theta: list[FactorTable],
                        max_states: int = DEFAULT_STATE_CAP) -> float:
    """log sum over all joint states of exp(total log potential).

    Streaming log-sum-exp over fixed-size chunks; the chunk size is a
    constant so results do not depend on how work is split.
    """
    total, strides, theta_flat = _prepare(graph, theta, max_states)
    running_max = -np.inf
    running_sum = 0.0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        e = _chunk_energies(graph, theta_flat, idx, strides)
        m = max(running_max, float(e.max()))
        running_sum = running_sum * np.exp(running_max - m) + float(np.exp(e - m).sum())
        running_max = m
    return running_max + float(np.log(running_sum))


def exact_marginals(graph: RegionGraph, theta: list[FactorTable],
                    max_states: int = DEFAULT_STATE_CAP) -> Pseudomarginals:
    """True per-region marginals of the normalized distribution."""
    total, strides, theta_flat = _prepare(graph, theta, max_states)
    log_z = exact_log_partition(graph, theta, max_states)
    acc = [np.zeros(t.size) for t in theta]
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        p = np.exp(_chunk_energies(graph, theta_flat, idx, strides) - log_z)
        for r in range(graph.num_regions):
            np.add.at(acc[r], _region_flat_indices(graph, r, idx, strides), p)
    return [
        FactorTable(graph.regions[r], graph.region_card(r), acc[r])
        for r in range(graph.num_regions)
    ]


def exact_entropy(graph: RegionGraph, theta: list[FactorTable],
                  max_states: int = DEFAULT_STATE_CAP) -> float:
    """Entropy of the normalized distribution: log Z minus mean log potential."""
    total, strides, theta_flat = _prepare(graph, theta, max_states)
    log_z = exact_log_partition(graph, theta, max_states)
    mean_energy = 0.0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        e = _chunk_energies(graph, theta_flat, idx, strides)
        mean_energy += float(np.sum(np.exp(e - log_z) * e))
    return log_z - mean_energy
