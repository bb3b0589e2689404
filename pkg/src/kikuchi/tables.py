"""Dense tables over joint assignments of a few discrete variables.

A table stores one real value per joint assignment of its scope, laid out
row-major with the last scope variable fastest.  That single layout is
used everywhere, including file output.  Entropy and divergence follow the
0*log(0) = 0 convention, so tables touching the probability-simplex
boundary have finite values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import NotNormalized, ScopeMismatch, SupportViolation

# Below this, a probability is treated as exactly zero inside logs.
_LOG_FLOOR = 1e-300

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class FactorTable:
    """Values indexed by joint assignments of ``scope``.

    ``values`` has shape ``card`` (one axis per scope variable), which is
    the row-major layout of the flat assignment index.
    """

    scope: tuple[int, ...]
    card: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.scope) != len(self.card):
            raise ScopeMismatch("scope and card lengths differ")
        v = np.asarray(self.values, dtype=float)
        if v.shape != tuple(self.card):
            if v.size != int(np.prod(self.card)):
                raise ScopeMismatch(
                    f"expected {int(np.prod(self.card))} values, got {v.size}"
                )
            v = v.reshape(self.card)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    def flat(self) -> np.ndarray:
        """Row-major flat copy (last scope variable fastest)."""
        return self.values.reshape(-1).copy()

    @staticmethod
    def uniform(scope: Sequence[int], card: Sequence[int]) -> "FactorTable":
        card = tuple(card)
        n = int(np.prod(card))
        return FactorTable(tuple(scope), card, np.full(card, 1.0 / n))

    @staticmethod
    def from_flat(scope, card, flat) -> "FactorTable":
        return FactorTable(tuple(scope), tuple(card), np.asarray(flat, dtype=float))


# One table per region index of a RegionGraph.
Pseudomarginals = List[FactorTable]


def _axis_positions(sub_scope, super_scope) -> list[int]:
    pos = []
    for v in sub_scope:
        try:
            pos.append(super_scope.index(v))
        except ValueError:
            raise ScopeMismatch(f"variable {v} not in scope {super_scope}") from None
    return pos


def embed(table: FactorTable, super_scope: Sequence[int], super_card: Sequence[int]) -> np.ndarray:
    """View ``table``'s values as an array broadcastable over ``super_scope``.

    Requires the sub-scope to appear in the same relative order inside the
    super scope (always true for sorted region scopes).
    """
    super_scope = tuple(super_scope)
    pos = _axis_positions(table.scope, super_scope)
    if sorted(pos) != pos:
        raise ScopeMismatch("sub-scope order differs from super-scope order")
    shape = [1] * len(super_scope)
    for axis, v, d in zip(pos, table.scope, table.card):
        if tuple(super_card)[axis] != d:
            raise ScopeMismatch(f"domain size mismatch on variable {v}")
        shape[axis] = d
    return table.values.reshape(shape)


def restriction_index(scope, card, sub_scope) -> np.ndarray:
    """For each flat assignment of ``scope``, the flat assignment index of
    its restriction to ``sub_scope`` (row-major, last variable fastest)."""
    scope = tuple(scope)
    card = tuple(card)
    sub = tuple(sub_scope)
    if not set(sub) <= set(scope):
        raise ScopeMismatch(f"{sub} is not a subset of {scope}")
    sub_stride = {}
    s = 1
    for v in reversed(sub):
        sub_stride[v] = s
        s *= card[scope.index(v)]
    idx = np.arange(int(np.prod(card)), dtype=np.int64)
    out = np.zeros_like(idx)
    stride = 1
    for k in range(len(scope) - 1, -1, -1):
        v = scope[k]
        if v in sub_stride:
            out += ((idx // stride) % card[k]) * sub_stride[v]
        stride *= card[k]
    return out


def marginalize(table: FactorTable, target_scope: Sequence[int]) -> FactorTable:
    """Sum out every variable outside ``target_scope``; total mass is kept."""
    target = tuple(target_scope)
    if not set(target) <= set(table.scope):
        raise ScopeMismatch(f"{target} is not a subset of {table.scope}")
    drop = tuple(i for i, v in enumerate(table.scope) if v not in target)
    summed = table.values.sum(axis=drop) if drop else table.values
    kept = [v for v in table.scope if v in target]
    kept_card = [table.card[table.scope.index(v)] for v in kept]
    out = FactorTable(tuple(kept), tuple(kept_card), summed)
    if tuple(kept) != target:
        perm = [kept.index(v) for v in target]
        out = FactorTable(
            target,
            tuple(kept_card[p] for p in perm),
            np.transpose(summed, axes=perm),
        )
    return out


def _check_probability(values: np.ndarray) -> np.ndarray:
    total = float(values.sum())
    if not math.isfinite(total) or abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"table sums to {total}")
    if values.min() < -NORMALIZATION_TOL:
        raise NotNormalized(f"negative entry {values.min()}")
    return np.maximum(values, 0.0)


def entropy(table: FactorTable) -> float:
    """Shannon entropy in nats of a probability table."""
    p = _check_probability(table.values)
    logs = np.log(np.maximum(p, _LOG_FLOOR))
    return float(-np.sum(np.where(p > 0.0, p * logs, 0.0)))


def kl_divergence(p: FactorTable, q: FactorTable) -> float:
    """Relative entropy between two probability tables on the same scope."""
    if p.scope != q.scope:
        raise ScopeMismatch(f"scopes differ: {p.scope} vs {q.scope}")
    pv = _check_probability(p.values)
    qv = _check_probability(q.values)
    if np.any((pv > 0.0) & (qv <= 0.0)):
        raise SupportViolation("p has mass where q vanishes")
    ratio = np.log(np.maximum(pv, _LOG_FLOOR)) - np.log(np.maximum(qv, _LOG_FLOOR))
    return float(np.sum(np.where(pv > 0.0, pv * ratio, 0.0)))
