"""Ground truth by exhaustive enumeration over edge configurations.

Configurations are global bitmasks: bit ``i`` is the value of edge ``i``
in the graph's edge order. Sums run over ascending bitmasks in fixed-size
chunks, so results are deterministic for a given graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import BudgetExceeded, NormalizeZero, ZeroPartition
from .graph import Bipartition, FactorGraph, check_bipartition, require_valid

DEFAULT_BUDGET_BITS = 24
_CHUNK_BITS = 18


@dataclass(frozen=True)
class SideDistribution:
    weights: np.ndarray
    normalized: bool


def _check_budget(g: FactorGraph, budget_bits: int) -> None:
    if g.num_edges > budget_bits:
        raise BudgetExceeded(f"2^{g.num_edges} configurations exceed the budget 2^{budget_bits}")


def local_index(g: FactorGraph, factor: str, sigma: np.ndarray) -> np.ndarray:
    """Local table index of ``factor`` for an array of global bitmasks."""
    sigma = np.asarray(sigma, dtype=np.int64)
    idx = np.zeros_like(sigma)
    for j, e in enumerate(g.incidence[factor]):
        idx |= ((sigma >> e) & 1) << j
    return idx


def _chunks(m: int):
    total = 1 << m
    step = 1 << min(m, _CHUNK_BITS)
    for start in range(0, total, step):
        yield np.arange(start, min(start + step, total), dtype=np.int64)


def _weights(g: FactorGraph, sigma: np.ndarray, factors: Iterable[str]) -> np.ndarray:
    w = np.ones(sigma.shape, dtype=float)
    for f in factors:
        w *= g.tables[f][local_index(g, f, sigma)]
    return w


def configuration_weight(g: FactorGraph, sigma: int) -> float:
    """Unnormalized weight ``prod_a g_a(sigma_a)`` of one configuration."""
    return float(_weights(g, np.array([sigma]), g.factors)[0])


def configuration_weights(g: FactorGraph, budget_bits: int = DEFAULT_BUDGET_BITS) -> np.ndarray:
    """All ``2^|E|`` configuration weights, indexed by global bitmask."""
    require_valid(g)
    _check_budget(g, budget_bits)
    return np.concatenate([_weights(g, s, g.factors) for s in _chunks(g.num_edges)])


def partition_function(g: FactorGraph, budget_bits: int = DEFAULT_BUDGET_BITS) -> float:
    require_valid(g)
    _check_budget(g, budget_bits)
    total = 0.0
    for s in _chunks(g.num_edges):
        total += float(np.sum(_weights(g, s, g.factors)))
    return total


def _positive_z(g: FactorGraph, budget_bits: int) -> float:
    z = partition_function(g, budget_bits)
    if z <= 0:
        raise ZeroPartition("Z(G) = 0; the configuration distribution is undefined")
    return z


def config_probability(g: FactorGraph, sigma: int, budget_bits: int = DEFAULT_BUDGET_BITS) -> float:
    z = _positive_z(g, budget_bits)
    return configuration_weight(g, sigma) / z


def exact_marginals(g: FactorGraph, budget_bits: int = DEFAULT_BUDGET_BITS) -> np.ndarray:
    """``beta_e = Pr[X_e = 1]`` for every edge, in edge order."""
    z = _positive_z(g, budget_bits)
    acc = np.zeros(g.num_edges)
    for s in _chunks(g.num_edges):
        w = _weights(g, s, g.factors)
        for i in range(g.num_edges):
            acc[i] += float(np.sum(w[((s >> i) & 1) == 1]))
    return np.clip(acc / z, 0.0, 1.0)


def side_distribution(
    g: FactorGraph,
    part: Bipartition,
    side: str,
    normalize: bool = False,
    budget_bits: int = DEFAULT_BUDGET_BITS,
) -> SideDistribution:
    """Weights ``l_sigma`` (side ``"L"``) or ``r_sigma`` (side ``"R"``) over all configurations."""
    require_valid(g)
    check_bipartition(g, part)
    _check_budget(g, budget_bits)
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    members = [f for f in g.factors if (f in part.left) == (side == "L")]
    w = np.concatenate([_weights(g, s, members) for s in _chunks(g.num_edges)])
    if normalize:
        total = float(np.sum(w))
        if total <= 0:
            raise NormalizeZero(f"side {side} has zero total weight")
        w = w / total
    w.setflags(write=False)
    return SideDistribution(w, normalize)


def entropy_program_oracle(g: FactorGraph, budget_bits: int = DEFAULT_BUDGET_BITS) -> float:
    """Objective ``sum_s q_s log(g(s)/q_s)`` of the global max-entropy program at ``q = p``.

    The program's optimum is attained at the configuration distribution, so
    this value equals ``log Z``; it is computed from the objective rather
    than from ``Z`` so the two can be compared.
    """
    w = configuration_weights(g, budget_bits)
    z = float(np.sum(w))
    if z <= 0:
        raise ZeroPartition("Z(G) = 0")
    p = w / z
    mask = p > 0
    return float(np.sum(p[mask] * np.log(w[mask] / p[mask])))


def partition_function_pruned(g: FactorGraph) -> float:
    """Z by depth-first search over factor supports.

    Factors are assigned local configurations from their supports, one at
    a time, rejecting choices that disagree with already-fixed edges. Cost
    scales with the number of consistent partial assignments rather than
    ``2^|E|``, which makes permanent graphs with ``n <= 6`` tractable.
    """
    require_valid(g)
    order = sorted(g.factors, key=lambda f: (np.count_nonzero(g.tables[f]), g.factors.index(f)))
    supports = {}
    for f in order:
        t = g.tables[f]
        nz = np.flatnonzero(t)
        supports[f] = [(int(c), float(t[c])) for c in nz]
    value = [None] * g.num_edges

    def rec(pos: int) -> float:
        if pos == len(order):
            return 1.0
        f = order[pos]
        inc = g.incidence[f]
        total = 0.0
        for c, w in supports[f]:
            ok = True
            changed = []
            for j, e in enumerate(inc):
                bit = (c >> j) & 1
                if value[e] is None:
                    value[e] = bit
                    changed.append(e)
                elif value[e] != bit:
                    ok = False
                    break
            if ok:
                total += w * rec(pos + 1)
            for e in changed:
                value[e] = None
        return total

    return rec(0)
