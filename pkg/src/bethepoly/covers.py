"""k-covers (graph lifts) of normal factor graphs.

A cover replaces factor ``a`` by copies ``a#0 .. a#(k-1)`` carrying the same
table, and edge ``e = (a, b)`` by ``e#0 .. e#(k-1)`` with ``e#i`` joining
``a#i`` to ``b#pi_e(i)``. Lifted edges are listed edge by edge, so every copy
sees its edges in the original local order and keeps the original table.
Permutations are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exact import DEFAULT_BUDGET_BITS, partition_function
from .graph import FactorGraph, require_valid
from .seeding import rng_for

__all__ = ["CoverSpec", "identity_cover", "random_cover", "build_cover", "CoverEstimate", "sample_cover_estimate", "cover_inequality_check"]


@dataclass(frozen=True)
class CoverSpec:
    k: int
    permutations: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        perms = {}
        for e, p in self.permutations.items():
            p = tuple(int(v) for v in p)
            if sorted(p) != list(range(self.k)):
                raise ValueError(f"permutation of edge {e!r} is not a bijection on 0..{self.k - 1}")
            perms[e] = p
        object.__setattr__(self, "permutations", perms)


def identity_cover(g: FactorGraph, k: int) -> CoverSpec:
    return CoverSpec(k, {e.id: tuple(range(k)) for e in g.edges})


def random_cover(g: FactorGraph, k: int, seed: int, sample: int = 0) -> CoverSpec:
    """Uniform permutations, each reproducible from ``(seed, sample, edge id)``."""
    return CoverSpec(k, {e.id: tuple(rng_for(seed, "cover", sample, e.id).permutation(k).tolist()) for e in g.edges})


def build_cover(g: FactorGraph, spec: CoverSpec) -> FactorGraph:
    require_valid(g)
    k = spec.k
    missing = [e.id for e in g.edges if e.id not in spec.permutations]
    if missing:
        raise ValueError(f"no permutation for edges {missing}")
    factors = [f"{f}#{i}" for f in g.factors for i in range(k)]
    edges = []
    for e in g.edges:
        a, b = e.ends
        pi = spec.permutations[e.id]
        for i in range(k):
            edges.append((f"{e.id}#{i}", (f"{a}#{i}", f"{b}#{pi[i]}")))
    tables = {f"{f}#{i}": g.tables[f] for f in g.factors for i in range(k)}
    return FactorGraph.build(factors, edges, tables)


@dataclass(frozen=True)
class CoverEstimate:
    k: int
    estimate: float
    samples: list[float] = field(default_factory=list)


def _cover_values(g: FactorGraph, k: int, samples: int, seed: int, budget_bits: int) -> list[float]:
    return [partition_function(build_cover(g, random_cover(g, k, seed, s)), budget_bits) for s in range(samples)]


def sample_cover_estimate(
    g: FactorGraph, k: int, samples: int, seed: int = 0, budget_bits: int = DEFAULT_BUDGET_BITS
) -> CoverEstimate:
    """``(mean over sampled covers of Z(H))^(1/k)`` with the raw ``Z(H)`` list."""
    values = _cover_values(g, k, samples, seed, budget_bits)
    mean = float(np.mean(values)) if values else float("nan")
    return CoverEstimate(k, mean ** (1.0 / k), values)


@dataclass(frozen=True)
class CoverReport:
    k: int
    z: float
    samples: list[float]
    violations: list[int]

    def as_dict(self) -> dict:
        return {"k": self.k, "Z": self.z, "Z^k": self.z**self.k, "samples": self.samples, "violations": self.violations}


def cover_inequality_check(
    g: FactorGraph, k: int, samples: int, seed: int = 0, budget_bits: int = DEFAULT_BUDGET_BITS, rtol: float = 1e-9
) -> CoverReport:
    """Sample indices with ``Z(H) > Z(G)^k``; diagnostic only."""
    z = partition_function(g, budget_bits)
    values = _cover_values(g, k, samples, seed, budget_bits)
    bound = z**k * (1 + rtol)
    return CoverReport(k, z, values, [i for i, v in enumerate(values) if v > bound])
