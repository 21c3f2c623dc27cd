"""Random and named graph families used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import numpy as np

from .graph import EQUALITY_TABLE, FactorGraph
from .permanent import permanent_nfg

__all__ = [
    "single_edge",
    "uniform_single_edge",
    "triangle",
    "random_tree",
    "random_graph",
    "random_bipartite_affine",
    "affine_table",
    "equality_cycle",
    "permanent_fixtures",
]


def single_edge(t_a=(1.0, 2.0), t_b=(1.0, 3.0)) -> FactorGraph:
    return FactorGraph.build(["a", "b"], [("e", ("a", "b"))], {"a": list(t_a), "b": list(t_b)})


def uniform_single_edge() -> FactorGraph:
    return single_edge((1.0, 1.0), (1.0, 1.0))


def triangle(tables=None) -> FactorGraph:
    tables = tables or {f: [1.0, 1.0, 1.0, 2.0] for f in "abc"}
    return FactorGraph.build(
        ["a", "b", "c"], [("ab", ("a", "b")), ("bc", ("b", "c")), ("ca", ("c", "a"))], tables
    )


def _positive_tables(rng, degrees, low, high):
    return {f: rng.uniform(low, high, 2**d) for f, d in degrees.items()}


def random_tree(rng: np.random.Generator, num_edges: int, max_degree: int = 4, low: float = 0.1, high: float = 2.0) -> FactorGraph:
    """Random tree on ``num_edges + 1`` factors with positive tables."""
    n = num_edges + 1
    names = [f"f{i}" for i in range(n)]
    deg = [0] * n
    edges = []
    for i in range(1, n):
        parents = [j for j in range(i) if deg[j] < max_degree]
        p = int(rng.choice(parents))
        deg[p] += 1
        deg[i] += 1
        edges.append((f"e{i}", (names[p], names[i])))
    return FactorGraph.build(names, edges, _positive_tables(rng, dict(zip(names, deg)), low, high))


def random_graph(
    rng: np.random.Generator,
    num_factors: int,
    num_edges: int,
    low: float = 0.1,
    high: float = 2.0,
    max_degree: int = 4,
) -> FactorGraph:
    """Random connected-ish graph; parallel edges allowed, self-loops never."""
    names = [f"f{i}" for i in range(num_factors)]
    deg = dict.fromkeys(names, 0)
    edges = []
    for i in range(num_edges):
        for _ in range(100):
            if i < num_factors - 1:
                a, b = names[i + 1], names[int(rng.integers(0, i + 1))]
            else:
                a, b = (names[j] for j in rng.choice(num_factors, size=2, replace=False))
            if deg[a] < max_degree and deg[b] < max_degree:
                break
        deg[a] += 1
        deg[b] += 1
        edges.append((f"e{i}", (a, b)))
    return FactorGraph.build(names, edges, _positive_tables(rng, deg, low, high))


def affine_table(rng: np.random.Generator, degree: int, zero_constant_prob: float = 0.0) -> np.ndarray:
    """``c + sum_j a_j x_j`` as a table: nonzero only on masks with at most one bit."""
    t = np.zeros(2**degree)
    t[0] = 0.0 if rng.random() < zero_constant_prob else rng.uniform(0.1, 2.0)
    for j in range(degree):
        t[1 << j] = rng.uniform(0.1, 2.0)
    return t


def random_bipartite_affine(
    rng: np.random.Generator, n_left: int, n_right: int, num_edges: int, zero_constant_prob: float = 0.0
) -> FactorGraph:
    """Bipartite graph whose local polynomials are affine with nonnegative coefficients."""
    left = [f"l{i}" for i in range(n_left)]
    right = [f"r{j}" for j in range(n_right)]
    edges = []
    for i in range(num_edges):
        a = left[i % n_left] if i < max(n_left, n_right) else left[int(rng.integers(n_left))]
        b = right[i % n_right] if i < max(n_left, n_right) else right[int(rng.integers(n_right))]
        edges.append((f"e{i}", (a, b)))
    deg = dict.fromkeys(left + right, 0)
    for _, (a, b) in edges:
        deg[a] += 1
        deg[b] += 1
    tables = {f: affine_table(rng, d, zero_constant_prob) for f, d in deg.items()}
    return FactorGraph.build(left + right, edges, tables)


def equality_cycle(length: int = 4, weights=None) -> FactorGraph:
    """Cycle of degree-2 equality factors, optionally with a diagonal weight per factor."""
    names = [f"q{i}" for i in range(length)]
    edges = [(f"e{i}", (names[i], names[(i + 1) % length])) for i in range(length)]
    tables = {}
    for i, f in enumerate(names):
        t = np.array(EQUALITY_TABLE, dtype=float)
        if weights is not None:
            t[3] = float(weights[i])
        tables[f] = t
    return FactorGraph.build(names, edges, tables)


def permanent_fixtures(rng: np.random.Generator | None = None, sizes=(2, 3, 4), per_size: int = 2):
    """Named permanent graphs: identities, all-ones and random positive matrices."""
    rng = rng or np.random.default_rng(0)
    out = {}
    for n in sizes:
        out[f"identity{n}"] = np.eye(n)
        out[f"ones{n}"] = np.ones((n, n))
        for s in range(per_size):
            out[f"random{n}_{s}"] = rng.uniform(0.1, 2.0, (n, n))
    return {name: (A, permanent_nfg(A)) for name, A in out.items()}
