"""Normal factor graphs over binary edge variables.

A factor graph here is a multigraph whose nodes are *factors* and whose
edges are binary *variables*; every edge joins exactly two distinct
factors. Each factor ``a`` carries a nonnegative local table indexed by
bitmask: bit ``j`` of the index is the value of the ``j``-th incident
edge of ``a``, where incident edges are listed in the order they appear
in the global edge list.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import InvalidGraph, NotBipartite, ParseError

__all__ = [
    "Edge",
    "FactorGraph",
    "Bipartition",
    "Violation",
    "validate",
    "require_valid",
    "bipartition",
    "make_bipartite",
    "two_factor_graph",
    "to_document",
    "from_document",
    "parse",
    "serialize",
    "EQUALITY_TABLE",
]

EQUALITY_TABLE = (1.0, 0.0, 0.0, 1.0)


class Edge(NamedTuple):
    id: str
    ends: tuple[str, str]


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def _as_table(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Immutable normal factor graph.

    Construction never raises on structural problems; use :func:`validate`
    to list them. Operations that need a legal graph call
    :func:`require_valid`.
    """

    factors: tuple[str, ...]
    edges: tuple[Edge, ...]
    tables: Mapping[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(str(f) for f in self.factors))
        edges = []
        for e in self.edges:
            if isinstance(e, Edge):
                edges.append(e)
            elif len(e) == 2:
                eid, (a, b) = e
                edges.append(Edge(str(eid), (str(a), str(b))))
            else:
                eid, a, b = e
                edges.append(Edge(str(eid), (str(a), str(b))))
        object.__setattr__(self, "edges", tuple(edges))
        tables = {str(k): _as_table(v) for k, v in dict(self.tables).items()}
        object.__setattr__(self, "tables", MappingProxyType(tables))

    @classmethod
    def build(cls, factors: Iterable[str], edges: Iterable, tables: Mapping) -> "FactorGraph":
        return cls(tuple(factors), tuple(edges), dict(tables))

    # -- derived structure -------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    @cached_property
    def incidence(self) -> dict[str, tuple[int, ...]]:
        """Factor id -> global indices of its incident edges, in canonical order."""
        inc: dict[str, list[int]] = {f: [] for f in self.factors}
        for i, e in enumerate(self.edges):
            a, b = e.ends
            if a in inc:
                inc[a].append(i)
            if b in inc and b != a:
                inc[b].append(i)
        return {f: tuple(v) for f, v in inc.items()}

    def degree(self, factor: str) -> int:
        return len(self.incidence[factor])

    def table(self, factor: str) -> np.ndarray:
        return self.tables[factor]

    def other_end(self, edge: int, factor: str) -> str:
        a, b = self.edges[edge].ends
        return b if a == factor else a

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactorGraph):
            return NotImplemented
        if self.factors != other.factors or self.edges != other.edges:
            return False
        if set(self.tables) != set(other.tables):
            return False
        return all(np.array_equal(self.tables[k], other.tables[k]) for k in self.tables)

    def __hash__(self):
        return hash((self.factors, self.edges))


@dataclass(frozen=True)
class Bipartition:
    left: frozenset
    right: frozenset

    def side_of(self, factor: str) -> str:
        return "L" if factor in self.left else "R"


def validate(g: FactorGraph) -> list[Violation]:
    """Return every violated structural invariant (empty list means ok)."""
    out: list[Violation] = []
    seen = set()
    for f in g.factors:
        if f in seen:
            out.append(Violation("duplicate factor", f"factor id {f!r} repeated"))
        seen.add(f)
    edge_ids = set()
    for e in g.edges:
        if e.id in edge_ids:
            out.append(Violation("duplicate edge", f"edge id {e.id!r} repeated"))
        edge_ids.add(e.id)
        a, b = e.ends
        if a == b:
            out.append(Violation("self-loop", f"edge {e.id!r} joins factor {a!r} to itself"))
        for end in (a, b):
            if end not in seen:
                out.append(Violation("unknown factor", f"edge {e.id!r} references {end!r}"))
    for f in g.factors:
        if f not in g.tables:
            out.append(Violation("missing table", f"no table for factor {f!r}"))
            continue
        t = g.tables[f]
        want = 2 ** g.degree(f)
        if t.size != want:
            out.append(
                Violation("table size", f"factor {f!r} has degree {g.degree(f)} but table length {t.size} != {want}")
            )
        if not np.all(np.isfinite(t)):
            out.append(Violation("non-finite entry", f"table of {f!r} has non-finite values"))
        elif np.any(t < 0):
            out.append(Violation("negative entry", f"table of {f!r} has negative values"))
        elif not np.any(t > 0):
            out.append(Violation("all-zero table", f"table of {f!r} has no positive entry"))
    for f in g.tables:
        if f not in seen:
            out.append(Violation("extra table", f"table given for unknown factor {f!r}"))
    return out


def require_valid(g: FactorGraph) -> None:
    violations = validate(g)
    if violations:
        raise InvalidGraph(violations)


def bipartition(g: FactorGraph) -> Bipartition:
    """2-colour the factor adjacency multigraph (BFS, first factor of each component on the left)."""
    require_valid(g)
    colour: dict[str, int] = {}
    adj: dict[str, list[str]] = {f: [] for f in g.factors}
    for e in g.edges:
        a, b = e.ends
        adj[a].append(b)
        adj[b].append(a)
    for root in g.factors:
        if root in colour:
            continue
        colour[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in colour:
                    colour[v] = 1 - colour[u]
                    queue.append(v)
                elif colour[v] == colour[u]:
                    raise NotBipartite(f"odd cycle through factors {u!r} and {v!r}")
    left = frozenset(f for f, c in colour.items() if c == 0)
    right = frozenset(f for f, c in colour.items() if c == 1)
    return Bipartition(left, right)


def check_bipartition(g: FactorGraph, part: Bipartition) -> None:
    if part.left | part.right != set(g.factors) or part.left & part.right:
        raise NotBipartite("bipartition does not partition the factor set")
    for e in g.edges:
        a, b = e.ends
        if (a in part.left) == (b in part.left):
            raise NotBipartite(f"edge {e.id!r} has both ends on the same side")


def _fresh(name: str, taken: set) -> str:
    cand = name
    i = 1
    while cand in taken:
        cand = f"{name}.{i}"
        i += 1
    taken.add(cand)
    return cand


def make_bipartite(g: FactorGraph) -> FactorGraph:
    """Subdivide every edge with a degree-2 equality factor.

    Edge ``e = {a, b}`` becomes ``a -- eq(e) -- b``; the new edge touching
    ``a`` takes the place of ``e`` in ``a``'s incidence order, so
    original tables are reused unchanged and Z is preserved.
    """
    require_valid(g)
    taken_f = set(g.factors)
    taken_e: set = set()
    factors = list(g.factors)
    tables = {f: g.tables[f] for f in g.factors}
    edges = []
    for e in g.edges:
        a, b = e.ends
        eq = _fresh(f"{e.id}~eq", taken_f)
        factors.append(eq)
        tables[eq] = np.array(EQUALITY_TABLE)
        edges.append(Edge(_fresh(f"{e.id}~a", taken_e), (a, eq)))
        edges.append(Edge(_fresh(f"{e.id}~b", taken_e), (eq, b)))
    return FactorGraph(tuple(factors), tuple(edges), tables)


def _num_bits(n: int, what: str) -> int:
    m = int(n).bit_length() - 1
    if n <= 0 or 2**m != n:
        raise ValueError(f"{what} length {n} is not a power of two")
    return m


def two_factor_graph(q: Sequence[float], r: Sequence[float]) -> FactorGraph:
    """NFG with factors ``Q`` and ``R`` joined by ``m`` parallel edges; ``Z = sum_s q_s r_s``."""
    q = np.asarray(q, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    if q.size != r.size:
        raise ValueError("q and r must have the same length")
    m = _num_bits(q.size, "coefficient vector")
    edges = tuple(Edge(f"e{j + 1}", ("Q", "R")) for j in range(m))
    g = FactorGraph(("Q", "R"), edges, {"Q": q, "R": r})
    require_valid(g)
    return g


# -- document format -------------------------------------------------------


def to_document(g: FactorGraph) -> dict:
    return {
        "factors": list(g.factors),
        "edges": [{"id": e.id, "ends": [e.ends[0], e.ends[1]]} for e in g.edges],
        "tables": {f: [float(x) for x in g.tables[f]] for f in g.factors if f in g.tables},
    }


def from_document(doc) -> FactorGraph:
    if not isinstance(doc, dict):
        raise ParseError("document must be an object")
    for key in ("factors", "edges", "tables"):
        if key not in doc:
            raise ParseError("missing required field", field=key)
    extra = set(doc) - {"factors", "edges", "tables"}
    if extra:
        raise ParseError(f"unexpected fields {sorted(extra)}")
    factors = doc["factors"]
    if not isinstance(factors, list) or not all(isinstance(f, str) for f in factors):
        raise ParseError("must be an array of strings", field="factors")
    edges = []
    if not isinstance(doc["edges"], list):
        raise ParseError("must be an array", field="edges")
    for i, e in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        if not isinstance(e, dict) or "id" not in e or "ends" not in e:
            raise ParseError("edge must be an object with 'id' and 'ends'", field=where)
        ends = e["ends"]
        if not isinstance(e["id"], str):
            raise ParseError("edge id must be a string", field=f"{where}.id")
        if not (isinstance(ends, list) and len(ends) == 2 and all(isinstance(x, str) for x in ends)):
            raise ParseError("ends must be two factor ids", field=f"{where}.ends")
        edges.append(Edge(e["id"], (ends[0], ends[1])))
    tables_doc = doc["tables"]
    if not isinstance(tables_doc, dict):
        raise ParseError("must be an object", field="tables")
    tables = {}
    for f, vals in tables_doc.items():
        where = f"tables.{f}"
        if not isinstance(vals, list):
            raise ParseError("table must be an array of numbers", field=where)
        for j, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError("entry is not a number", field=f"{where}[{j}]")
            if not np.isfinite(v):
                raise ParseError("entry is not finite", field=f"{where}[{j}]")
            if v < 0:
                raise ParseError(f"negative table entry {v}", field=f"{where}[{j}]")
        tables[f] = vals
    g = FactorGraph(tuple(factors), tuple(edges), tables)
    violations = validate(g)
    if violations:
        raise ParseError("; ".join(str(v) for v in violations))
    return g


def parse(text: str) -> FactorGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return from_document(doc)


def serialize(g: FactorGraph) -> str:
    return json.dumps(to_document(g), indent=2) + "\n"
