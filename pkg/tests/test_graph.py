import json

import numpy as np
import pytest

from bethepoly.errors import InvalidGraph, NotBipartite, ParseError
from bethepoly.exact import partition_function
from bethepoly.fixtures import random_graph, random_tree, single_edge, triangle
from bethepoly.graph import (
    FactorGraph,
    bipartition,
    check_bipartition,
    from_document,
    make_bipartite,
    parse,
    require_valid,
    serialize,
    to_document,
    two_factor_graph,
    validate,
)
from bethepoly.permanent import permanent_nfg

from conftest import naive_z


def kinds(g):
    return [v.kind for v in validate(g)]


def test_minimal_graph_is_valid():
    assert validate(single_edge()) == []


def test_self_loop_reported():
    g = FactorGraph.build(["a"], [("e", ("a", "a"))], {"a": [1, 1, 1, 1]})
    assert "self-loop" in kinds(g)


def test_table_size_reported():
    g = FactorGraph.build(["a", "b", "c"], [("e1", ("a", "b")), ("e2", ("a", "c"))], {"a": [1, 1, 1], "b": [1, 1], "c": [1, 1]})
    assert "table size" in kinds(g)


def test_other_violations_collected_not_raised():
    g = FactorGraph.build(
        ["a", "a", "b"],
        [("e", ("a", "b")), ("e", ("a", "x"))],
        {"a": [1, -1, 0, 0], "b": [0, 0], "z": [1]},
    )
    found = set(kinds(g))
    assert {"duplicate factor", "duplicate edge", "unknown factor", "extra table"} <= found
    with pytest.raises(InvalidGraph):
        require_valid(g)


def test_negative_and_zero_tables():
    assert "negative entry" in kinds(single_edge((1, -1), (1, 1)))
    assert "all-zero table" in kinds(single_edge((0, 0), (1, 1)))
    assert "non-finite entry" in kinds(single_edge((1, np.inf), (1, 1)))


def test_parallel_edges_permitted():
    g = FactorGraph.build(["a", "b"], [("e1", ("a", "b")), ("e2", ("a", "b"))], {"a": np.ones(4), "b": np.ones(4)})
    assert validate(g) == []
    assert g.incidence == {"a": (0, 1), "b": (0, 1)}


def test_incidence_follows_global_edge_order():
    g = FactorGraph.build(
        ["a", "b", "c"], [("x", ("b", "c")), ("y", ("a", "b")), ("z", ("c", "a"))], {f: np.ones(4) for f in "abc"}
    )
    assert g.incidence == {"a": (1, 2), "b": (0, 1), "c": (0, 2)}


def test_bipartition_single_edge():
    part = bipartition(single_edge())
    assert part.left == {"a"} and part.right == {"b"}


def test_bipartition_permanent_rows_and_columns():
    part = bipartition(permanent_nfg(np.ones((2, 2))))
    assert part.left == {"r0", "r1"} and part.right == {"c0", "c1"}


def test_triangle_not_bipartite():
    with pytest.raises(NotBipartite):
        bipartition(triangle())


def test_bipartition_assigns_opposite_ends(rng):
    for _ in range(30):
        g = random_tree(rng, int(rng.integers(1, 9)))
        part = bipartition(g)
        check_bipartition(g, part)
        for e in g.edges:
            a, b = e.ends
            assert (a in part.left) != (b in part.left)


def test_make_bipartite_single_edge():
    g = single_edge()
    h = make_bipartite(g)
    assert len(h.factors) == 3 and h.num_edges == 2
    assert partition_function(h) == pytest.approx(7.0, rel=1e-15)


def test_make_bipartite_triangle():
    g = triangle({"a": [1, 2, 3, 4], "b": [0.5, 1, 1, 2], "c": [1, 0, 2, 1]})
    h = make_bipartite(g)
    assert len(h.factors) == 6
    bipartition(h)
    assert partition_function(h) == pytest.approx(naive_z(g), rel=1e-12)


def test_make_bipartite_preserves_z_random(rng):
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(2, 5)), int(rng.integers(1, 7)))
        h = make_bipartite(g)
        assert h.num_edges == 2 * g.num_edges <= 12
        part = bipartition(h)
        assert set(g.factors) <= part.left or set(g.factors) <= part.right
        assert partition_function(h) == pytest.approx(partition_function(g), rel=1e-12)


def test_make_bipartite_transforms_bipartite_input_too():
    g = single_edge()
    assert make_bipartite(g).num_edges == 2


def test_two_factor_graph_values():
    assert partition_function(two_factor_graph([1, 1], [1, 1])) == 2.0
    assert partition_function(two_factor_graph([1, 0], [0, 1])) == 0.0
    assert partition_function(two_factor_graph(np.ones(4), np.ones(4))) == 4.0


def test_two_factor_graph_inner_product(rng):
    q, r = rng.random(8), rng.random(8)
    g = two_factor_graph(q, r)
    assert g.factors == ("Q", "R") and g.num_edges == 3
    assert partition_function(g) == pytest.approx(float(q @ r), rel=1e-13)


def test_document_round_trip_minimal():
    g = single_edge()
    text = serialize(g)
    assert parse(text) == g
    assert serialize(parse(text)) == text


def test_document_fields_and_bit_order():
    g = FactorGraph.build(["a", "b"], [("e1", ("a", "b")), ("e2", ("b", "a"))], {"a": [1, 2, 3, 4], "b": [5, 6, 7, 8]})
    doc = json.loads(serialize(g))
    assert list(doc) == ["factors", "edges", "tables"]
    assert doc["edges"][1] == {"id": "e2", "ends": ["b", "a"]}
    assert doc["tables"]["a"] == [1.0, 2.0, 3.0, 4.0]


def test_round_trip_random(rng):
    for _ in range(25):
        g = random_graph(rng, int(rng.integers(2, 6)), int(rng.integers(1, 8)))
        assert parse(serialize(g)) == g
        assert from_document(to_document(g)) == g


def test_round_trip_permanent_graph(rng):
    g = permanent_nfg(rng.random((3, 3)))
    assert parse(serialize(g)) == g


def test_parse_negative_entry():
    doc = to_document(single_edge())
    doc["tables"]["a"][1] = -0.5
    with pytest.raises(ParseError) as err:
        from_document(doc)
    assert err.value.field == "tables.a[1]"


def test_parse_reports_line():
    with pytest.raises(ParseError) as err:
        parse('{\n "factors": [\n')
    assert err.value.line is not None


def test_parse_missing_field_and_bad_ends():
    with pytest.raises(ParseError):
        from_document({"factors": [], "edges": []})
    with pytest.raises(ParseError):
        from_document({"factors": ["a"], "edges": [{"id": "e", "ends": ["a"]}], "tables": {}})


def test_parse_structural_violation():
    doc = to_document(single_edge())
    doc["tables"]["a"] = [1, 1, 1]
    with pytest.raises(ParseError):
        from_document(doc)


def test_graph_is_immutable():
    g = single_edge()
    with pytest.raises((AttributeError, TypeError)):
        g.factors = ("x",)
    with pytest.raises(ValueError):
        g.tables["a"][0] = 5.0
