import numpy as np
import pytest

from bethepoly.errors import BudgetExceeded, ZeroPartition
from bethepoly.exact import (
    config_probability,
    configuration_weights,
    entropy_program_oracle,
    exact_marginals,
    partition_function,
    partition_function_pruned,
    side_distribution,
)
from bethepoly.fixtures import random_bipartite_affine, random_graph, single_edge, uniform_single_edge
from bethepoly.graph import Bipartition, FactorGraph, bipartition, two_factor_graph
from bethepoly.permanent import permanent_nfg

from conftest import naive_z


def test_partition_function_hand_values():
    assert partition_function(single_edge()) == 7.0
    assert partition_function(permanent_nfg(np.eye(2))) == 1.0
    assert partition_function(two_factor_graph(np.ones(4), np.ones(4))) == 4.0


def test_partition_function_matches_naive_loop(rng):
    for _ in range(15):
        g = random_graph(rng, int(rng.integers(2, 6)), int(rng.integers(1, 9)))
        assert partition_function(g) == pytest.approx(naive_z(g), rel=1e-12)


def test_budget():
    g = two_factor_graph(np.ones(2**5), np.ones(2**5))
    with pytest.raises(BudgetExceeded):
        partition_function(g, budget_bits=4)
    assert partition_function(g, budget_bits=5) == 32.0


def test_config_probability():
    assert config_probability(uniform_single_edge(), 0) == 0.5
    assert config_probability(single_edge(), 1) == pytest.approx(6 / 7, rel=1e-15)
    g = single_edge((1, 0), (1, 1))
    assert config_probability(g, 1) == 0.0


def test_probabilities_sum_to_one(rng):
    for _ in range(10):
        g = random_graph(rng, 3, int(rng.integers(1, 7)))
        total = sum(config_probability(g, s) for s in range(2**g.num_edges))
        assert total == pytest.approx(1.0, abs=1e-10)


def test_zero_partition():
    g = two_factor_graph([1, 0], [0, 1])
    with pytest.raises(ZeroPartition):
        config_probability(g, 0)
    with pytest.raises(ZeroPartition):
        exact_marginals(g)
    with pytest.raises(ZeroPartition):
        entropy_program_oracle(g)


def test_marginals():
    assert exact_marginals(uniform_single_edge()) == pytest.approx([0.5])
    assert exact_marginals(single_edge()) == pytest.approx([6 / 7])
    beta = exact_marginals(permanent_nfg(np.eye(2)))
    assert beta.tolist() == [1.0, 0.0, 0.0, 1.0]


def test_marginals_in_unit_box(rng):
    for _ in range(10):
        beta = exact_marginals(random_graph(rng, 4, 6))
        assert np.all((beta >= 0) & (beta <= 1))


def test_side_distribution_single_edge():
    g = single_edge()
    d = side_distribution(g, Bipartition(frozenset("a"), frozenset("b")), "L")
    assert d.weights.tolist() == [1.0, 2.0]
    assert not d.normalized


def test_side_distribution_permanent_rows():
    g = permanent_nfg(np.array([[1.0, 4.0], [9.0, 16.0]]))
    part = bipartition(g)
    w = side_distribution(g, part, "L").weights
    # edge order e0_0, e0_1, e1_0, e1_1; row-valid iff one edge per row
    for s in range(16):
        bits = [(s >> i) & 1 for i in range(4)]
        if bits[0] + bits[1] == 1 and bits[2] + bits[3] == 1:
            expect = (1.0 if bits[0] else 2.0) * (3.0 if bits[2] else 4.0)
        else:
            expect = 0.0
        assert w[s] == pytest.approx(expect, rel=1e-15)


def test_side_distribution_normalize_zero():
    g = FactorGraph.build(["a", "b"], [("e", ("a", "b"))], {"a": [1, 0], "b": [1, 1]})
    part = Bipartition(frozenset("a"), frozenset("b"))
    d = side_distribution(g, part, "R", normalize=True)
    assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_side_product_identity(rng):
    for _ in range(10):
        g = random_bipartite_affine(rng, 2, 3, 5)
        part = bipartition(g)
        left = side_distribution(g, part, "L").weights
        right = side_distribution(g, part, "R").weights
        assert float(left @ right) == pytest.approx(partition_function(g), rel=1e-10)


def test_entropy_program_oracle():
    assert entropy_program_oracle(uniform_single_edge()) == pytest.approx(np.log(2), abs=1e-15)
    assert entropy_program_oracle(single_edge()) == pytest.approx(np.log(7), abs=1e-14)


def test_configuration_weights_shape(rng):
    g = random_graph(rng, 3, 4)
    w = configuration_weights(g)
    assert w.shape == (16,) and w.sum() == pytest.approx(partition_function(g))


def test_pruned_partition_function(rng):
    for n in (2, 3, 4):
        g = permanent_nfg(rng.random((n, n)))
        assert partition_function_pruned(g) == pytest.approx(partition_function(g), rel=1e-12)
    g = random_graph(rng, 4, 6)
    assert partition_function_pruned(g) == pytest.approx(partition_function(g), rel=1e-12)
