import itertools

import numpy as np
import pytest

from bethepoly.errors import DimensionMismatch, LabelClash, MissingLabel
from bethepoly.poly import (
    MultiAffinePolynomial,
    evaluate,
    from_local_table,
    phi_chain,
    phi_step,
    product,
)


def poly(labels, coeffs):
    return MultiAffinePolynomial(tuple(labels), np.asarray(coeffs, dtype=float))


def test_from_local_table_transcription():
    h = from_local_table([1, 2], ["x"])
    assert h.coefficients.tolist() == [1.0, 2.0]
    h = from_local_table([1, 1, 1, 1], ["x", "y"])
    assert h.coefficient(["x", "y"]) == 1.0 and h.coefficient([]) == 1.0


def test_from_local_table_permanent_row():
    A = np.array([[4.0, 9.0], [1.0, 1.0]])
    from bethepoly.permanent import permanent_nfg

    g = permanent_nfg(A)
    h = from_local_table(g.tables["r0"], ["x0", "x1"])
    assert h.coefficients.tolist() == [0.0, 2.0, 3.0, 0.0]
    assert h.is_affine()


def test_size_mismatch():
    with pytest.raises(DimensionMismatch):
        from_local_table([1, 2, 3], ["x", "y"])


def test_evaluate_examples():
    assert evaluate(from_local_table([1, 2], ["x"]), [1.0]) == 3.0
    assert evaluate(from_local_table([1, 1, 1, 1], ["x", "y"]), [1.0, 1.0]) == 4.0
    assert evaluate(from_local_table([1, 2, 3, 4], ["x", "y"]), [2.0, 3.0]) == 38.0


def test_evaluate_matches_monomial_sum(rng):
    for n in range(0, 6):
        c = rng.normal(size=2**n)
        h = poly([f"v{i}" for i in range(n)], c)
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        expect = sum(c[s] * np.prod([x[j] for j in range(n) if (s >> j) & 1]) for s in range(2**n))
        assert evaluate(h, x) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_evaluate_batch(rng):
    h = poly(["a", "b", "c"], rng.random(8))
    X = rng.random((5, 3))
    np.testing.assert_allclose(evaluate(h, X), [evaluate(h, x) for x in X], rtol=1e-14)


def test_product_examples():
    h = product(poly(["x"], [1, 1]), poly(["y"], [1, 1]))
    assert h.variables == ("x", "y")
    assert h.coefficients.tolist() == [1.0, 1.0, 1.0, 1.0]
    assert len(h.factors) == 2
    with pytest.raises(LabelClash):
        product(poly(["x"], [1, 1]), poly(["x", "y"], [1, 1, 1, 1]))


def test_product_of_identity_rows():
    r0 = poly(["z00", "z01"], [0, 1, 0, 0])
    r1 = poly(["z10", "z11"], [0, 0, 1, 0])
    q = product(r0, r1)
    support = set(np.flatnonzero(q.coefficients).tolist())
    # only z00*z11 survives
    assert support == {0b1001}


def test_product_evaluates_as_product(rng):
    for _ in range(20):
        a, b = rng.integers(0, 4, size=2)
        h1 = poly([f"a{i}" for i in range(a)], rng.normal(size=2**a))
        h2 = poly([f"b{i}" for i in range(b)], rng.normal(size=2**b))
        x = rng.normal(size=a + b)
        assert evaluate(product(h1, h2), x) == pytest.approx(evaluate(h1, x[:a]) * evaluate(h2, x[a:]), rel=1e-12, abs=1e-12)


def test_phi_step_examples():
    assert phi_step(poly(["z", "y"], [1, 1, 1, 1]), "z", "y").coefficients.tolist() == [2.0]
    assert phi_step(poly(["z", "y"], [0, 1, 1, 0]), "z", "y").coefficients.tolist() == [0.0]
    assert phi_step(poly(["z", "y"], [0, 0, 0, 1]), "z", "y").coefficients.tolist() == [1.0]
    with pytest.raises(MissingLabel):
        phi_step(poly(["z", "y"], [1, 1, 1, 1]), "z", "w")


def test_phi_step_against_symbolic_differentiation(rng):
    # (1 + d_z d_y) h at z=y=0 equals h(0,0) + d^2 h/dz dy, computed by finite evaluation
    for _ in range(20):
        h = poly(["a", "z", "b", "y"], rng.normal(size=16))
        out = phi_step(h, "z", "y")
        for a, b in itertools.product((0.3, -1.2), (2.0, 0.7)):
            h00 = evaluate(h, [a, 0, b, 0])
            mixed = evaluate(h, [a, 1, b, 1]) - evaluate(h, [a, 1, b, 0]) - evaluate(h, [a, 0, b, 1]) + h00
            assert evaluate(out, [a, b]) == pytest.approx(h00 + mixed, abs=1e-12)


def test_phi_chain_examples():
    assert phi_chain([1, 1], [1, 1], 1).coefficients.tolist() == [2.0]
    assert phi_chain([1, 0], [0, 1], 1).coefficients.tolist() == [0.0]
    with pytest.raises(DimensionMismatch):
        phi_chain([1, 1], [1, 1, 1, 1], 1)


def test_phi_chain_full_contraction_is_inner_product(rng):
    for m in range(1, 7):
        q, r = rng.random(2**m), rng.random(2**m)
        val = phi_chain(q, r, m).coefficients[0]
        assert val == pytest.approx(sum(q[s] * r[s] for s in range(2**m)), rel=1e-12)


def test_phi_chain_partial_labels():
    f = phi_chain(np.ones(8), np.ones(8), 1)
    assert f.variables == ("z2", "z3", "y2", "y3")


def test_substitute_flip_derivative():
    h = poly(["x", "y"], [1, 2, 3, 4])
    assert evaluate(h.substitute({"y": 3.0}), [2.0]) == 38.0
    assert evaluate(h.flip(["x"]), [2.0, 3.0]) == evaluate(h, [-2.0, 3.0])
    assert h.derivative("x").coefficients.tolist() == [2.0, 4.0]


def test_tensor_round_trip(rng):
    h = poly(["a", "b", "c"], rng.random(8))
    t = h.tensor()
    assert t[1, 0, 0] == h.coefficient(["a"]) and t[0, 0, 1] == h.coefficient(["c"])
    assert MultiAffinePolynomial.from_tensor(h.variables, t).coefficients.tolist() == h.coefficients.tolist()


def test_labels_must_be_distinct():
    with pytest.raises(LabelClash):
        poly(["x", "x"], [1, 1, 1, 1])
