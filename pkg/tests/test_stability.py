import numpy as np
import pytest

from bethepoly.graph import EQUALITY_TABLE
from bethepoly.poly import MultiAffinePolynomial, evaluate, from_local_table, product
from bethepoly.stability import (
    Stability,
    bivariate_is_stable,
    log_submodular_check,
    stability_check,
    table_stability,
    verify_witness,
)


def poly(labels, coeffs):
    return MultiAffinePolynomial(tuple(labels), np.asarray(coeffs, dtype=float))


def test_one_plus_x_plus_y_plus_xy_stable():
    v = stability_check(poly(["x", "y"], [1, 1, 1, 1]))
    assert v.status is Stability.STABLE


def test_one_plus_xy_not_stable():
    h = poly(["x", "y"], [1, 0, 0, 1])
    v = stability_check(h)
    assert v.status is Stability.NOT_STABLE
    assert v.witness is not None and verify_witness(h, v.witness)
    assert evaluate(h, [1j, 1j]) == 0
    assert verify_witness(h, [1j, 1j])


def test_linear_row_polynomial_stable():
    v = stability_check(poly(["x0", "x1", "x2"], [0, 1, 2, 0, 3, 0, 0, 0]))
    assert v.status is Stability.STABLE and v.rule == "affine-nonnegative"


def test_zero_polynomial_not_stable():
    assert stability_check(poly(["x"], [0, 0])).status is Stability.NOT_STABLE


def test_product_of_stable_factors():
    h = product(poly(["x"], [1, 2]), poly(["y", "z"], [1, 1, 1, 1]))
    v = stability_check(h)
    assert v.status is Stability.STABLE and v.rule == "product-of-stable"


def test_product_with_unstable_factor_gets_witness():
    h = product(poly(["x"], [1, 2]), poly(["y", "z"], [1, 0, 0, 1]))
    v = stability_check(h)
    assert v.status is Stability.NOT_STABLE
    assert verify_witness(h, v.witness)


def test_bivariate_rule_matches_brute_force_zero_search(rng):
    # independent oracle: h(x, y) = 0 with Im x > 0 has Im y > 0 for some x iff unstable;
    # solve y = -(a + b x)/(c + d x) on a grid of upper half-plane x and look at Im y
    grid = [complex(re, im) for re in np.linspace(-20, 20, 81) for im in np.geomspace(1e-3, 1e3, 61)]
    for _ in range(60):
        a, b, c, d = rng.integers(0, 4, size=4).astype(float) * rng.random(4)
        if a == b == c == d == 0:
            continue
        found = False
        for x in grid:
            den = c + d * x
            if abs(den) > 1e-12:
                y = -(a + b * x) / den
                if y.imag > 1e-9 and abs(a + b * x + c * y + d * x * y) < 1e-9 * (1 + abs(x * y)):
                    found = True
                    break
        if bivariate_is_stable(a, b, c, d):
            assert not found
        elif b * c < a * d * (1 - 1e-3):
            assert found


def test_flipped_second_block():
    # h(x, -y) for h = 1 + xy is 1 - xy, which is stable
    assert bivariate_is_stable(1, 0, 0, 1, flipped_second_block=True)
    assert not bivariate_is_stable(1, 0, 0, 1)


def test_log_submodular_examples():
    assert log_submodular_check([1, 1, 1, 1]) is None
    assert log_submodular_check(list(EQUALITY_TABLE)) == (1, 2)
    from bethepoly.permanent import permanent_nfg

    g = permanent_nfg(np.random.default_rng(1).random((3, 3)))
    for f in g.factors:
        assert log_submodular_check(g.tables[f]) is None


def test_log_submodular_rule_on_three_variables():
    # 1 + xyz: not affine, violated pair (x, yz)
    t = np.zeros(8)
    t[0] = t[7] = 1.0
    v = table_stability(t)
    assert v.status is Stability.NOT_STABLE and v.rule == "log-submodularity-violated"


def test_elementary_symmetric_stable_or_unknown_never_refuted():
    # e_2(x, y, z) is real stable; the checker must never claim otherwise
    t = np.zeros(8)
    t[[3, 5, 6]] = 1.0
    assert table_stability(t).status is not Stability.NOT_STABLE


def test_numeric_falsifier_finds_signed_zero():
    # 1 - xyz style polynomial with a negative coefficient skips the lattice test
    t = np.array([1, 0, 0, 0, 0, 0, 0, -1.0])
    h = from_local_table(t, ["x", "y", "z"])
    v = stability_check(h)
    assert v.status is Stability.NOT_STABLE
    assert verify_witness(h, v.witness)


def test_verdicts_never_contradict_bivariate_truth(rng):
    for _ in range(50):
        t = rng.random(4) * (rng.random(4) < 0.8)
        if not t.any():
            continue
        v = table_stability(t)
        assert v.stable == bivariate_is_stable(*t)


def test_witness_rejects_real_points():
    h = poly(["x", "y"], [1, 0, 0, 1])
    assert not verify_witness(h, [1.0 + 0j, -1.0 + 0j])


def test_as_dict_serializable():
    import json

    v = stability_check(poly(["x", "y"], [1, 0, 0, 1]))
    d = json.loads(json.dumps(v.as_dict()))
    assert d["status"] == "NotStable"
