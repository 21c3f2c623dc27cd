import numpy as np
import pytest
from scipy.optimize import minimize

from bethepoly.emax import EMaxSolver, binary_entropy, emax, kl_divergence
from bethepoly.errors import AllZeroTable
from bethepoly.graph import EQUALITY_TABLE


def primal_oracle(table, beta, start):
    """max -KL(alpha, f) s.t. E_alpha[sigma] = beta, solved directly over alpha by SLSQP."""
    t = np.asarray(table, float)
    k = t.size.bit_length() - 1
    sup = np.flatnonzero(t > 0)
    S = ((sup[:, None] >> np.arange(k)) & 1).astype(float)
    f = t[sup]

    def obj(a):
        a = np.maximum(a, 1e-300)
        return float(np.sum(a * np.log(a / f)))

    res = minimize(
        obj,
        start,
        jac=lambda a: np.log(np.maximum(a, 1e-300) / f) + 1,
        bounds=[(0, 1)] * sup.size,
        constraints=[
            {"type": "eq", "fun": lambda a: a.sum() - 1},
            {"type": "eq", "fun": lambda a: S.T @ a - beta},
        ],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 2000},
    )
    return -res.fun


def test_examples():
    assert emax([1, 1], [0.5]).value == pytest.approx(np.log(2), abs=1e-12)
    assert emax([1, 1], [0.5]).x == pytest.approx([1.0])
    assert emax([1, 1], [0.0]).value == pytest.approx(0.0, abs=1e-15)
    r = emax(list(EQUALITY_TABLE), [1.0, 0.0])
    assert r.value == -np.inf and not r.feasible and r.witness is not None


def test_univariate_closed_form(rng):
    for _ in range(50):
        f = rng.uniform(0.1, 3, 2)
        b = rng.uniform(0.01, 0.99)
        expect = (1 - b) * np.log(f[0] / (1 - b)) + b * np.log(f[1] / b)
        assert emax(f, [b]).value == pytest.approx(expect, abs=1e-10)


def test_matches_direct_primal(rng):
    for _ in range(25):
        k = int(rng.integers(2, 4))
        t = rng.uniform(0.1, 2, 2**k) * (rng.random(2**k) < 0.8)
        t[0] = max(t[0], 0.5)
        t[-1] = max(t[-1], 0.5)
        sup = np.flatnonzero(t > 0)
        S = ((sup[:, None] >> np.arange(k)) & 1).astype(float)
        w = rng.dirichlet(np.ones(sup.size))
        beta = w @ S
        assert emax(t, beta).value == pytest.approx(primal_oracle(t, beta, w), abs=1e-6)


def test_duality_and_recovered_alpha(rng):
    for _ in range(100):
        k = int(rng.integers(1, 5))
        t = rng.uniform(0.05, 3, 2**k) * (rng.random(2**k) < 0.7)
        if not t.any():
            t[-1] = 1.0
        sup = np.flatnonzero(t > 0)
        S = ((sup[:, None] >> np.arange(k)) & 1).astype(float)
        beta = rng.dirichlet(np.ones(sup.size)) @ S
        r = emax(t, beta)
        assert r.feasible
        a = r.alpha
        assert a.sum() == pytest.approx(1.0, abs=1e-9)
        mean = ((np.arange(2**k)[:, None] >> np.arange(k)) & 1).T @ a
        np.testing.assert_allclose(mean, beta, atol=1e-7)
        assert r.value == pytest.approx(-kl_divergence(a, t), abs=1e-7)


def test_infeasible_beta_outside_box():
    r = emax([1, 1, 1, 1], [1.2, 0.5])
    assert r.value == -np.inf


def test_all_zero_table():
    with pytest.raises(AllZeroTable):
        EMaxSolver(np.zeros(4))


def test_batch_matches_single(rng):
    t = rng.uniform(0.1, 2, 8)
    solver = EMaxSolver(t)
    B = rng.uniform(0.05, 0.95, (20, 3))
    single = np.array([solver.solve(b).value for b in B])
    np.testing.assert_allclose(solver.solve_many(B), single, atol=1e-9)


def test_integral_coordinates_conditioned():
    # beta_2 = 1 pins the second coordinate; the rest is a univariate problem on g(., 1)
    t = np.array([1.0, 2.0, 3.0, 5.0])
    r = emax(t, [0.25, 1.0])
    expect = 0.75 * np.log(3 / 0.75) + 0.25 * np.log(5 / 0.25)
    assert r.value == pytest.approx(expect, abs=1e-10)
    assert r.u[1] == np.inf


def test_entropy_helpers():
    assert binary_entropy(0.5) == pytest.approx(np.log(2))
    assert binary_entropy(0.0) == 0.0
    assert kl_divergence([1, 0], [1, 1]) == 0.0
    assert kl_divergence([0.5, 0.5], [0, 1]) == np.inf
