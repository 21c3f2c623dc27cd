"""Iterated positive correlation by exhaustive sums, and the bounds built on it.

For weight vectors ``q, r`` over ``{0,1}^m`` (coordinate ``j`` = bit ``j-1``)
and an index ``k``, the unnormalized expectations are

    E_k(A, B) = sum q_X r_Y prod_{j > k} s_j^{X_j} t_j^{Y_j}

over pairs ``(X, Y)`` agreeing on coordinates ``1..k-1`` with ``X_k = A`` and
``Y_k = B``. The pair ``(q, r)`` has the IPC property when
``E(0,1) E(1,0) <= E(0,0) E(1,1)`` for every ``k`` and all positive ``s, t``.
The conditioning constant is omitted because both sides scale by its square.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .emax import EMaxSolver, binary_entropy
from .errors import DimensionMismatch, HypothesisViolated, ZeroConditioning
from .exact import side_distribution
from .graph import Bipartition, FactorGraph, bipartition, check_bipartition
from .poly import chain_labels, phi_chain
from .seeding import rng_for

__all__ = [
    "ek_bruteforce",
    "KOutcome",
    "IPCReport",
    "ipc_test",
    "ipc_from_graph",
    "permute_coordinates",
    "lemma5_crosscheck",
    "one_dim_bound_check",
    "chain_bound_check",
]

PASS_THRESHOLD = -1e-9
SAMPLE_LOW, SAMPLE_HIGH = 1e-3, 1e3


def _nbits(v: np.ndarray) -> int:
    m = v.size.bit_length() - 1
    if 2**m != v.size:
        raise DimensionMismatch(f"length {v.size} is not a power of two")
    return m


def _pair(q, r) -> tuple[np.ndarray, np.ndarray, int]:
    q = np.asarray(q, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    if q.size != r.size:
        raise DimensionMismatch(f"q has {q.size} entries, r has {r.size}")
    if np.any(q < 0) or np.any(r < 0):
        raise ValueError("weights must be nonnegative")
    return q, r, _nbits(q)


def _tail(v, m: int, k: int, name: str) -> np.ndarray:
    """Entries ``k+1..m`` of a length-``m`` vector, or a vector of length ``m-k`` as is."""
    v = np.asarray(v if v is not None else np.ones(m - k), dtype=float).reshape(-1)
    if v.size == m:
        v = v[k:]
    if v.size != m - k:
        raise DimensionMismatch(f"{name} must have length {m} or {m - k}")
    if np.any(v <= 0):
        raise ValueError(f"{name} must be positive")
    return v


def _conditioning(q: np.ndarray, r: np.ndarray, m: int, k: int) -> float:
    """Total weight of pairs agreeing on coordinates ``1..k-1``."""
    low = 2 ** (k - 1)
    return float(q.reshape(-1, low).sum(axis=0) @ r.reshape(-1, low).sum(axis=0))


def _e_tables(q, r, m, k, log_s, log_t):
    """``E[trial, A, B]`` for a batch of log-weights of shape ``(trials, m - k)``."""
    high = 2 ** (m - k)
    low = 2 ** (k - 1)
    bits = ((np.arange(high)[:, None] >> np.arange(m - k)[None, :]) & 1).astype(float)
    ws = np.exp(log_s @ bits.T)  # (trials, high)
    wt = np.exp(log_t @ bits.T)
    q3 = q.reshape(high, 2, low)
    r3 = r.reshape(high, 2, low)
    Qs = np.einsum("th,hal->tal", ws, q3)
    Rs = np.einsum("th,hbl->tbl", wt, r3)
    return np.einsum("tal,tbl->tab", Qs, Rs)


def ek_bruteforce(q, r, k: int, s=None, t=None) -> tuple[float, float, float, float]:
    """``(E(0,0), E(0,1), E(1,0), E(1,1))`` at index ``k`` (1-based)."""
    q, r, m = _pair(q, r)
    if not 1 <= k <= m:
        raise DimensionMismatch(f"k = {k} outside 1..{m}")
    s = _tail(s, m, k, "s")
    t = _tail(t, m, k, "t")
    if _conditioning(q, r, m, k) <= 0:
        raise ZeroConditioning(f"no agreeing pair on the first {k - 1} coordinates")
    E = _e_tables(q, r, m, k, np.log(s)[None, :], np.log(t)[None, :])[0]
    return float(E[0, 0]), float(E[0, 1]), float(E[1, 0]), float(E[1, 1])


def _margins(E: np.ndarray) -> np.ndarray:
    good = E[:, 0, 0] * E[:, 1, 1]
    bad = E[:, 0, 1] * E[:, 1, 0]
    scale = good + bad
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, (good - bad) / scale, 0.0)


@dataclass(frozen=True)
class KOutcome:
    k: int
    passed: int
    trials: int
    worst_margin: float


@dataclass
class IPCReport:
    m: int
    trials: int
    seed: int
    outcomes: list[KOutcome] = field(default_factory=list)
    witness: dict | None = None
    order: list[int] | None = None

    @property
    def passed(self) -> bool:
        return all(o.passed == o.trials for o in self.outcomes)

    @property
    def worst_margin(self) -> float:
        return min((o.worst_margin for o in self.outcomes), default=0.0)

    def as_dict(self) -> dict:
        out = {
            "m": self.m,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "per_k": [
                {"k": o.k, "passed": o.passed, "trials": o.trials, "worst_margin": o.worst_margin}
                for o in self.outcomes
            ],
            "normalization": "unnormalized sums; conditioning constant omitted",
        }
        if self.order is not None:
            out["order"] = self.order
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def trial_weights(seed: int, k: int, trials: int, width: int):
    """Log-uniform ``(s, t)`` draws on ``[1e-3, 1e3]`` for index ``k``; row ``i`` is trial ``i``."""
    rng = rng_for(seed, "ipc", k)
    lo, hi = np.log(SAMPLE_LOW), np.log(SAMPLE_HIGH)
    log_s = rng.uniform(lo, hi, size=(trials, width))
    log_t = rng.uniform(lo, hi, size=(trials, width))
    return log_s, log_t


def permute_coordinates(v, order) -> np.ndarray:
    """Weights with coordinate ``i`` of the result taken from coordinate ``order[i]`` of ``v``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    m = _nbits(v)
    idx = np.arange(v.size)
    src = np.zeros_like(idx)
    for i, o in enumerate(order):
        src |= ((idx >> i) & 1) << o
    return v[src]


def ipc_test(q, r, trials: int = 1000, seed: int = 0, tol: float = 1e-9, order=None, batch: int = 250) -> IPCReport:
    """Randomized refutation search for the IPC inequalities (a pass is evidence, not proof)."""
    q, r, m = _pair(q, r)
    if order is not None:
        order = [int(o) for o in order]
        if sorted(order) != list(range(m)):
            raise ValueError("order must be a permutation of 0..m-1")
        q, r = permute_coordinates(q, order), permute_coordinates(r, order)
    if float(q @ r) <= 0:
        raise ZeroConditioning("sum q_s r_s = 0: no agreeing pair at all")
    report = IPCReport(m, trials, seed, order=order)
    for k in range(1, m + 1):
        log_s, log_t = trial_weights(seed, k, trials, m - k)
        passed = 0
        worst = np.inf
        for start in range(0, trials, batch):
            sl = slice(start, min(start + batch, trials))
            E = _e_tables(q, r, m, k, log_s[sl], log_t[sl])
            marg = _margins(E)
            ok = marg >= -tol
            passed += int(np.count_nonzero(ok))
            i = int(np.argmin(marg)) if marg.size else 0
            if marg.size and marg[i] < worst:
                worst = float(marg[i])
            if report.witness is None and not np.all(ok):
                j = int(np.flatnonzero(~ok)[0])
                report.witness = {
                    "k": k,
                    "trial": start + j,
                    "s": np.exp(log_s[start + j]).tolist(),
                    "t": np.exp(log_t[start + j]).tolist(),
                    "E": [float(E[j, 0, 0]), float(E[j, 0, 1]), float(E[j, 1, 0]), float(E[j, 1, 1])],
                    "margin": float(marg[j]),
                }
        report.outcomes.append(KOutcome(k, passed, trials, worst if trials else 0.0))
    return report


def ipc_from_graph(
    g: FactorGraph, part: Bipartition | None = None, trials: int = 1000, seed: int = 0, tol: float = 1e-9
) -> IPCReport:
    """IPC test on the side distributions ``p^L, p^R`` of a bipartite graph (global edge order)."""
    part = part or bipartition(g)
    check_bipartition(g, part)
    left = side_distribution(g, part, "L", normalize=True, budget_bits=13).weights
    right = side_distribution(g, part, "R", normalize=True, budget_bits=13).weights
    return ipc_test(left, right, trials=trials, seed=seed, tol=tol)


def lemma5_crosscheck(q, r, k: int, a, b) -> float:
    """Deviation between ``f_{k-1}(z_k, a, y_k, b)`` and the ``E_k`` table after the best common scaling."""
    q, r, m = _pair(q, r)
    if not 1 <= k <= m:
        raise DimensionMismatch(f"k = {k} outside 1..{m}")
    a = _tail(a, m, k, "a")
    b = _tail(b, m, k, "b")
    f = phi_chain(q, r, k - 1)
    zl, yl = chain_labels(m)
    values = {zl[j]: float(a[j - k]) for j in range(k, m)}
    values.update({yl[j]: float(b[j - k]) for j in range(k, m)})
    h = f.substitute(values)
    if h.variables != (zl[k - 1], yl[k - 1]):
        raise DimensionMismatch(f"unexpected variables {h.variables}")
    c = h.coefficients  # [1, z, y, zy]
    hv = np.array([c[0], c[2], c[1], c[3]])  # ordered as (A,B) = 00, 01, 10, 11 with A <-> z
    ev = np.array(ek_bruteforce(q, r, k, a, b))
    scale = max(float(np.abs(hv).max()), float(np.abs(ev).max()))
    if scale == 0:
        return 0.0
    denom = float(ev @ ev)
    lam = float(hv @ ev) / denom if denom > 0 else 0.0
    return float(np.abs(hv - lam * ev).max() / scale)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def one_dim_bound_check(h00: float, h10: float, h01: float, h11: float, alpha: float, tol: float = 1e-9) -> BoundCheck:
    """``alpha^alpha (1-alpha)^(1-alpha) inf h(x,y)/(x y)^alpha <= h00 + h11`` for ``h10 h01 <= h00 h11``."""
    coeffs = np.array([h00, h10, h01, h11], dtype=float)
    if np.any(coeffs < 0):
        raise ValueError("coefficients must be nonnegative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if h10 * h01 > h00 * h11:
        raise HypothesisViolated(f"h10*h01 = {h10 * h01!r} exceeds h00*h11 = {h00 * h11!r}")
    res = EMaxSolver(coeffs).solve([alpha, alpha])
    lhs = float(np.exp(res.value - binary_entropy(alpha))) if res.feasible else 0.0
    rhs = float(h00 + h11)
    return BoundCheck(lhs, rhs, lhs <= rhs + tol * max(1.0, rhs))


@dataclass(frozen=True)
class ChainReport:
    inner_product: float
    lhs: dict[int, float]
    margins: dict[int, float]

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values())

    def holds(self, tol: float = 1e-8) -> bool:
        return self.worst_margin >= -tol


def chain_bound_check(q, r, beta) -> ChainReport:
    """Left sides of the chain inequality for ``k = m, ..., 0`` against ``sum q_s r_s``.

    ``lhs_k = prod_{j>k} beta_j^beta_j (1-beta_j)^(1-beta_j) * inf f_k / prod_{j>k} (z_j y_j)^beta_j``
    with ``f_k`` the ``k``-step contraction of ``q(z) r(y)``. Margins are
    ``(sum q r - lhs_k) / sum q r``.
    """
    q, r, m = _pair(q, r)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != m:
        raise DimensionMismatch(f"beta must have length {m}")
    total = float(q @ r)
    if total <= 0:
        raise ZeroConditioning("sum q_s r_s = 0")
    lhs, margins = {}, {}
    for k in range(m, -1, -1):
        f = phi_chain(q, r, k)
        tail = beta[k:]
        if not np.any(f.coefficients > 0):
            val = 0.0
        else:
            res = EMaxSolver(f.coefficients).solve(np.concatenate([tail, tail]))
            val = float(np.exp(res.value - np.sum(binary_entropy(tail)))) if res.feasible else 0.0
        lhs[k] = val
        margins[k] = (total - val) / total
    return ChainReport(total, lhs, margins)
