"""Permanents: exact values, the permanent factor graph, and the Bethe permanent.

The factor graph of an ``n x n`` matrix ``A`` has a row factor ``r{i}`` and
a column factor ``c{j}`` for every index and an edge ``e{i}_{j}`` between
them. Row ``i`` accepts exactly one incident edge switched on, with weight
``sqrt(A[i, j])`` for edge ``j``; columns are symmetric. Each perfect
matching then contributes ``prod A[i, sigma(i)]`` and ``Z = per(A)``.

Over doubly stochastic ``B`` on the support of ``A``, the Bethe objective of
this graph reduces to

    phi(B) = sum B log(A / B) + sum (1 - B) log(1 - B),

maximized here by mirror ascent with Sinkhorn projections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import BudgetExceeded, NoSupportMatching
from .graph import FactorGraph
from .seeding import rng_for

__all__ = [
    "as_square_matrix",
    "permanent_exact",
    "permanent_ryser",
    "permanent_enumerate",
    "permanent_nfg",
    "DSConfig",
    "ds_objective",
    "sinkhorn",
    "bethe_permanent_ds",
    "PermanentReport",
    "verify_permanent_bounds",
]

RYSER_MAX_N = 12
ENUMERATION_MAX_N = 8
MAX_STEP = 1e4


def as_square_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or np.any(A < 0):
        raise ValueError("matrix entries must be finite and nonnegative")
    return A


def permanent_ryser(A) -> float:
    """Inclusion-exclusion over column subsets."""
    A = as_square_matrix(A)
    n = A.shape[0]
    if n > RYSER_MAX_N:
        raise BudgetExceeded(f"n = {n} above the Ryser limit {RYSER_MAX_N}")
    if n == 0:
        return 1.0
    masks = np.arange(1, 2**n)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    sizes = bits.sum(axis=1)
    rowsums = bits @ A.T  # (subsets, rows)
    terms = np.prod(rowsums, axis=1)
    signs = np.where((n - sizes) % 2 == 0, 1.0, -1.0)
    return float(np.sum(signs * terms))


def permanent_enumerate(A) -> float:
    A = as_square_matrix(A)
    n = A.shape[0]
    if n > ENUMERATION_MAX_N:
        raise BudgetExceeded(f"n = {n} above the enumeration limit {ENUMERATION_MAX_N}")
    rows = np.arange(n)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int).reshape(-1, n)
    return float(np.sum(np.prod(A[rows[None, :], perms], axis=1)))


def permanent_exact(A, cross_check: bool = True) -> float:
    """Ryser's value; for ``n <= 8`` also enumerated and required to agree within 1e-9."""
    val = permanent_ryser(A)
    n = np.asarray(A).shape[0]
    if cross_check and n <= ENUMERATION_MAX_N:
        ref = permanent_enumerate(A)
        if abs(val - ref) > 1e-9 * max(abs(ref), 1e-300) and not (val == ref == 0):
            raise ArithmeticError(f"Ryser {val!r} and enumeration {ref!r} disagree")
        return ref
    return val


def permanent_nfg(A) -> FactorGraph:
    A = as_square_matrix(A)
    n = A.shape[0]
    rows = [f"r{i}" for i in range(n)]
    cols = [f"c{j}" for j in range(n)]
    edges = [(f"e{i}_{j}", (rows[i], cols[j])) for i in range(n) for j in range(n)]
    units = [1 << j for j in range(n)]
    tables = {}
    root = np.sqrt(A)
    for i in range(n):
        t = np.zeros(2**n)
        t[units] = root[i]
        tables[rows[i]] = t
    for j in range(n):
        t = np.zeros(2**n)
        t[units] = root[:, j]
        tables[cols[j]] = t
    return FactorGraph.build(rows + cols, edges, tables)


def _require_matching(A: np.ndarray) -> None:
    n = A.shape[0]
    match = maximum_bipartite_matching(csr_matrix((A > 0).astype(np.int8)), perm_type="column")
    if np.count_nonzero(match >= 0) < n:
        raise NoSupportMatching("the support of A has no perfect matching; per(A) = 0")


def _log_support(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    pos = M > 0
    return np.where(pos, np.log(np.where(pos, M, 1.0)), -np.inf)


def _project_log(logK: np.ndarray, tol: float = 1e-10, sweeps: int = 50, newton_iter: int = 200) -> np.ndarray:
    """Doubly stochastic ``diag(e^u) K diag(e^v)`` from ``log K`` (``-inf`` off the support).

    Sinkhorn sweeps on the row-shifted kernel first. When they stall (nearly decomposable
    ``K``), Newton's method on the convex dual
    ``sum_ij K_ij e^(u_i + v_j) - sum u - sum v`` (with ``v_n = 0``)
    finishes the same scaling.
    """
    n = logK.shape[0]
    shift = logK.max(axis=1)
    K = np.exp(logK - shift[:, None])

    def scaled(u, v):
        return np.exp(logK + u[:, None] + v[None, :])

    def error(B):
        return max(np.abs(B.sum(axis=1) - 1).max(), np.abs(B.sum(axis=0) - 1).max())

    r, c = np.ones(n), np.ones(n)
    with np.errstate(divide="ignore"):
        for sweep in range(1, sweeps + 1):
            r = 1.0 / (K @ c)
            c = 1.0 / (K.T @ r)
            # columns are exact after the column update; only rows can be off
            if sweep % 5 == 0 and np.abs(r * (K @ c) - 1).max() <= tol:
                B = r[:, None] * K * c[None, :]
                if np.all(np.isfinite(B)):
                    return B
        u, v = np.log(r) - shift, np.log(c)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        u, v = -shift, np.zeros(n)
    B = scaled(u, v)
    u, v = u + v[-1], v - v[-1]

    def dual(u, v):
        return float(scaled(u, v).sum() - u.sum() - v.sum())

    for _ in range(newton_iter):
        r, c = B.sum(axis=1), B.sum(axis=0)
        if error(B) <= tol:
            break
        grad = np.concatenate([r - 1, (c - 1)[:-1]])
        H = np.block([[np.diag(r), B[:, :-1]], [B[:, :-1].T, np.diag(c[:-1])]])
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        du, dv = step[:n], np.append(step[n:], 0.0)
        f0 = dual(u, v)
        lam = 1.0
        while lam > 1e-12 and dual(u + lam * du, v + lam * dv) > f0 + 1e-4 * lam * float(grad @ step):
            lam *= 0.5
        u, v = u + lam * du, v + lam * dv
        B = scaled(u, v)
    return B


def sinkhorn(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Row/column scaling of a nonnegative matrix with total support to doubly stochastic."""
    return _project_log(_log_support(M), tol)


def ds_objective(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    pos = B > 0
    if np.any(A[pos] <= 0):
        return -np.inf
    first = float(np.sum(B[pos] * np.log(A[pos] / B[pos])))
    c = 1.0 - B
    cp = c > 0
    return first + float(np.sum(c[cp] * np.log(c[cp])))


@dataclass(frozen=True)
class DSConfig:
    starts: int = 8
    seed: int = 0
    max_iter: int = 5000
    tol: float = 1e-10
    step_tol: float = 1e-8


def _doubly_stochastic(B: np.ndarray, tol: float = 1e-8) -> bool:
    return bool(
        np.all(np.isfinite(B)) and np.abs(B.sum(axis=0) - 1).max() <= tol and np.abs(B.sum(axis=1) - 1).max() <= tol
    )


def _mirror_ascent(A: np.ndarray, B: np.ndarray, cfg: DSConfig):
    supp = A > 0
    logA = _log_support(A)
    val = ds_objective(A, B)
    history = [val]
    eta = 1.0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        live = B > 0
        logB = _log_support(B)
        with np.errstate(invalid="ignore"):
            grad = np.where(live, logA - logB - np.log(np.clip(1 - B, 1e-16, None)), 0.0)
        improved = False
        while eta >= 1e-10:
            with np.errstate(over="ignore", invalid="ignore"):
                cand = _project_log(np.where(live, logB + eta * grad, -np.inf))
                cand[cand < 1e-12] = 0.0
                if np.any((cand == 0) & live):
                    cand = _project_log(_log_support(cand))
            if _doubly_stochastic(cand):
                cval = ds_objective(A, cand)
                if cval >= val:
                    improved = True
                    break
            eta *= 0.5
        if not improved:
            break
        change = float(np.abs(cand - B).max())
        gain = cval - val
        B, val = cand, cval
        eta = min(eta * 2.0, MAX_STEP)
        if change <= cfg.step_tol and gain <= cfg.tol * max(1.0, abs(val)):
            break
        history.append(val)
        if len(history) > 10 and val - history[-11] <= 1e-14 * max(1.0, abs(val)):
            break
    return val, B, it


def _newton_polish(A: np.ndarray, B: np.ndarray, max_iter: int = 50):
    """Newton's method on the KKT system of ``max phi`` over ``B`` with the current support.

    ``phi`` has the diagonal Hessian ``-1 / (B (1 - B))`` on the live
    entries; row and column sums enter through multipliers. Steps keep
    every live entry inside ``(0, 1)`` and never decrease ``phi``.
    """
    n = A.shape[0]
    live = B > 0
    if not np.any(live & (B < 1)):
        return ds_objective(A, B), B
    idx = np.argwhere(live)
    k = len(idx)
    C = np.zeros((2 * n - 1, k))
    for p, (i, j) in enumerate(idx):
        C[i, p] = 1.0
        if j < n - 1:
            C[n + j, p] = 1.0
    a = A[live]
    x = B[live].copy()
    val = ds_objective(A, B)
    for _ in range(max_iter):
        if np.any(x >= 1):
            break
        g = np.log(a / x) - np.log1p(-x) - 2.0
        h = -1.0 / (x * (1 - x))
        K = np.block([[np.diag(h), C.T], [C, np.zeros((2 * n - 1, 2 * n - 1))]])
        rhs = np.concatenate([-g, np.ones(2 * n - 1) - C @ x])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        dx = sol[:k]
        # fraction-to-boundary rule keeps the iterate strictly inside (0, 1)
        with np.errstate(divide="ignore"):
            lim = np.where(dx < 0, -x / dx, np.where(dx > 0, (1 - x) / dx, np.inf))
        t = min(1.0, 0.99 * float(lim.min()))
        improved = False
        while t > 1e-12:
            cand = np.zeros_like(B)
            cand[live] = x + t * dx
            cval = ds_objective(A, cand)
            if cval >= val:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        step = float(np.abs(t * dx).max())
        x, val = cand[live], cval
        if step <= 1e-14:
            break
    out = np.zeros_like(B)
    out[live] = x
    return val, out


def bethe_permanent_ds(A, cfg: DSConfig | None = None):
    """``(Z_B, B*)``: the maximum of ``exp(phi)`` over doubly stochastic ``B`` on supp ``A``."""
    cfg = cfg or DSConfig()
    A = as_square_matrix(A)
    _require_matching(A)
    supp = A > 0
    candidates = [sinkhorn(A)]
    rows, cols = linear_sum_assignment(np.where(supp, np.log(np.where(supp, A, 1.0)), -1e300), maximize=True)
    vertex = np.zeros_like(A)
    vertex[rows, cols] = 1.0
    for s in range(max(cfg.starts - 1, 0)):
        noise = rng_for(cfg.seed, "ds-start", s).uniform(0.05, 1.0, size=A.shape)
        candidates.append(sinkhorn(np.where(supp, noise, 0.0)))
    best_val, best_B = ds_objective(A, vertex), vertex
    for B0 in candidates:
        val, B, _ = _mirror_ascent(A, B0, cfg)
        pval, pB = _newton_polish(A, B)
        if pval > val and _doubly_stochastic(pB, 1e-10):
            val, B = pval, pB
        if val > best_val or (val == best_val and best_B is not None and tuple(B.ravel()) < tuple(best_B.ravel())):
            best_val, best_B = val, B
    return float(np.exp(best_val)), best_B


@dataclass
class PermanentReport:
    matrix: list
    permanent: float
    z_graph: float
    z_bethe_ds: float
    z_bethe_graph: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return {
            "matrix": self.matrix,
            "per": self.permanent,
            "Z": self.z_graph,
            "Z_B_ds": self.z_bethe_ds,
            "Z_B_graph": self.z_bethe_graph,
            "checks": dict(self.checks),
            "passed": self.passed,
        }


def verify_permanent_bounds(A, bethe_cfg=None, ds_cfg: DSConfig | None = None) -> PermanentReport:
    """Graph partition function, Bethe bound and stability of the local polynomials for ``A``."""
    from .bethe import BetheConfig, bethe_solve
    from .exact import partition_function, partition_function_pruned
    from .stability import table_stability

    A = as_square_matrix(A)
    n = A.shape[0]
    per = permanent_exact(A)
    g = permanent_nfg(A)
    z = partition_function(g) if n * n <= 16 else partition_function_pruned(g)
    zb_ds, _ = bethe_permanent_ds(A, ds_cfg)
    res = bethe_solve(g, bethe_cfg or BetheConfig(starts=4))
    zb_g = res.value
    checks = {
        "Z == per": abs(z - per) <= 1e-8 * per,
        "Z_B_ds <= per": zb_ds <= per * (1 + 1e-6),
        "graph solver ~ ds formula": abs(zb_g - zb_ds) <= 1e-4 * zb_ds,
        "local polynomials stable": all(table_stability(g.tables[f]).stable for f in g.factors),
    }
    return PermanentReport(A.tolist(), per, z, zb_ds, zb_g, checks)
