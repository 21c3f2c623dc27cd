"""Per-factor entropy maximization and its dual.

For a nonnegative table ``f`` on ``{0,1}^k`` and a mean vector ``beta``,

    EMax(f, beta) = max { -KL(alpha, f) : alpha on supp f, E_alpha[s] = beta }
                  = inf_{u in R^k} log sum_s f(s) exp(<s, u>) - <beta, u>,

with ``-inf`` when ``beta`` is outside the convex hull of ``supp f``. The
dual is convex in ``u = log x`` and is minimized by damped Newton. The
primal optimum is recovered as ``alpha(s) ~ f(s) exp(<s, u*>)``.

Coordinates of ``beta`` within ``INTEGRAL_TOL`` of 0 or 1 are fixed by
conditioning the table before the dual solve; their dual variables are
reported as ``-inf`` / ``+inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroTable
from .hull import LocalHull

__all__ = ["EMaxResult", "EMaxSolver", "emax", "kl_divergence", "binary_entropy"]

INTEGRAL_TOL = 1e-12
FEASIBILITY_TOL = 1e-9


def binary_entropy(b) -> np.ndarray | float:
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(b > 0, b * np.log(b), 0.0) - np.where(b < 1, (1 - b) * np.log1p(-b), 0.0)
    return float(h) if h.ndim == 0 else h


def kl_divergence(p, q) -> float:
    """``sum_i p_i log(p_i/q_i)`` with ``0 log 0 = 0``; ``inf`` if ``p_i > 0 = q_i``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


@dataclass(frozen=True)
class EMaxResult:
    value: float
    u: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    kkt_residual: float
    iterations: int
    witness: dict | None = None

    @property
    def feasible(self) -> bool:
        return self.value > -np.inf

    @property
    def x(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.u)


@dataclass
class _Pattern:
    full_index: np.ndarray  # full table index of each sub-configuration
    free: np.ndarray  # free coordinate positions
    hull: LocalHull
    logf: np.ndarray  # log weights on support
    S: np.ndarray  # support points, free coordinates only
    support: np.ndarray  # full table index of support points
    bary: np.ndarray | None = None  # pinv of [S^T; 1] when the support is affinely independent


def _dual_value(logf, S, b, u):
    z = logf + S @ u
    zmax = z.max()
    return zmax + np.log(np.exp(z - zmax).sum()) - b @ u


def _newton(logf, S, b, u0, tol, max_iter):
    u = np.zeros(S.shape[1]) if u0 is None else np.array(u0, dtype=float)
    n = S.shape[1]
    it = 0
    g = None
    val = None
    for it in range(1, max_iter + 1):
        z = logf + S @ u
        zmax = z.max()
        w = np.exp(z - zmax)
        tot = w.sum()
        a = w / tot
        val = zmax + np.log(tot) - b @ u
        mean = a @ S
        g = mean - b
        gn = np.abs(g).max()
        if gn <= tol:
            break
        H = (S.T * a) @ S - np.outer(mean, mean)
        lam = 1e-12 * (1.0 + np.trace(H))
        d = None
        for _ in range(8):
            try:
                d = np.linalg.solve(H + lam * np.eye(n), -g)
                break
            except np.linalg.LinAlgError:
                lam *= 100.0
        if d is None or not np.all(np.isfinite(d)):
            d = -g
        big = np.abs(d).max()
        if big > 20.0:
            d *= 20.0 / big
        slope = g @ d
        t = 1.0
        accepted = False
        while t > 1e-14:
            un = u + t * d
            vn = _dual_value(logf, S, b, un)
            if vn <= val + 1e-4 * t * slope:
                accepted = True
                break
            if vn <= val + 1e-13 * max(1.0, abs(val)):
                zn = logf + S @ un
                an = np.exp(zn - zn.max())
                an /= an.sum()
                if np.abs(an @ S - b).max() < gn:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        u = un
    else:
        z = logf + S @ u
        a = np.exp(z - z.max())
        a /= a.sum()
        g = a @ S - b
        val = _dual_value(logf, S, b, u)
    return u, float(val), float(np.abs(g).max()), it


class EMaxSolver:
    """Caches conditioning data of one table across many ``beta`` queries."""

    def __init__(self, table, tol: float = 1e-9, max_iter: int = 10000, feasibility_tol: float = FEASIBILITY_TOL):
        t = np.asarray(table, dtype=float).reshape(-1)
        if not np.any(t > 0):
            raise AllZeroTable("table has no positive entry")
        self.table = t
        self.k = t.size.bit_length() - 1
        self.tol = tol
        self.max_iter = max_iter
        self.feasibility_tol = feasibility_tol
        self._patterns: dict[tuple, _Pattern] = {}
        self._bits = (np.arange(t.size)[:, None] >> np.arange(self.k)[None, :]) & 1

    def _pattern(self, key: tuple) -> _Pattern:
        pat = self._patterns.get(key)
        if pat is not None:
            return pat
        fixed = np.array(key)
        free = np.flatnonzero(fixed < 0)
        ok = np.ones(self.table.size, dtype=bool)
        for j in np.flatnonzero(fixed >= 0):
            ok &= self._bits[:, j] == fixed[j]
        full_index = np.flatnonzero(ok)  # ascending == ordering of the free bits
        sub = self.table[full_index]
        hull = LocalHull.from_table(sub) if np.any(sub > 0) else LocalHull(np.zeros((0, free.size)), "empty")
        support = full_index[sub > 0]
        S = self._bits[support][:, free].astype(float)
        with np.errstate(divide="ignore"):
            logf = np.log(self.table[support])
        pat = _Pattern(full_index, free, hull, logf, S, support)
        if S.shape[0] >= 2:
            M = np.vstack([S.T, np.ones(S.shape[0])])
            if np.linalg.matrix_rank(M) == S.shape[0]:
                pat.bary = np.linalg.pinv(M)
        self._patterns[key] = pat
        return pat

    @staticmethod
    def _key(beta: np.ndarray) -> tuple:
        key = np.full(beta.size, -1)
        key[beta <= INTEGRAL_TOL] = 0
        key[beta >= 1 - INTEGRAL_TOL] = 1
        return tuple(int(v) for v in key)

    def _infeasible(self, beta, reason, **extra) -> EMaxResult:
        return EMaxResult(
            -np.inf,
            np.full(self.k, np.nan),
            np.zeros(self.table.size),
            beta,
            np.inf,
            0,
            {"reason": reason, "beta": beta.tolist(), **extra},
        )

    def solve(self, beta, u0=None, _depth: int = 0) -> EMaxResult:
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.size != self.k:
            raise ValueError(f"beta has length {beta.size}, table has {self.k} coordinates")
        if np.any(beta < -INTEGRAL_TOL) or np.any(beta > 1 + INTEGRAL_TOL):
            return self._infeasible(beta, "beta outside [0,1]")
        key = self._key(beta)
        pat = self._pattern(key)
        if pat.hull.kind == "empty":
            return self._infeasible(beta, "conditioned table is zero")
        fixed = np.array(key)
        b = beta[pat.free]
        if pat.free.size and not pat.hull.contains(b, tol=1e-15):
            proj = pat.hull.project(b)
            d2 = float(np.sum((proj - b) ** 2))
            if d2 > self.feasibility_tol:
                return self._infeasible(beta, "beta outside the support hull", distance2=d2)
            snapped = beta.copy()
            snapped[pat.free] = proj
            if _depth == 0 and self._key(snapped) != key:
                return self.solve(snapped, u0=None, _depth=1)
            b = proj
        beta_used = beta.copy()
        beta_used[fixed == 0] = 0.0
        beta_used[fixed == 1] = 1.0
        beta_used[pat.free] = b
        u_full = np.where(fixed == 1, np.inf, -np.inf).astype(float)
        alpha = np.zeros(self.table.size)
        nf = pat.free.size
        if nf == 0:
            alpha[pat.support[0]] = 1.0
            return EMaxResult(float(pat.logf[0]), u_full, alpha, beta_used, 0.0, 0)
        if nf == 1 and pat.S.shape[0] == 2:
            # closed form on a two-point support {0, 1}
            l0, l1 = (pat.logf[0], pat.logf[1]) if pat.S[0, 0] == 0 else (pat.logf[1], pat.logf[0])
            bb = float(b[0])
            val = (1 - bb) * (l0 - np.log1p(-bb)) + bb * (l1 - np.log(bb))
            uu = np.log(bb) - np.log1p(-bb) + l0 - l1
            u_full[pat.free] = uu
            w = pat.logf + pat.S[:, 0] * uu
            a = np.exp(w - w.max())
            alpha[pat.support] = a / a.sum()
            return EMaxResult(float(val), u_full, alpha, beta_used, 0.0, 0)
        if pat.bary is not None:
            # affinely independent support: alpha is the barycentric coordinate vector of b
            a = pat.bary @ np.append(b, 1.0)
            if np.all(a > 0):
                a /= a.sum()
                val = float(np.sum(a * (pat.logf - np.log(a))))
                lhs = np.hstack([pat.S, np.ones((pat.S.shape[0], 1))])
                u = np.linalg.lstsq(lhs, np.log(a) - pat.logf, rcond=None)[0][:-1]
                u_full[pat.free] = u
                alpha[pat.support] = a
                return EMaxResult(val, u_full, alpha, beta_used, float(np.abs(a @ pat.S - b).max()), 0)
        if u0 is not None:
            u0 = np.asarray(u0, dtype=float)[pat.free]
            if not np.all(np.isfinite(u0)):
                u0 = None
        u, val, res, it = _newton(pat.logf, pat.S, b, u0, self.tol, self.max_iter)
        u_full[pat.free] = u
        z = pat.logf + pat.S @ u
        a = np.exp(z - z.max())
        alpha[pat.support] = a / a.sum()
        return EMaxResult(val, u_full, alpha, beta_used, res, it)

    def solve_many(self, betas) -> np.ndarray:
        """EMax values for a batch of ``beta`` rows, Newton vectorized per conditioning pattern."""
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        out = np.full(betas.shape[0], -np.inf)
        codes = np.full(betas.shape, -1)
        codes[betas <= INTEGRAL_TOL] = 0
        codes[betas >= 1 - INTEGRAL_TOL] = 1
        uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for c, code in enumerate(uniq):
            key = tuple(int(v) for v in code)
            pat = self._pattern(key)
            rows = np.flatnonzero(inverse == c)
            if pat.hull.kind == "empty":
                continue
            if pat.free.size == 0:
                out[rows] = pat.logf[0]
                continue
            B = betas[rows][:, pat.free]
            if pat.hull.kind != "box":
                ok = np.array([pat.hull.contains(b, tol=1e-15) for b in B])
                for i in np.flatnonzero(~ok):
                    out[rows[i]] = self.solve(betas[rows[i]]).value
                rows, B = rows[ok], B[ok]
                if rows.size == 0:
                    continue
            out[rows] = _newton_batch(pat.logf, pat.S, B, self.tol, self.max_iter)
        return out


def _batch_values(logf, S, B, U):
    Z = logf[None, :] + U @ S.T
    zmax = Z.max(axis=1, keepdims=True)
    W = np.exp(Z - zmax)
    tot = W.sum(axis=1, keepdims=True)
    return (zmax + np.log(tot))[:, 0] - np.einsum("bi,bi->b", B, U), W / tot


def _product_start(logf, S, B):
    """Dual point that is exact when ``logf`` is affine in the bits (a product table)."""
    finite = np.isfinite(logf)
    if not np.all(finite):
        return np.zeros(B.shape)
    lhs = np.hstack([S, np.ones((S.shape[0], 1))])
    w = np.linalg.lstsq(lhs, logf, rcond=None)[0][:-1]
    Bc = np.clip(B, 1e-12, 1 - 1e-12)
    return np.log(Bc) - np.log1p(-Bc) - w[None, :]


def _newton_batch(logf, S, B, tol, max_iter):
    nb, n = B.shape
    U = _product_start(logf, S, B)
    active = np.ones(nb, dtype=bool)
    vals = np.empty(nb)
    eye = np.eye(n)
    SS = (S[:, :, None] * S[:, None, :]).reshape(S.shape[0], n * n)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ua, Ba = U[idx], B[idx]
        v, A = _batch_values(logf, S, Ba, Ua)
        vals[idx] = v
        mean = A @ S
        G = mean - Ba
        gn = np.abs(G).max(axis=1)
        done = gn <= tol
        active[idx[done]] = False
        keep = ~done
        if not np.any(keep):
            break
        idx, Ua, Ba, A, mean, G, v, gn = idx[keep], Ua[keep], Ba[keep], A[keep], mean[keep], G[keep], v[keep], gn[keep]
        H = (A @ SS).reshape(-1, n, n) - mean[:, :, None] * mean[:, None, :]
        lam = 1e-12 * (1.0 + np.trace(H, axis1=1, axis2=2))
        D = -np.linalg.solve(H + lam[:, None, None] * eye[None], G[:, :, None])[:, :, 0]
        big = np.abs(D).max(axis=1)
        D *= np.minimum(1.0, 20.0 / np.maximum(big, 1e-300))[:, None]
        slope = np.einsum("bi,bi->b", G, D)
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        newU = Ua.copy()
        for _ in range(45):
            if not np.any(pending):
                break
            p = np.flatnonzero(pending)
            cand = Ua[p] + t[p, None] * D[p]
            vn, An = _batch_values(logf, S, Ba[p], cand)
            gnew = np.abs(An @ S - Ba[p]).max(axis=1)
            ok = (vn <= v[p] + 1e-4 * t[p] * slope[p]) | (
                (vn <= v[p] + 1e-13 * np.maximum(1.0, np.abs(v[p]))) & (gnew < gn[p])
            )
            newU[p[ok]] = cand[ok]
            pending[p[ok]] = False
            t[p[~ok]] *= 0.5
        stalled = pending
        U[idx] = newU
        active[idx[stalled]] = False
        vals[idx[stalled]] = v[stalled]
    # final values at the returned points
    v, _ = _batch_values(logf, S, B, U)
    return v


def emax(table, beta, tol: float = 1e-9, max_iter: int = 10000, u0=None) -> EMaxResult:
    """``EMax(table, beta)`` with dual certificate and primal recovery."""
    return EMaxSolver(table, tol=tol, max_iter=max_iter).solve(beta, u0=u0)
