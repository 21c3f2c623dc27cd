"""Projections onto convex hulls of 0/1 points and their intersections.

The edge-marginal vectors with finite Bethe objective form the polytope
``P = {beta : beta_a in conv(supp g_a) for every factor a}``. This module
provides the Euclidean projection onto each per-factor hull (closed form
for cubes and simplices, Wolfe's minimum-norm-point algorithm otherwise)
and onto ``P`` itself (Dykstra's alternating projections).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "min_norm_point",
    "project_simplex",
    "LocalHull",
    "FeasiblePolytope",
]


def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Projection onto ``{x >= 0, sum x = total}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 1000):
    """Wolfe's algorithm: the point of ``conv(points)`` closest to the origin.

    Returns ``(x, weights)`` with ``x = weights @ points`` and ``weights``
    on the simplex.
    """
    P = np.asarray(points, dtype=float)
    N = P.shape[0]
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(sq.max()))
    first = int(np.argmin(sq))
    S = [first]
    lam = np.array([1.0])
    x = P[first].copy()
    for _ in range(max_iter):
        dots = P @ x
        j = int(np.argmin(dots))
        if float(x @ x) - dots[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        for _ in range(max_iter):
            Q = P[S]
            k = len(S)
            # affine minimizer over aff(Q): [Q Q^T 1; 1^T 0] [mu; nu] = [0; 1]
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = Q @ Q.T
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            mu = np.linalg.lstsq(A, rhs, rcond=None)[0][:k]
            if np.all(mu > tol):
                lam = mu
                break
            neg = mu <= tol
            ratios = np.where(neg, lam / np.where(neg, lam - mu, 1.0), np.inf)
            theta = float(np.min(ratios[neg])) if np.any(neg) else 1.0
            theta = min(max(theta, 0.0), 1.0)
            lam = lam + theta * (mu - lam)
            keep = lam > tol
            if not np.any(keep):
                keep[np.argmax(lam)] = True
            S = [s for s, kk in zip(S, keep) if kk]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    weights = np.zeros(N)
    weights[S] = lam
    return x, weights


@dataclass
class LocalHull:
    """``conv`` of a factor's support points, with the cheapest available projection."""

    points: np.ndarray  # (N, k) 0/1 support points
    kind: str  # "box", "simplex", "capped", "point", "general", "empty"
    free: np.ndarray | None = None  # coordinates not pinned to 0 (simplex kinds)

    @classmethod
    def from_table(cls, table: np.ndarray) -> "LocalHull":
        t = np.asarray(table).reshape(-1)
        k = t.size.bit_length() - 1
        support = np.flatnonzero(t > 0)
        pts = ((support[:, None] >> np.arange(k)[None, :]) & 1).astype(float)
        if support.size == 0:
            return cls(pts, "empty")
        if k == 0 or support.size == 1:
            return cls(pts, "point")
        if support.size == 2**k:
            return cls(pts, "box")
        weights = pts.sum(axis=1)
        if np.all(weights <= 1):
            free = np.zeros(k, dtype=bool)
            unit = pts[weights == 1]
            free[np.argmax(unit, axis=1)] = True
            kind = "capped" if np.any(weights == 0) else "simplex"
            return cls(pts, kind, free)
        return cls(pts, "general")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def project(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.kind == "box":
            return np.clip(b, 0.0, 1.0)
        if self.kind == "point":
            return self.points[0].copy()
        if self.kind in ("simplex", "capped"):
            out = np.zeros_like(b)
            v = b[self.free]
            if self.kind == "capped":
                c = np.maximum(v, 0.0)
                out[self.free] = c if c.sum() <= 1.0 else project_simplex(v)
            else:
                out[self.free] = project_simplex(v)
            return out
        if self.kind == "empty":
            raise ValueError("empty support")
        x, _ = min_norm_point(self.points - b[None, :])
        return x + b

    def distance2(self, b: np.ndarray) -> float:
        p = self.project(b)
        return float(np.sum((p - b) ** 2))

    def contains(self, b: np.ndarray, tol: float = 1e-13) -> bool:
        if self.kind == "box":
            return bool(np.all(b >= -tol) and np.all(b <= 1 + tol))
        if self.kind in ("simplex", "capped"):
            v = b[self.free]
            if np.any(v < -tol) or np.any(np.abs(b[~self.free]) > tol):
                return False
            s = float(v.sum())
            return s <= 1 + tol and (self.kind == "capped" or s >= 1 - tol)
        if self.kind == "point":
            return bool(np.all(np.abs(b - self.points[0]) <= tol))
        return self.distance2(b) <= tol * tol

    def affine_equations(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows ``n`` and offsets ``d`` with ``n x = d`` describing ``aff(points)``."""
        k = self.dim
        if self.kind == "box" or k == 0:
            return np.zeros((0, k)), np.zeros(0)
        base = self.points[0]
        D = self.points[1:] - base
        if D.shape[0] == 0:
            return np.eye(k), base.copy()
        _, s, vt = np.linalg.svd(D, full_matrices=True)
        rank = int(np.sum(s > 1e-10))
        normals = vt[rank:]
        return normals, normals @ base


class FeasiblePolytope:
    """``P = {beta in R^E : beta restricted to each factor lies in that factor's hull}``."""

    def __init__(self, graph, hulls: dict[str, LocalHull] | None = None):
        self.graph = graph
        self.hulls = hulls or {f: LocalHull.from_table(graph.tables[f]) for f in graph.factors}
        self.inc = {f: np.array(graph.incidence[f], dtype=int) for f in graph.factors}
        self.nontrivial = [f for f in graph.factors if self.hulls[f].kind != "box" and self.inc[f].size]
        self.empty_factor = next((f for f in graph.factors if self.hulls[f].kind == "empty"), None)
        m = graph.num_edges
        rows, rhs = [], []
        for f in self.nontrivial:
            n, d = self.hulls[f].affine_equations()
            for ni, di in zip(n, d):
                row = np.zeros(m)
                row[self.inc[f]] = ni
                rows.append(row)
                rhs.append(di)
        if rows:
            M = np.array(rows)
            u, s, vt = np.linalg.svd(M, full_matrices=True)
            rank = int(np.sum(s > 1e-10))
            self.normal_basis = vt[:rank]
            self.direction_basis = vt[rank:]
            # a point of the affine hull: least-squares solution of M x = rhs
            self.anchor = np.linalg.lstsq(M, np.array(rhs), rcond=None)[0]
        else:
            self.normal_basis = np.zeros((0, m))
            self.direction_basis = np.eye(m)
            self.anchor = np.zeros(m)

    @property
    def is_box(self) -> bool:
        return not self.nontrivial

    def to_affine(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the intersection of the per-factor affine hulls."""
        if self.normal_basis.shape[0] == 0:
            return x
        return x - self.normal_basis.T @ (self.normal_basis @ (x - self.anchor))

    def tangent(self, v: np.ndarray) -> np.ndarray:
        if self.normal_basis.shape[0] == 0:
            return v
        return v - self.normal_basis.T @ (self.normal_basis @ v)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        if np.any(x < -tol) or np.any(x > 1 + tol):
            return False
        return all(self.hulls[f].contains(x[self.inc[f]], tol) for f in self.nontrivial)

    def violation(self, x: np.ndarray) -> float:
        worst = float(max(np.max(-x, initial=0.0), np.max(x - 1, initial=0.0)))
        for f in self.nontrivial:
            worst = max(worst, self.hulls[f].distance2(x[self.inc[f]]) ** 0.5)
        return worst

    def project(self, x: np.ndarray, tol: float = 1e-14, max_cycles: int = 20000) -> np.ndarray:
        """Euclidean projection onto ``P`` (Dykstra; exact clip when ``P`` is the cube)."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0) if self.is_box else self.to_affine(np.asarray(x, dtype=float))
        if self.is_box:
            return x
        if self.contains(x, tol=1e-15):
            return x
        sets = self.nontrivial + ["__box__"]
        incr = {s: np.zeros(self.graph.num_edges) for s in sets}
        y = x.copy()
        for _ in range(max_cycles):
            prev = y.copy()
            for s in sets:
                z = y + incr[s]
                if s == "__box__":
                    new = np.clip(z, 0.0, 1.0)
                else:
                    idx = self.inc[s]
                    new = z.copy()
                    new[idx] = self.hulls[s].project(z[idx])
                incr[s] = z - new
                y = new
            if np.max(np.abs(y - prev)) <= tol:
                break
        return y
