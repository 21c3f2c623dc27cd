"""Bethe partition function: pseudo-marginal form and polynomial min-max form.

Pseudo-marginal (free-energy) form, maximized over local distributions
``alpha_a`` with edge marginals ``beta``::

    log Z_B = max  sum_a sum_c alpha_a(c) log(g_a(c) / alpha_a(c)) - sum_e H(beta_e)

Polynomial form, with the inner infimum split per factor::

    log Z_B = max_beta  sum_e [beta_e log beta_e + (1 - beta_e) log(1 - beta_e)]
                        + sum_a EMax(g_a, beta_a)

``EMax(g_a, beta_a) = inf_x log h_a(x) - <beta_a, log x>`` is solved by
:mod:`bethepoly.emax`. The outer maximization is non-convex; the solver is
a multi-start spectral projected gradient ascent over the polytope of
edge marginals with finite objective, and the returned value is a
certified lower bound (the objective at the returned certificate).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from .emax import EMaxResult, EMaxSolver, binary_entropy
from .errors import BudgetExceeded, InfeasibleEverywhere, LocalAgreementViolated
from .exact import DEFAULT_BUDGET_BITS, configuration_weights
from .graph import FactorGraph, require_valid, two_factor_graph
from .hull import FeasiblePolytope
from .seeding import derive_seed, rng_for

__all__ = [
    "PseudoMarginal",
    "Method",
    "BetheConfig",
    "BetheResult",
    "BetheObjective",
    "bethe_objective",
    "bethe_solve",
    "bethe_grid_oracle",
    "certificate_value",
    "relaxation_no_entropy",
    "UpperBoundReport",
    "upper_bound_check",
]

log = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-8
NORMALIZATION_TOL = 1e-9
GRADIENT_CLAMP = 1e-9
BOUNDARY_TOL = 1e-12
STALL_WINDOW = 10


def _local_bits(k: int) -> np.ndarray:
    return ((np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


@dataclass(frozen=True)
class PseudoMarginal:
    beta: dict[str, float]
    alpha: dict[str, np.ndarray]

    @classmethod
    def from_vector(cls, g: FactorGraph, beta, alpha: Mapping[str, np.ndarray]) -> "PseudoMarginal":
        beta = np.asarray(beta, dtype=float)
        return cls(
            {e.id: float(b) for e, b in zip(g.edges, beta)},
            {f: np.asarray(alpha[f], dtype=float) for f in g.factors},
        )

    def beta_vector(self, g: FactorGraph) -> np.ndarray:
        return np.array([self.beta[e.id] for e in g.edges], dtype=float)

    def agreement_residual(self, g: FactorGraph) -> float:
        beta = self.beta_vector(g)
        worst = 0.0
        for f in g.factors:
            inc = g.incidence[f]
            a = self.alpha[f]
            worst = max(worst, abs(float(a.sum()) - 1.0))
            if inc:
                worst = max(worst, float(np.abs(a @ _local_bits(len(inc)) - beta[list(inc)]).max()))
        return worst


class Method(str, enum.Enum):
    POLYNOMIAL = "polynomial-form"
    PSEUDO_MARGINAL = "pseudo-marginal-form"
    GRID = "grid-oracle"
    BP_SEEDED = "bp-seeded"


_METHOD_ALIASES = {"poly": Method.POLYNOMIAL, "marginal": Method.PSEUDO_MARGINAL, "grid": Method.GRID}


@dataclass(frozen=True)
class BetheConfig:
    starts: int = 64
    seed: int = 0
    tol: float = 1e-9
    max_outer_iters: int = 3000
    outer_tol: float = 1e-10
    use_bp: bool = True
    vertex_start: bool = True
    method: str = "poly"
    grid_resolution: int = 20


@dataclass(frozen=True)
class BetheResult:
    log_value: float
    beta_star: dict[str, float]
    inner_optima: dict[str, np.ndarray]
    method: Method
    diagnostics: dict = field(default_factory=dict)
    alpha: dict[str, np.ndarray] = field(default_factory=dict)
    witness: dict | None = None

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))

    def beta_vector(self, g: FactorGraph) -> np.ndarray:
        return np.array([self.beta_star[e.id] for e in g.edges], dtype=float)

    def pseudo_marginal(self) -> PseudoMarginal:
        return PseudoMarginal(dict(self.beta_star), dict(self.alpha))


def _neg_entropy(beta: np.ndarray) -> float:
    return -float(np.sum(binary_entropy(beta)))


def bethe_objective(g: FactorGraph, pm: PseudoMarginal) -> float:
    """Free-energy objective at ``(alpha, beta)``; ``-inf`` if ``alpha`` charges a zero of ``g``."""
    require_valid(g)
    beta = pm.beta_vector(g)
    for f in g.factors:
        a = pm.alpha[f]
        if a.size != g.tables[f].size:
            raise LocalAgreementViolated(f"alpha of {f} has length {a.size}, expected {g.tables[f].size}")
        if np.any(a < -NORMALIZATION_TOL):
            raise LocalAgreementViolated(f"alpha of {f} has a negative entry")
    if np.any(beta < -AGREEMENT_TOL) or np.any(beta > 1 + AGREEMENT_TOL):
        raise LocalAgreementViolated("beta outside [0, 1]")
    for f in g.factors:
        a = pm.alpha[f]
        if abs(float(a.sum()) - 1.0) > NORMALIZATION_TOL:
            raise LocalAgreementViolated(f"alpha of {f} sums to {a.sum()!r}")
        inc = list(g.incidence[f])
        if inc:
            dev = np.abs(a @ _local_bits(len(inc)) - beta[inc])
            if dev.max() > AGREEMENT_TOL:
                j = int(np.argmax(dev))
                raise LocalAgreementViolated(
                    f"factor {f} disagrees with edge {g.edges[inc[j]].id} by {dev[j]:.3e}"
                )
    total = 0.0
    for f in g.factors:
        a = np.clip(pm.alpha[f], 0.0, None)
        t = g.tables[f]
        mask = a > 0
        if np.any(t[mask] <= 0):
            return -np.inf
        total += float(np.sum(a[mask] * np.log(t[mask] / a[mask])))
    return total - float(np.sum(binary_entropy(np.clip(beta, 0.0, 1.0))))


class BetheObjective:
    """``F(beta)`` with envelope gradient; ``entropy_weight = 0`` drops the edge-entropy term."""

    def __init__(self, g: FactorGraph, entropy_weight: float = 1.0, tol: float = 1e-9):
        require_valid(g)
        self.graph = g
        self.entropy_weight = entropy_weight
        self.solvers = {f: EMaxSolver(g.tables[f], tol=tol) for f in g.factors}
        self.inc = {f: np.array(g.incidence[f], dtype=int) for f in g.factors}
        self.polytope = FeasiblePolytope(g)
        self.evaluations = 0

    def evaluate(self, beta: np.ndarray, warm: Mapping[str, EMaxResult] | None = None):
        """``(F, grad, per-factor EMax results)``; ``F = -inf`` with ``grad = None`` when infeasible."""
        self.evaluations += 1
        beta = np.asarray(beta, dtype=float)
        results = {}
        value = self.entropy_weight * _neg_entropy(np.clip(beta, 0.0, 1.0))
        usum = np.zeros(beta.size)
        pinned = np.zeros(beta.size, dtype=bool)
        for f, solver in self.solvers.items():
            idx = self.inc[f]
            u0 = warm[f].u if warm is not None and f in warm and warm[f].feasible else None
            r = solver.solve(beta[idx], u0=u0)
            results[f] = r
            if not r.feasible:
                return -np.inf, None, results
            value += r.value
            if idx.size:
                u = r.u
                fin = np.isfinite(u)
                usum[idx[fin]] += u[fin]
                pinned[idx[~fin]] = True
        b = np.clip(beta, GRADIENT_CLAMP, 1 - GRADIENT_CLAMP)
        grad = self.entropy_weight * np.log(b / (1 - b)) - usum
        # conditioned coordinates: push inward; the projection keeps forced ones in place
        low = pinned & (beta <= 0.5)
        grad[low] = np.log((1 - GRADIENT_CLAMP) / GRADIENT_CLAMP)
        grad[pinned & ~low] = -np.log((1 - GRADIENT_CLAMP) / GRADIENT_CLAMP)
        return value, self.polytope.tangent(grad), results

    def infeasibility_witness(self, beta: np.ndarray, results) -> dict:
        for f, r in results.items():
            if not r.feasible:
                return {"factor": f, "beta": beta[self.inc[f]].tolist(), **(r.witness or {})}
        return {}


@dataclass
class _Start:
    index: int
    label: str
    value: float
    beta: np.ndarray
    results: dict
    iterations: int
    pg_norm: float
    witness: dict | None = None


def _spg(obj: BetheObjective, x0: np.ndarray, max_iter: int, tol: float):
    """Spectral projected gradient ascent with Armijo backtracking."""
    P = obj.polytope
    x = P.project(x0)
    f, g, res = obj.evaluate(x)
    if g is None:
        return x, f, res, 0, np.inf
    lam = 1.0
    it = 0
    pgn = np.inf
    history = [f]
    for it in range(1, max_iter + 1):
        pg = P.project(x + g) - x
        pgn = float(np.abs(pg).max()) if pg.size else 0.0
        if pgn <= tol:
            break
        d = P.project(x + lam * g) - x
        gd = float(g @ d)
        if gd <= 0:
            d, gd = pg, float(g @ pg)
        if gd <= 1e-15 * max(1.0, abs(f)):
            # remaining ascent is below the resolution of F
            break
        t = 1.0
        accepted = False
        while t >= 1e-12:
            xn = x + t * d
            fn, gn, resn = obj.evaluate(xn, warm=res)
            if gn is not None and fn >= f + 1e-4 * t * gd:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        s = xn - x
        sy = -float(s @ (gn - g))
        lam = float(np.clip(s @ s / sy, 1e-8, 1e8)) if sy > 1e-300 else 1e4
        x, f, g, res = xn, fn, gn, resn
        history.append(f)
        if len(history) > STALL_WINDOW and f - history[-STALL_WINDOW - 1] <= 1e-14 * max(1.0, abs(f)):
            # creeping towards a face; the value has converged to working precision
            break
    return x, f, res, it, pgn


def _interior_center(obj: BetheObjective, seed: int) -> np.ndarray:
    P = obj.polytope
    m = obj.graph.num_edges
    if P.is_box:
        return np.full(m, 0.5)
    pts = [P.project(rng_for(seed, "bethe-center", j).uniform(0.0, 1.0, m)) for j in range(8)]
    pts.append(P.project(np.full(m, 0.5)))
    return np.mean(pts, axis=0)


def _start_points(obj: BetheObjective, cfg: BetheConfig):
    g = obj.graph
    m = g.num_edges
    center = _interior_center(obj, cfg.seed)
    for i in range(cfg.starts):
        x = rng_for(cfg.seed, "bethe-start", i).uniform(0.02, 0.98, m)
        if not obj.polytope.is_box:
            x = 0.5 * center + 0.5 * obj.polytope.project(x)
        yield f"random-{i}", x
    if cfg.use_bp:
        from .bp import beliefs, bp_run
        from .errors import ZeroBelief, ZeroMessage

        try:
            run = bp_run(g, max_iters=2000, tol=1e-10)
            if run.converged:
                yield "bp", beliefs(g, run.messages).beta_vector(g)
        except (ZeroMessage, ZeroBelief):
            pass
    if cfg.vertex_start and m <= 20:
        w = configuration_weights(g, budget_bits=20)
        s = int(np.argmax(w))
        if w[s] > 0:
            yield "vertex", ((s >> np.arange(m)) & 1).astype(float)


def _pick(starts: list[_Start]) -> _Start:
    best = max(s.value for s in starts)
    tied = [s for s in starts if s.value == best]
    return min(tied, key=lambda s: tuple(s.beta.tolist()))


def _result_from_start(g: FactorGraph, obj: BetheObjective, best: _Start, starts, method: Method, seed: int):
    x = best.beta
    inner = {f: np.exp(r.u) for f, r in best.results.items()}
    alpha = {f: r.alpha for f, r in best.results.items()}
    diag = {
        "starts": len(starts),
        "best_start": best.label,
        "best_start_seed": derive_seed(seed, "bethe-start", best.label.split("-")[1]) if best.label.startswith("random") else None,
        "outer_iterations": best.iterations,
        "projected_gradient": best.pg_norm,
        "inner_kkt_residual": max((r.kkt_residual for r in best.results.values()), default=0.0),
        "evaluations": obj.evaluations,
        "start_values": [s.value for s in starts],
    }
    return BetheResult(
        float(best.value),
        {e.id: float(b) for e, b in zip(g.edges, x)},
        inner,
        method,
        diag,
        alpha,
    )


def _solve_poly(g: FactorGraph, cfg: BetheConfig, entropy_weight: float = 1.0) -> BetheResult:
    obj = BetheObjective(g, entropy_weight=entropy_weight, tol=cfg.tol)
    if obj.polytope.empty_factor is not None:
        raise InfeasibleEverywhere("a factor has empty support", [{"factor": obj.polytope.empty_factor}])
    starts: list[_Start] = []
    for i, (label, x0) in enumerate(_start_points(obj, cfg)):
        x, f, res, it, pgn = _spg(obj, x0, cfg.max_outer_iters, cfg.outer_tol)
        wit = obj.infeasibility_witness(x, res) if f == -np.inf else None
        starts.append(_Start(i, label, f, x, res, it, pgn, wit))
        log.debug("start %s: value %.12g after %d iterations", label, f, it)
    if not starts:
        raise InfeasibleEverywhere("no starting point", [])
    feasible = [s for s in starts if s.value > -np.inf]
    if not feasible:
        raise InfeasibleEverywhere(
            "every start has objective -inf", [s.witness for s in starts if s.witness][:8]
        )
    best = _pick(feasible)
    method = Method.BP_SEEDED if best.label == "bp" else Method.POLYNOMIAL
    return _result_from_start(g, obj, best, starts, method, cfg.seed)


class _MarginalProgram:
    """Free-energy maximization over the factor distributions, in the variables ``alpha_a`` on supp ``g_a``."""

    def __init__(self, g: FactorGraph):
        self.g = g
        self.blocks = []
        offset = 0
        for f in g.factors:
            t = g.tables[f]
            sup = np.flatnonzero(t > 0)
            k = g.degree(f)
            bits = _local_bits(k)[sup]
            self.blocks.append((f, slice(offset, offset + sup.size), sup, np.log(t[sup]), bits))
            offset += sup.size
        self.n = offset
        # edge marginal read off the factor at ends[0]
        rows_eq = []
        rhs = []
        self.beta_map = np.zeros((g.num_edges, self.n))
        pos = {f: (sl, bits) for f, sl, _, _, bits in self.blocks}
        for e_idx, e in enumerate(g.edges):
            a, b = e.ends
            ja = g.incidence[a].index(e_idx)
            jb = g.incidence[b].index(e_idx)
            row = np.zeros(self.n)
            sla, bitsa = pos[a]
            slb, bitsb = pos[b]
            row[sla] += bitsa[:, ja]
            self.beta_map[e_idx, sla] = bitsa[:, ja]
            row[slb] -= bitsb[:, jb]
            rows_eq.append(row)
            rhs.append(0.0)
        for f, sl, _, _, _ in self.blocks:
            row = np.zeros(self.n)
            row[sl] = 1.0
            rows_eq.append(row)
            rhs.append(1.0)
        self.A = np.array(rows_eq)
        self.b = np.array(rhs)

    def negative(self, v: np.ndarray):
        val = 0.0
        grad = np.zeros_like(v)
        for f, sl, _, logt, _ in self.blocks:
            a = np.clip(v[sl], 1e-300, None)
            pos = v[sl] > 0
            val += float(np.sum(np.where(pos, v[sl] * (logt - np.log(a)), 0.0)))
            grad[sl] = logt - np.log(np.clip(v[sl], 1e-16, None)) - 1.0
        beta = np.clip(self.beta_map @ v, 0.0, 1.0)
        val -= float(np.sum(binary_entropy(beta)))
        bc = np.clip(beta, 1e-16, 1 - 1e-16)
        grad += self.beta_map.T @ np.log(bc / (1 - bc))
        return -val, -grad

    def to_alpha(self, v: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for f, sl, sup, _, _ in self.blocks:
            a = np.zeros(self.g.tables[f].size)
            a[sup] = np.clip(v[sl], 0.0, None)
            s = a.sum()
            out[f] = a / s if s > 0 else a
        return out

    def from_alpha(self, alpha: Mapping[str, np.ndarray]) -> np.ndarray:
        v = np.zeros(self.n)
        for f, sl, sup, _, _ in self.blocks:
            v[sl] = alpha[f][sup]
        return v

    def solve(self, v0: np.ndarray, maxiter: int = 2000):
        cons = {"type": "eq", "fun": lambda v: self.A @ v - self.b, "jac": lambda v: self.A}
        res = minimize(
            self.negative,
            v0,
            jac=True,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * self.n,
            constraints=[cons],
            options={"ftol": 1e-15, "maxiter": maxiter},
        )
        return res.x, res


def _polish_alpha(g: FactorGraph, alpha: dict[str, np.ndarray]) -> PseudoMarginal:
    """Edge marginals from the ``ends[0]`` factor of each edge."""
    beta = np.empty(g.num_edges)
    for e_idx, e in enumerate(g.edges):
        a = e.ends[0]
        j = g.incidence[a].index(e_idx)
        beta[e_idx] = float(alpha[a] @ _local_bits(g.degree(a))[:, j])
    return PseudoMarginal.from_vector(g, np.clip(beta, 0.0, 1.0), alpha)


def _solve_marginal(g: FactorGraph, cfg: BetheConfig) -> BetheResult:
    prog = _MarginalProgram(g)
    starts: list[tuple[str, np.ndarray]] = []
    if cfg.use_bp:
        from .bp import beliefs, bp_run
        from .errors import ZeroBelief, ZeroMessage

        try:
            run = bp_run(g, max_iters=2000, tol=1e-10)
            if run.converged:
                starts.append(("bp", prog.from_alpha(beliefs(g, run.messages).alpha)))
        except (ZeroMessage, ZeroBelief):
            pass
    starts.append(("table", prog.from_alpha({f: g.tables[f] / g.tables[f].sum() for f in g.factors})))
    for i in range(max(cfg.starts - len(starts), 0)):
        rng = rng_for(cfg.seed, "bethe-marginal", i)
        alpha = {}
        for f, sl, sup, _, _ in prog.blocks:
            a = np.zeros(g.tables[f].size)
            a[sup] = rng.dirichlet(np.ones(sup.size))
            alpha[f] = a
        starts.append((f"random-{i}", prog.from_alpha(alpha)))
    best = None
    values = []
    for label, v0 in starts:
        v, res = prog.solve(v0)
        alpha = prog.to_alpha(v)
        pm = _polish_alpha(g, alpha)
        try:
            val = bethe_objective(g, pm)
        except LocalAgreementViolated:
            val = -np.inf
        values.append(val)
        cand = (val, label, pm, int(res.nit))
        if best is None or val > best[0] or (
            val == best[0] and tuple(pm.beta_vector(g)) < tuple(best[2].beta_vector(g))
        ):
            best = cand
    if best is None or best[0] == -np.inf:
        raise InfeasibleEverywhere("no start reached a feasible pseudo-marginal", [])
    val, label, pm, nit = best
    return BetheResult(
        float(val),
        dict(pm.beta),
        {},
        Method.PSEUDO_MARGINAL,
        {"starts": len(starts), "best_start": label, "outer_iterations": nit, "start_values": values},
        dict(pm.alpha),
    )


def _grid_search(g: FactorGraph, resolution: int, max_edges: int = 4):
    require_valid(g)
    m = g.num_edges
    if m > max_edges:
        raise BudgetExceeded(f"grid oracle supports at most {max_edges} edges, graph has {m}")
    R = int(resolution)
    axis = np.arange(R + 1) / R
    total = np.zeros((R + 1,) * m)
    neg_h = -binary_entropy(axis)
    for e in range(m):
        shape = [1] * m
        shape[e] = R + 1
        total = total + neg_h.reshape(shape)
    for f in g.factors:
        inc = g.incidence[f]
        k = len(inc)
        solver = EMaxSolver(g.tables[f])
        if k == 0:
            total = total + solver.solve([]).value
            continue
        grid = np.indices((R + 1,) * k).reshape(k, -1).T / R
        vals = solver.solve_many(grid).reshape((R + 1,) * k)
        shape = [1] * m
        for e in inc:
            shape[e] = R + 1
        total = total + vals.reshape(shape)
    flat = int(np.argmax(total))
    best = float(total.reshape(-1)[flat])
    beta = np.array(np.unravel_index(flat, total.shape), dtype=float) / R if m else np.zeros(0)
    return best, beta


def bethe_grid_oracle(g: FactorGraph, resolution: int = 20, max_edges: int = 4) -> float:
    """Max of ``F`` over the grid ``{0, 1/R, ..., 1}^E``: a lower bound on ``log Z_B``."""
    return _grid_search(g, resolution, max_edges)[0]


def _solve_grid(g: FactorGraph, cfg: BetheConfig) -> BetheResult:
    val, beta = _grid_search(g, cfg.grid_resolution)
    obj = BetheObjective(g, tol=cfg.tol)
    f, _, res = obj.evaluate(beta)
    return BetheResult(
        float(val),
        {e.id: float(b) for e, b in zip(g.edges, beta)},
        {k: np.exp(r.u) for k, r in res.items()},
        Method.GRID,
        {"resolution": cfg.grid_resolution, "points": (cfg.grid_resolution + 1) ** g.num_edges},
        {k: r.alpha for k, r in res.items()},
    )


def bethe_solve(g: FactorGraph, cfg: BetheConfig | None = None) -> BetheResult:
    cfg = cfg or BetheConfig()
    require_valid(g)
    method = _METHOD_ALIASES.get(cfg.method, None) or Method(cfg.method)
    if method in (Method.POLYNOMIAL, Method.BP_SEEDED):
        return _solve_poly(g, cfg)
    if method is Method.PSEUDO_MARGINAL:
        return _solve_marginal(g, cfg)
    return _solve_grid(g, cfg)


def _factor_poly_value(table: np.ndarray, beta: np.ndarray, x: np.ndarray) -> float:
    """``log h(x) - <beta, log x>`` with ``x_j in {0, inf}`` read as conditioning on ``beta_j``."""
    k = beta.size
    bits = _local_bits(k).astype(bool)
    keep = np.ones(table.size, dtype=bool)
    free = np.ones(k, dtype=bool)
    for j in range(k):
        if x[j] == 0:
            keep &= ~bits[:, j]
            free[j] = False
        elif np.isinf(x[j]):
            keep &= bits[:, j]
            free[j] = False
    t = table[keep]
    if not np.any(t > 0):
        return -np.inf
    lx = np.log(x[free])
    z = np.log(np.where(t > 0, t, 1.0)) + bits[keep][:, free].astype(float) @ lx
    z = np.where(t > 0, z, -np.inf)
    zmax = z.max()
    return float(zmax + np.log(np.exp(z - zmax).sum()) - beta[free] @ lx)


def certificate_value(g: FactorGraph, result: BetheResult) -> float:
    """Objective re-evaluated at the certificate carried by ``result``."""
    beta = result.beta_vector(g)
    if not result.inner_optima:
        return bethe_objective(g, result.pseudo_marginal())
    total = _neg_entropy(beta)
    for f in g.factors:
        inc = list(g.incidence[f])
        total += _factor_poly_value(g.tables[f], beta[inc], np.asarray(result.inner_optima[f], dtype=float))
    return total


def relaxation_no_entropy(q, r, cfg: BetheConfig | None = None) -> float:
    """``sup_beta inf_{y,z>0} q(z) r(y) / (z^beta y^beta)`` (not a logarithm)."""
    base = cfg or BetheConfig(starts=8)
    cfg = BetheConfig(
        starts=base.starts,
        seed=base.seed,
        tol=base.tol,
        max_outer_iters=base.max_outer_iters,
        outer_tol=base.outer_tol,
        use_bp=False,
        vertex_start=True,
    )
    g = two_factor_graph(q, r)
    return float(np.exp(_solve_poly(g, cfg, entropy_weight=0.0).log_value))


@dataclass(frozen=True)
class UpperBoundReport:
    z: float
    z_bethe: float
    num_edges: int
    upper_holds: bool
    max_weight: float
    lower_holds: bool
    integral_points_checked: int
    integral_mismatch: float

    @property
    def holds(self) -> bool:
        return self.upper_holds and self.lower_holds

    def as_dict(self) -> dict:
        return {
            "Z": self.z,
            "Z_B": self.z_bethe,
            "edges": self.num_edges,
            "Z <= 2^m Z_B": self.upper_holds,
            "max_weight": self.max_weight,
            "Z_B >= max_weight": self.lower_holds,
            "integral_points_checked": self.integral_points_checked,
            "integral_mismatch": self.integral_mismatch,
        }


def upper_bound_check(
    g: FactorGraph,
    bethe: BetheResult,
    rtol: float = 1e-6,
    budget_bits: int = DEFAULT_BUDGET_BITS,
    max_integral_checks: int = 4096,
) -> UpperBoundReport:
    """``Z <= 2^|E| Z_B`` and ``Z_B >= g(sigma)`` for every configuration.

    ``F`` is evaluated through the EMax machinery at integral ``beta = sigma``
    for up to ``max_integral_checks`` configurations (the heaviest first)
    and must equal ``log g(sigma)`` there.
    """
    w = configuration_weights(g, budget_bits)
    z = float(np.sum(w))
    m = g.num_edges
    log_zb = bethe.log_value
    upper = np.log(z) <= m * np.log(2.0) + log_zb + np.log1p(rtol) if z > 0 else True
    wmax = float(w.max())
    lower = wmax <= 0 or np.log(wmax) <= log_zb + np.log1p(rtol)
    obj = BetheObjective(g)
    order = np.argsort(-w, kind="stable")[:max_integral_checks]
    mismatch = 0.0
    for s in order:
        beta = ((int(s) >> np.arange(m)) & 1).astype(float)
        f, _, _ = obj.evaluate(beta)
        ref = np.log(w[s]) if w[s] > 0 else -np.inf
        if np.isinf(ref) or np.isinf(f):
            if f != ref:
                mismatch = np.inf
        else:
            mismatch = max(mismatch, abs(f - ref))
    return UpperBoundReport(z, float(np.exp(log_zb)), m, bool(upper), wmax, bool(lower), len(order), float(mismatch))
