"""Sum-product belief propagation on normal factor graphs.

Each edge ``e = (a, b)`` carries two length-2 messages, ``a -> b`` and
``b -> a``, stored as ``messages[e, d]`` with ``d = 0`` for the direction
``ends[0] -> ends[1]``. Updates are synchronous with damping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryPoint, ZeroBelief, ZeroMessage
from .graph import FactorGraph, require_valid
from .seeding import rng_for

__all__ = ["MessageSet", "BPResult", "bp_run", "beliefs", "stationarity_residual"]


@dataclass(frozen=True)
class MessageSet:
    """``values[e, d, v]``: message on edge ``e`` in direction ``d`` at value ``v``."""

    values: np.ndarray

    def message(self, g: FactorGraph, edge: str, source: str) -> np.ndarray:
        i = g.edge_index[edge]
        d = 0 if g.edges[i].ends[0] == source else 1
        return self.values[i, d]


@dataclass(frozen=True)
class BPResult:
    messages: MessageSet
    converged: bool
    residual: float
    iterations: int


def _tensor(table: np.ndarray, k: int) -> np.ndarray:
    # axis j <-> local edge j (bit j of the index)
    return table.reshape((2,) * k).transpose(tuple(range(k - 1, -1, -1))) if k else table.reshape(())


class _Plan:
    """Per-factor data reused across sweeps."""

    def __init__(self, g: FactorGraph):
        self.factors = []
        for f in g.factors:
            inc = g.incidence[f]
            k = len(inc)
            # direction of the message arriving at f on each incident edge, and of the one leaving
            into = [1 if g.edges[e].ends[0] == f else 0 for e in inc]
            self.factors.append((f, np.array(inc, dtype=int), np.array(into, dtype=int), _tensor(g.tables[f], k)))


def _factor_outgoing(tensor, incoming):
    """Unnormalized outgoing messages of one factor given its incoming messages."""
    k = len(incoming)
    out = np.empty((k, 2))
    for j in range(k):
        t = tensor
        # contract every axis except j, highest first so axis numbers stay valid
        for i in range(k - 1, -1, -1):
            if i == j:
                continue
            t = np.tensordot(t, incoming[i], axes=([i], [0]))
        out[j] = t
    return out


def bp_run(
    g: FactorGraph,
    init: str = "uniform",
    seed: int = 0,
    damping: float = 0.5,
    max_iters: int = 10000,
    tol: float = 1e-10,
) -> BPResult:
    require_valid(g)
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    m = g.num_edges
    if init == "uniform":
        msgs = np.full((m, 2, 2), 0.5)
    elif init == "random":
        msgs = rng_for(seed, "bp-init").uniform(0.05, 1.0, size=(m, 2, 2))
        msgs /= msgs.sum(axis=2, keepdims=True)
    else:
        raise ValueError(f"unknown init {init!r}")
    plan = _Plan(g)
    residual = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        new = np.empty_like(msgs)
        for f, inc, into, tensor in plan.factors:
            if inc.size == 0:
                continue
            incoming = msgs[inc, into]
            out = _factor_outgoing(tensor, incoming)
            sums = out.sum(axis=1)
            if np.any(sums <= 0):
                j = int(np.flatnonzero(sums <= 0)[0])
                raise ZeroMessage(f"message from {f} on edge {g.edges[inc[j]].id} vanished at sweep {it}")
            new[inc, 1 - into] = out / sums[:, None]
        if damping:
            new = (1.0 - damping) * new + damping * msgs
            new /= new.sum(axis=2, keepdims=True)
        residual = float(np.abs(new - msgs).max()) if m else 0.0
        msgs = new
        if residual <= tol:
            return BPResult(MessageSet(msgs), True, residual, it)
    return BPResult(MessageSet(msgs), False, residual, it)


def beliefs(g: FactorGraph, msgs: MessageSet):
    """Edge and factor beliefs as a :class:`~bethepoly.bethe.PseudoMarginal`."""
    from .bethe import PseudoMarginal

    vals = msgs.values
    prod = vals[:, 0, :] * vals[:, 1, :]
    tot = prod.sum(axis=1)
    if np.any(tot <= 0):
        e = int(np.flatnonzero(tot <= 0)[0])
        raise ZeroBelief(f"edge belief on {g.edges[e].id} has zero mass")
    beta = prod[:, 1] / tot
    alpha = {}
    for f in g.factors:
        inc = g.incidence[f]
        w = np.array(g.tables[f], dtype=float)
        idx = np.arange(w.size)
        for j, e in enumerate(inc):
            d = 1 if g.edges[e].ends[0] == f else 0
            w = w * vals[e, d][(idx >> j) & 1]
        s = w.sum()
        if s <= 0:
            raise ZeroBelief(f"factor belief of {f} has zero mass")
        alpha[f] = w / s
    return PseudoMarginal.from_vector(g, beta, alpha)


def stationarity_residual(g: FactorGraph, pm) -> float:
    """Sup-norm of ``Proj_P(beta + grad F) - beta`` at the edge beliefs of ``pm``."""
    from .bethe import BetheObjective

    beta = pm.beta_vector(g)
    if np.any((beta <= 1e-12) | (beta >= 1 - 1e-12)):
        raise BoundaryPoint("stationarity residual needs strictly interior edge beliefs")
    obj = BetheObjective(g)
    _, grad, _ = obj.evaluate(beta)
    step = obj.polytope.project(beta + grad)
    return float(np.abs(step - beta).max())
