"""Multiaffine polynomials stored as coefficient tables over bitmasks.

Coefficient ``c[s]`` multiplies the monomial ``prod_j x_j^{s_j}`` where
``s_j`` is bit ``j`` of ``s`` and ``x_j`` is the ``j``-th label. A local
table of a factor is transcribed verbatim into the polynomial over that
factor's edge variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, LabelClash, MissingLabel

__all__ = [
    "MultiAffinePolynomial",
    "from_local_table",
    "evaluate",
    "product",
    "phi_step",
    "phi_chain",
    "chain_labels",
]


def _nbits(size: int) -> int:
    n = int(size).bit_length() - 1
    if size <= 0 or 2**n != size:
        raise DimensionMismatch(f"coefficient count {size} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class MultiAffinePolynomial:
    """Multiaffine polynomial; ``factors`` records provenance when built by :func:`product`."""

    variables: tuple[str, ...]
    coefficients: np.ndarray = field(repr=False)
    factors: tuple["MultiAffinePolynomial", ...] = field(default=(), repr=False)

    def __post_init__(self):
        vars_ = tuple(str(v) for v in self.variables)
        if len(set(vars_)) != len(vars_):
            raise LabelClash(f"repeated labels in {vars_}")
        coeffs = np.array(self.coefficients, dtype=float).reshape(-1)
        if coeffs.size != 2 ** len(vars_):
            raise DimensionMismatch(f"{coeffs.size} coefficients for {len(vars_)} variables")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "variables", vars_)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def index(self, label: str) -> int:
        try:
            return self.variables.index(label)
        except ValueError:
            raise MissingLabel(f"label {label!r} not in {self.variables}") from None

    def coefficient(self, monomial: Mapping[str, int] | Sequence[str]) -> float:
        """Coefficient of the monomial given as a set of labels (or label -> 0/1 map)."""
        labels = [k for k, v in monomial.items() if v] if isinstance(monomial, Mapping) else list(monomial)
        mask = 0
        for lab in labels:
            mask |= 1 << self.index(lab)
        return float(self.coefficients[mask])

    def tensor(self) -> np.ndarray:
        """Coefficients as an ``(2,)*n`` array whose axis ``i`` is variable ``i``."""
        n = self.nvars
        return self.coefficients.reshape((2,) * n).transpose(tuple(range(n - 1, -1, -1))) if n else self.coefficients.reshape(())

    @classmethod
    def from_tensor(cls, labels: Sequence[str], arr: np.ndarray) -> "MultiAffinePolynomial":
        n = len(labels)
        flat = np.asarray(arr).transpose(tuple(range(n - 1, -1, -1))).reshape(-1) if n else np.asarray(arr).reshape(1)
        return cls(tuple(labels), flat)

    def __call__(self, x):
        return evaluate(self, x)

    def is_affine(self) -> bool:
        n = self.nvars
        masks = np.arange(2**n)
        popcount = np.array([bin(int(s)).count("1") for s in masks])
        return bool(np.all(self.coefficients[popcount >= 2] == 0))

    def substitute(self, values: Mapping[str, complex]) -> "MultiAffinePolynomial":
        """Plug constants into some variables; the result is over the remaining labels."""
        arr = self.tensor().astype(complex if any(isinstance(v, complex) for v in values.values()) else float)
        labels = list(self.variables)
        for lab, v in values.items():
            i = labels.index(lab) if lab in labels else None
            if i is None:
                raise MissingLabel(f"label {lab!r} not in {self.variables}")
            arr = np.take(arr, 0, axis=i) + v * np.take(arr, 1, axis=i)
            labels.pop(i)
        if np.iscomplexobj(arr):
            if np.any(np.abs(arr.imag) > 0):
                raise ValueError("complex substitution would produce complex coefficients")
            arr = arr.real
        return MultiAffinePolynomial.from_tensor(labels, arr)

    def flip(self, labels: Sequence[str]) -> "MultiAffinePolynomial":
        """Polynomial ``h(..., -x_l, ...)`` for every ``l`` in ``labels``."""
        sign = np.ones(2**self.nvars)
        masks = np.arange(2**self.nvars)
        for lab in labels:
            j = self.index(lab)
            sign = np.where((masks >> j) & 1, -sign, sign)
        return MultiAffinePolynomial(self.variables, self.coefficients * sign)

    def derivative(self, label: str) -> "MultiAffinePolynomial":
        j = self.index(label)
        arr = np.take(self.tensor(), 1, axis=j)
        labels = [v for v in self.variables if v != label]
        return MultiAffinePolynomial.from_tensor(labels, arr)

    def __repr__(self) -> str:
        return f"MultiAffinePolynomial(variables={self.variables}, coefficients={self.coefficients.tolist()})"


def from_local_table(table, labels: Sequence[str]) -> MultiAffinePolynomial:
    table = np.asarray(table, dtype=float).reshape(-1)
    if table.size != 2 ** len(labels):
        raise DimensionMismatch(f"table of length {table.size} for {len(labels)} labels")
    return MultiAffinePolynomial(tuple(labels), table)


def evaluate(h: MultiAffinePolynomial, x) -> complex | float:
    """``sum_s h_s x^s``; ``x`` may be real or complex, with a trailing batch axis allowed first.

    ``x`` has shape ``(n,)`` or ``(batch, n)``.
    """
    x = np.asarray(x)
    batched = x.ndim == 2
    xs = x if batched else x[None, :]
    if xs.shape[1] != h.nvars:
        raise DimensionMismatch(f"point of length {xs.shape[1]} for {h.nvars} variables")
    dtype = np.result_type(xs.dtype, float)
    c = np.broadcast_to(h.coefficients.astype(dtype), (xs.shape[0], h.coefficients.size))
    for j in range(h.nvars - 1, -1, -1):
        half = c.shape[1] // 2
        c = c[:, :half] + xs[:, j : j + 1] * c[:, half:]
    out = c[:, 0]
    if not batched:
        out = out[0]
        return complex(out) if np.iscomplexobj(out) else float(out)
    return out


def product(h1: MultiAffinePolynomial, h2: MultiAffinePolynomial) -> MultiAffinePolynomial:
    clash = set(h1.variables) & set(h2.variables)
    if clash:
        raise LabelClash(f"labels {sorted(clash)} appear in both factors")
    coeffs = np.outer(h2.coefficients, h1.coefficients).reshape(-1)
    parts = (h1.factors or (h1,)) + (h2.factors or (h2,))
    return MultiAffinePolynomial(h1.variables + h2.variables, coeffs, parts)


def phi_step(h: MultiAffinePolynomial, z_label: str, y_label: str) -> MultiAffinePolynomial:
    """``(1 + d_z d_y) h`` at ``z = y = 0``: keep monomials with neither or both of ``z, y``."""
    iz, iy = h.index(z_label), h.index(y_label)
    if iz == iy:
        raise LabelClash("phi needs two distinct labels")
    arr = h.tensor()
    lo, hi = sorted((iz, iy))
    both0 = np.take(np.take(arr, 0, axis=hi), 0, axis=lo)
    both1 = np.take(np.take(arr, 1, axis=hi), 1, axis=lo)
    labels = [v for i, v in enumerate(h.variables) if i not in (iz, iy)]
    return MultiAffinePolynomial.from_tensor(labels, both0 + both1)


def chain_labels(m: int) -> tuple[list[str], list[str]]:
    return [f"z{j}" for j in range(1, m + 1)], [f"y{j}" for j in range(1, m + 1)]


def _as_poly(p, labels) -> MultiAffinePolynomial:
    if isinstance(p, MultiAffinePolynomial):
        if p.nvars != len(labels):
            raise DimensionMismatch("q and r must have the same number of variables")
        return MultiAffinePolynomial(tuple(labels), p.coefficients)
    return from_local_table(p, labels)


def phi_chain(q, r, k: int) -> MultiAffinePolynomial:
    """``Phi_{z_k,y_k} ... Phi_{z_1,y_1} [q(z) r(y)]`` over labels ``z_{k+1..m}, y_{k+1..m}``.

    ``q`` and ``r`` are coefficient vectors over ``{0,1}^m`` (or polynomials,
    whose labels are replaced by ``z_j`` / ``y_j``). For ``k = m`` the result
    is the constant ``sum_s q_s r_s``.
    """
    m_q = _nbits(np.asarray(q.coefficients if isinstance(q, MultiAffinePolynomial) else q).size)
    m_r = _nbits(np.asarray(r.coefficients if isinstance(r, MultiAffinePolynomial) else r).size)
    if m_q != m_r:
        raise DimensionMismatch(f"q has {m_q} variables, r has {m_r}")
    if not 0 <= k <= m_q:
        raise DimensionMismatch(f"k={k} outside 0..{m_q}")
    zl, yl = chain_labels(m_q)
    f = product(_as_poly(q, zl), _as_poly(r, yl))
    f = MultiAffinePolynomial(f.variables, f.coefficients)
    for j in range(k):
        f = phi_step(f, zl[j], yl[j])
    return f
