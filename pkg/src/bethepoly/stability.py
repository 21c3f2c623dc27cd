"""Real-stability certificates for multiaffine polynomials.

A real polynomial is *stable* when it has no zero with every coordinate in
the open upper half-plane. General multiaffine stability is not decided
here; :func:`stability_check` runs a ladder of sound rules and answers
``UNKNOWN`` when none applies.

The ladder, in order:

1. constructor rule: affine with nonnegative coefficients, not identically zero;
2. recorded product of stable factors;
3. exact test for at most two variables (``h10 * h01 >= h00 * h11`` for
   bivariate ``h``);
4. negative-lattice (log-submodular) necessary condition for nonnegative
   coefficients; a violated pair proves instability;
5. randomized search for an explicit upper-half-plane zero;
6. ``UNKNOWN``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .poly import MultiAffinePolynomial, evaluate, from_local_table

__all__ = [
    "Stability",
    "StabilityVerdict",
    "stability_check",
    "log_submodular_check",
    "bivariate_is_stable",
    "verify_witness",
]

WITNESS_REL_TOL = 1e-10
WITNESS_MIN_IMAG = 1e-6


class Stability(enum.Enum):
    STABLE = "Stable"
    NOT_STABLE = "NotStable"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class StabilityVerdict:
    status: Stability
    rule: str
    witness: tuple[complex, ...] | None = None
    detail: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return self.status is Stability.STABLE

    def as_dict(self) -> dict:
        out = {"status": self.status.value, "rule": self.rule}
        if self.witness is not None:
            out["witness"] = [[w.real, w.imag] for w in self.witness]
        if self.detail:
            out["detail"] = self.detail
        return out


def _popcount(s: int) -> int:
    return bin(s).count("1")


def log_submodular_check(table, rtol: float = 0.0):
    """First pair ``(s, t)`` with ``g(s) g(t) < g(s|t) g(s&t)``, or ``None``.

    Products are compared exactly (as rationals) unless ``rtol`` is given.
    """
    t = np.asarray(table, dtype=float).reshape(-1)
    n = t.size
    exact = [Fraction(float(v)) for v in t]
    for s in range(n):
        for u in range(s + 1, n):
            lhs = exact[s] * exact[u]
            rhs = exact[s | u] * exact[s & u]
            if rtol == 0.0:
                bad = lhs < rhs
            else:
                bad = float(lhs) < float(rhs) * (1 - rtol)
            if bad:
                return (s, u)
    return None


def bivariate_is_stable(h00, h10, h01, h11, flipped_second_block: bool = False) -> bool:
    """Exact stability of ``h00 + h10 x + h01 y + h11 x y`` (real coefficients).

    With ``flipped_second_block`` the question is about ``h(x, -y)``, whose
    condition reads ``h10 h01 <= h00 h11``.
    """
    a, b, c, d = (Fraction(float(v)) for v in (h00, h10, h01, h11))
    if flipped_second_block:
        c, d = -c, -d
    if a == b == c == d == 0:
        return False
    return b * c >= a * d


def verify_witness(h: MultiAffinePolynomial, z) -> bool:
    """True when ``z`` is a numerical zero of ``h`` strictly inside the upper half-plane."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= WITNESS_MIN_IMAG):
        return False
    val = abs(evaluate(h, z))
    scale = float(np.sum(np.abs(h.coefficients) * np.abs(_monomials(z))))
    return scale > 0 and val <= WITNESS_REL_TOL * scale


def _monomials(z: np.ndarray) -> np.ndarray:
    n = z.size
    mono = np.ones(1, dtype=complex)
    for j in range(n):
        mono = np.concatenate([mono, mono * z[j]])
    return mono


def _bivariate_witness(h: MultiAffinePolynomial):
    a, b, c, d = h.coefficients
    for s in (1.0, 0.5, 2.0, 0.1, 10.0):
        for x in (0.0, 1.0, -1.0, 3.0, -3.0):
            z1 = complex(x, s)
            den = c + d * z1
            if abs(den) == 0:
                continue
            z2 = -(a + b * z1) / den
            if z2.imag > WITNESS_MIN_IMAG and verify_witness(h, [z1, z2]):
                return (z1, z2)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        z1 = complex(rng.normal() * 3, np.exp(rng.normal() * 2))
        den = c + d * z1
        if den == 0:
            continue
        z2 = -(a + b * z1) / den
        if z2.imag > WITNESS_MIN_IMAG and verify_witness(h, [z1, z2]):
            return (z1, z2)
    return None


def _falsify(h: MultiAffinePolynomial, starts: int, steps: int, seed: int):
    """Search for an upper-half-plane zero by solving for one coordinate.

    For multiaffine ``h`` and fixed values of the other coordinates,
    ``h = A + B z_j`` has the single root ``z_j = -A/B``. Each start fixes a
    coordinate ``j`` and random upper-half-plane values for the rest, then
    hill-climbs (adaptive step, log-parametrized imaginary parts) to push
    ``Im(-A/B)`` above zero. Any point found is re-verified as a zero.
    """
    n = h.nvars
    rng = np.random.default_rng(seed)
    for start in range(starts):
        j = start % n
        rest = [i for i in range(n) if i != j]
        hA = h.substitute({h.variables[j]: 0.0})
        hB = h.derivative(h.variables[j])
        if not np.any(hB.coefficients):
            continue
        re = rng.normal(scale=2.0, size=n - 1)
        lim = rng.normal(scale=1.5, size=n - 1)

        def score(re_, lim_):
            w = re_ + 1j * np.exp(lim_)
            b = evaluate(hB, w)
            if b == 0:
                return -np.inf, None
            root = -evaluate(hA, w) / b
            return min(root.imag, float(np.min(np.exp(lim_)))), root

        best, root = score(re, lim)
        step = 0.5
        for _ in range(steps):
            if best > WITNESS_MIN_IMAG * 10:
                break
            cand_re = re + step * rng.normal(size=n - 1)
            cand_lim = lim + step * rng.normal(size=n - 1)
            val, croot = score(cand_re, cand_lim)
            if val > best:
                best, root, re, lim = val, croot, cand_re, cand_lim
                step = min(step * 1.5, 5.0)
            else:
                step = max(step * 0.8, 1e-3)
        if best > WITNESS_MIN_IMAG and root is not None:
            z = np.empty(n, dtype=complex)
            z[rest] = re + 1j * np.exp(lim)
            z[j] = root
            if verify_witness(h, z):
                return tuple(complex(v) for v in z)
    return None


def stability_check(
    h: MultiAffinePolynomial, starts: int = 200, steps: int = 500, seed: int = 0
) -> StabilityVerdict:
    coeffs = h.coefficients
    n = h.nvars
    if not np.any(coeffs):
        return StabilityVerdict(Stability.NOT_STABLE, "zero-polynomial", detail={"reason": "identically zero"})

    if h.is_affine() and np.all(coeffs >= 0):
        return StabilityVerdict(Stability.STABLE, "affine-nonnegative")

    if h.factors:
        verdicts = [stability_check(f, starts, steps, seed) for f in h.factors]
        if all(v.stable for v in verdicts):
            return StabilityVerdict(Stability.STABLE, "product-of-stable", detail={"factors": len(verdicts)})
        for f, v in zip(h.factors, verdicts):
            if v.status is Stability.NOT_STABLE and v.witness is not None:
                # extend the factor's zero by i in the other coordinates
                pos = {lab: w for lab, w in zip(f.variables, v.witness)}
                z = tuple(pos.get(lab, 1j) for lab in h.variables)
                if verify_witness(h, z):
                    return StabilityVerdict(Stability.NOT_STABLE, "factor-not-stable", witness=z)

    if n <= 1:
        # real univariate affine polynomials have real roots only
        return StabilityVerdict(Stability.STABLE, "univariate-real")

    if n == 2:
        a, b, c, d = coeffs
        values = {"h00": a, "h10": b, "h01": c, "h11": d, "h10*h01": b * c, "h00*h11": a * d}
        if bivariate_is_stable(a, b, c, d):
            return StabilityVerdict(Stability.STABLE, "bivariate-coefficient-inequality", detail=values)
        return StabilityVerdict(
            Stability.NOT_STABLE,
            "bivariate-coefficient-inequality",
            witness=_bivariate_witness(h),
            detail=values,
        )

    if np.all(coeffs >= 0):
        pair = log_submodular_check(coeffs)
        if pair is not None:
            s, t = pair
            return StabilityVerdict(
                Stability.NOT_STABLE,
                "log-submodularity-violated",
                detail={
                    "pair": [s, t],
                    "g(s)*g(t)": float(coeffs[s] * coeffs[t]),
                    "g(s|t)*g(s&t)": float(coeffs[s | t] * coeffs[s & t]),
                },
            )

    witness = _falsify(h, starts, steps, seed)
    if witness is not None:
        return StabilityVerdict(Stability.NOT_STABLE, "numeric-zero", witness=witness)
    return StabilityVerdict(Stability.UNKNOWN, "no-certificate", detail={"starts": starts, "steps": steps})


def table_stability(table, seed: int = 0) -> StabilityVerdict:
    t = np.asarray(table, dtype=float).reshape(-1)
    n = t.size.bit_length() - 1
    return stability_check(from_local_table(t, [f"x{j}" for j in range(n)]), seed=seed)
