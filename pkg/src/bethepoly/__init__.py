"""Bethe approximation for binary normal factor graphs in polynomial form.

Exact partition functions, the Bethe partition function in its free-energy and
polynomial min-max forms, belief propagation, real-stability certificates,
iterated positive correlation checks, graph covers and permanents.
"""

__version__ = "0.1.0"

from .bethe import BetheConfig, BetheResult, PseudoMarginal, bethe_objective, bethe_solve
from .emax import emax
from .exact import exact_marginals, partition_function
from .graph import Bipartition, FactorGraph, bipartition, make_bipartite, parse, serialize, two_factor_graph, validate
from .poly import MultiAffinePolynomial, from_local_table, phi_chain, phi_step
from .stability import Stability, stability_check

__all__ = [
    "__version__",
    "BetheConfig",
    "BetheResult",
    "Bipartition",
    "FactorGraph",
    "MultiAffinePolynomial",
    "PseudoMarginal",
    "Stability",
    "bethe_objective",
    "bethe_solve",
    "bipartition",
    "emax",
    "exact_marginals",
    "from_local_table",
    "make_bipartite",
    "parse",
    "partition_function",
    "phi_chain",
    "phi_step",
    "serialize",
    "stability_check",
    "two_factor_graph",
    "validate",
]
