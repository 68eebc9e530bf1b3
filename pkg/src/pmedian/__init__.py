"""Exact p-median solver built on closed-form optimality cuts.

Public surface:

* :mod:`pmedian.instance` -- parsing, generation and preprocessing
* :mod:`pmedian.benders`  -- cut mathematics and separation
* :mod:`pmedian.simplex`  -- bounded-variable LP engine
* :mod:`pmedian.master`   -- cut pool, reduction, reduced-cost fixing
* :mod:`pmedian.heuristics` / :mod:`pmedian.driver` -- incumbents and the
  two-phase exact solve
* :mod:`pmedian.oracle`   -- enumeration and substitution ground truth
* :mod:`pmedian.export`   -- LP-format model writers
"""

from .driver import Params, SolveResult, solve
from .instance import Instance, generate_rw, load_instance, preprocess

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "Params",
    "SolveResult",
    "generate_rw",
    "load_instance",
    "preprocess",
    "solve",
    "__version__",
]
