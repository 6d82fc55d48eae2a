"""Risk-controlled configuration selection.

Thin wrapper over the compiled core: testing-guided multi-objective
Bayesian optimization plus certified selection via fixed-sequence testing.
"""

try:
    from ._riskbo import *  # noqa: F401,F403  (installed package layout)
    from ._riskbo import __doc__ as _core_doc  # noqa: F401
except ImportError:  # pragma: no cover - in-tree test layout
    from _riskbo import *  # noqa: F401,F403

__all__ = [
    "hoeffding_p_value",
    "hb_p_value",
    "binom_cdf",
    "h1",
    "alpha_max",
    "region_of_interest",
    "pareto_front",
    "hypervolume",
    "hvi",
    "hypervolume_mc",
    "GpModel",
    "fit_gp",
    "builtin_problems",
    "select",
    "run_experiment",
]
