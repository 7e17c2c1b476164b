"""Empirical checks of the convergence conditions over run ensembles."""

from .conditions import (ConditionParams, MeasureSpec, check_complexity_curve, check_decomposition,
                         check_P1, check_P2, check_P3, check_trend, dyadic_points, p4_violations,
                         p4prime_violations)
from .ensemble import MIN_REPLICATIONS, Ensemble, jackknife, jackknife_stderr, run_ensemble
from .recursions import RECURSIONS, RecursionSpec, RecursionTerms, check_recursion, recursion_spec
from .reports import (FAIL, INCONCLUSIVE, PASS, SKIPPED, ConditionReport, DecompositionReport,
                      to_jsonable)

__all__ = [
    "ConditionParams", "MeasureSpec", "check_P1", "check_P2", "check_P3", "check_decomposition",
    "check_complexity_curve", "check_trend", "dyadic_points", "p4_violations", "p4prime_violations",
    "Ensemble", "MIN_REPLICATIONS", "jackknife", "jackknife_stderr", "run_ensemble",
    "RECURSIONS", "RecursionSpec", "RecursionTerms", "check_recursion", "recursion_spec",
    "PASS", "FAIL", "INCONCLUSIVE", "SKIPPED", "ConditionReport", "DecompositionReport",
    "to_jsonable",
]
