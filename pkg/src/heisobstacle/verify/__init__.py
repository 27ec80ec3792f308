"""Numerical checks of solutions and of the supporting inequalities."""

from .checks import LSReport, SandwichReport, ls_check, negative_control, sandwich_bounds, sandwich_check
from .consistency import ConsistencyReport, consistency_study, zero_operator_check
from .lemmas import LEMMAS, LemmaReport, lemma_suite
from .rates import RateReport, SweepAborted, eps_sweep

__all__ = [
    "LEMMAS", "ConsistencyReport", "LSReport", "LemmaReport", "RateReport", "SandwichReport",
    "SweepAborted", "consistency_study", "eps_sweep", "lemma_suite", "ls_check",
    "negative_control", "sandwich_bounds", "sandwich_check", "zero_operator_check",
]
