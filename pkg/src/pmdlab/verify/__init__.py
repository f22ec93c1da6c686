"""Numerical certificates for the inequalities behind the PMD analysis."""
from .reports import LemmaReport, worst
from .checks import (check_local_smoothness, check_negent_smooth, check_occupancy_l1,
                     check_omd_to_greedy, check_pinsker, check_softmax_approx,
                     linearization_error)
from .vgd import (ClosureReport, VgdEstimate, advantage, check_complete_vgd,
                  check_epsgreedy_vgd, closure_audit, estimate_vgd)
from .counterexamples import counterexample_suite

__all__ = ["LemmaReport", "worst", "check_local_smoothness", "check_negent_smooth",
           "check_occupancy_l1", "check_omd_to_greedy", "check_pinsker", "check_softmax_approx",
           "linearization_error", "ClosureReport", "VgdEstimate", "advantage",
           "check_complete_vgd", "check_epsgreedy_vgd", "closure_audit", "estimate_vgd",
           "counterexample_suite"]
