"""Numerical tolerances shared across the package.

Everything float-width dependent lives here so a single record can be
swapped when running at a different precision.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    prob_sum: float = 1e-12        # rows of P, rho0, policies
    bellman: float = 1e-10         # Q = r + gamma P V, V = <pi, Q>
    occupancy_sum: float = 1e-10
    occupancy_floor: float = 1e-12
    identity: float = 1e-9         # value / Q difference identities
    lemma: float = 1e-8            # default LemmaReport pass threshold
    strong_convexity: float = 1e-10
    ridge: float = 1e-10           # log-linear regression fallback


TOL = Tolerances()
