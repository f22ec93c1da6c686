"""Reference solvers and random instance helpers shared by the test modules."""
import numpy as np

from pmdlab import instances as inst
from pmdlab.geometry import L1

try:
    import cvxpy as cp
except ImportError:  # pragma: no cover
    cp = None


def qp_project(v):
    """Euclidean projection onto the simplex as a generic QP."""
    x = cp.Variable(len(v))
    cp.Problem(cp.Minimize(cp.sum_squares(x - v)), [x >= 0, cp.sum(x) == 1]).solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return x.value


def brute_dual(mu, norm, z):
    """sup <u, z> over |u|_{L2(mu), o} <= 1, by convex maximization in cvxpy."""
    S, A = z.shape
    u = cp.Variable((S, A))
    per = [cp.norm(u[s], 1 if norm is L1 else 2) for s in range(S)]
    cons = [cp.sum(cp.hstack([mu[s] * cp.square(per[s]) for s in range(S)])) <= 1]
    prob = cp.Problem(cp.Maximize(cp.sum(cp.multiply(u, z))), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def finite_difference(f, x, d, h=1e-6):
    """Central difference of ``f`` at ``x`` along ``d``."""
    return (f(x + h * d) - f(x - h * d)) / (2 * h)


def worst_vertex(mdp, cls, value):
    """Index of the hull vertex with the largest value."""
    return int(np.argmax([value(mdp, b) for b in cls.bases]))


def random_triple(rng, max_s=6, max_a=6, interior=0.3):
    """Random (MDP, interior policy, arbitrary policy)."""
    S = int(rng.integers(1, max_s + 1))
    A = int(rng.integers(1, max_a + 1))
    mdp = inst.random_mdp(rng, S, A, float(rng.uniform(0.3, 0.95)))
    pi = inst.random_policy(rng, S, A, interior)
    pt = rng.dirichlet(np.ones(A), size=S)
    return mdp, pi, pt
