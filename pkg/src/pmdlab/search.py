"""Best-in-class value search over convex policy classes.

Values are non-convex in hull coordinates in general, so the result is an
upper bound on the true best-in-class value (exact for the complete class).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import mdp as mdp_core
from .geometry import simplex_project
from .policy_classes import ClassError, Complete, ConvexHull, unwrap


@dataclass
class BestInClass:
    value: float
    coords: np.ndarray
    policy: np.ndarray
    method: str


def _lambda_grid(m, res):
    for c in itertools.product(range(res + 1), repeat=m - 1):
        if sum(c) <= res:
            yield np.array(list(c) + [res - sum(c)], dtype=float) / res


def _local_search(mdp, cls, vert_flat, lam, max_iter=200):
    """Projected gradient with Armijo backtracking on hull coordinates."""
    f = mdp_core.value(mdp, cls.materialize(lam))
    t = 1.0
    for _ in range(max_iter):
        pi = cls.materialize(lam)
        g = vert_flat @ mdp_core.policy_gradient(mdp, pi).ravel()
        while True:
            cand = simplex_project(lam - t * g)
            step = cand - lam
            if np.abs(step).max() < 1e-14:
                return lam, f
            fc = mdp_core.value(mdp, cls.materialize(cand))
            if fc <= f + 1e-4 * (g @ step):
                break
            t *= 0.5
            if t < 1e-14:
                return lam, f
        lam, f = cand, fc
        t = min(t * 2.0, 1e6)
    return lam, f


def complete_best(mdp, eps=0.0):
    """Policy iteration over the (possibly epsilon-greedy) complete class."""
    if eps == 0:
        pi, v = mdp_core.optimal_policy(mdp)
        return BestInClass(float(mdp.rho0 @ v), pi, pi, "policy-iteration")
    A = mdp.n_actions
    inner = mdp_core.greedy_policy(mdp.cost)
    for _ in range(10_000):
        pi = (1 - eps) * inner + eps / A
        q = mdp_core.evaluate_q(mdp, pi)
        cur = np.einsum("sa,sa->s", q, inner)
        improve = q.min(axis=1) < cur - 1e-12 * mdp.horizon
        if not improve.any():
            return BestInClass(mdp_core.value(mdp, pi), inner, pi, "policy-iteration")
        inner = inner.copy()
        inner[improve] = mdp_core.greedy_policy(q[improve])
    raise RuntimeError("policy iteration did not terminate")


def best_in_class(mdp, cls, rng=None, n_starts=20, grid=50) -> BestInClass:
    """Vertices, a 1/grid coordinate grid when there are at most three bases,
    then projected local search from the best point found (plus random
    restarts when there are more than three bases)."""
    inner, eps = unwrap(cls)
    if isinstance(inner, Complete):
        return complete_best(mdp, eps)
    if not isinstance(inner, ConvexHull):
        raise ClassError("best-in-class search needs a convex class")
    rng = np.random.default_rng(0) if rng is None else rng
    m = inner.m
    verts = cls.vertices()
    flat = verts.reshape(m, -1)
    cands = [np.eye(m)[i] for i in range(m)]
    if 1 < m <= 3:
        cands += list(_lambda_grid(m, grid))
    vals = [mdp_core.value(mdp, cls.materialize(c)) for c in cands]
    i = int(np.argmin(vals))
    best_lam, best_f = cands[i], vals[i]
    starts = [best_lam]
    if m > 3:
        starts += [rng.dirichlet(np.ones(m)) for _ in range(n_starts - 1)]
    if m > 1:
        for lam0 in starts:
            lam, f = _local_search(mdp, cls, flat, lam0)
            if f < best_f:
                best_lam, best_f = lam, f
    return BestInClass(float(best_f), best_lam, cls.materialize(best_lam), "search")
