"""Pointwise checks of smoothness, occupancy, softmax and mirror-step lemmas."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .. import mdp as mdp_core
from ..geometry import L1, L2, Regularizer, mirror_step, weighted_norm
from .reports import LemmaReport


def linearization_error(mdp, pi, pi_tilde) -> float:
    """``|V(pi~) - V(pi) - <grad V(pi), pi~ - pi>|``."""
    grad = mdp_core.policy_gradient(mdp, pi)
    return abs(mdp_core.value(mdp, pi_tilde) - mdp_core.value(mdp, pi)
               - float(np.sum(grad * (pi_tilde - pi))))


def check_local_smoothness(mdp, pi, pi_tilde, tol=1e-8):
    """Linearization error against ``H^3/sqrt(eps)`` (l1) and ``A H^3/sqrt(eps)`` (l2) local bounds."""
    pi = mdp_core.check_policy(mdp, pi)
    pi_tilde = mdp_core.check_policy(mdp, pi_tilde)
    eps = float(pi.min())
    if eps <= 0:
        raise ValueError("policy has a zero action probability; the bound is vacuous")
    H = mdp.horizon
    mu = mdp_core.occupancy(mdp, pi)
    d = pi_tilde - pi
    lhs = linearization_error(mdp, pi, pi_tilde)
    c = H**3 / math.sqrt(eps)
    n1 = weighted_norm(mu, L1, d) ** 2
    n2 = weighted_norm(mu, L2, d) ** 2
    tag = f"S={mdp.n_states} A={mdp.n_actions} eps={eps:.3g}"
    return (LemmaReport("local_smoothness_l1", tag, lhs, c * n1, tol, {"norm_sq": n1}),
            LemmaReport("local_smoothness_l2", tag, lhs, mdp.n_actions * c * n2, tol,
                        {"norm_sq": n2}))


def check_occupancy_l1(mdp, pi, pi_tilde, tol=1e-9):
    """``|mu~ - mu|_1 <= gamma H |pi~ - pi|_{L1(mu), 1}``."""
    mu = mdp_core.occupancy(mdp, pi)
    mu_t = mdp_core.occupancy(mdp, pi_tilde)
    lhs = float(np.abs(mu_t - mu).sum())
    rhs = mdp.gamma * mdp.horizon * weighted_norm(mu, L1, np.asarray(pi_tilde) - pi, 1)
    return LemmaReport("occupancy_l1", f"S={mdp.n_states} A={mdp.n_actions}", lhs, rhs, tol,
                       {"rhs_with_H": rhs / mdp.gamma})


def softmin(x, tau) -> float:
    """``sum e^{-tau x_i} x_i / sum e^{-tau x_i}`` with a log-sum-exp shift."""
    x = np.asarray(x, dtype=float)
    logits = -tau * x
    w = np.exp(logits - logsumexp(logits))
    return float(w @ x)


def check_softmax_approx(x, delta, tol=1e-12):
    """Soft-min at ``tau = log(d)/delta`` is within ``delta`` of the min."""
    x = np.asarray(x, dtype=float)
    d = x.size
    if delta <= 0 or d < 2:
        raise ValueError("need delta > 0 and at least two entries")
    tau = math.log(d) / delta
    gap = softmin(x, tau) - float(x.min())
    return LemmaReport("softmax_approx", f"d={d} delta={delta:g}", gap, delta, tol, {"tau": tau})


EUCLIDEAN_BREGMAN_BOUND = 2.0


def check_omd_to_greedy(reg: Regularizer, g, x, epsilon, bound=None, tol=1e-10):
    """One mirror step with ``eta = B/epsilon`` lands within ``epsilon`` of ``min_a g_a``."""
    if reg.kind != "euclidean":
        raise ValueError("the Bregman divergence of this regularizer is unbounded on the simplex")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    B = EUCLIDEAN_BREGMAN_BOUND if bound is None else bound
    g = np.asarray(g, dtype=float)
    eta = B / epsilon
    x_plus = mirror_step(reg, x, g, eta)
    lhs = float(g @ x_plus)
    return LemmaReport("omd_to_greedy", f"A={g.size} eps={epsilon:g}", lhs,
                       float(g.min()) + epsilon, tol, {"eta": eta})


def check_negent_smooth(p, q, eps_floor, tol=1e-12):
    """``|grad h(p) - grad h(q)|_inf <= |p - q|_1 / eps`` on the floored simplex."""
    reg = Regularizer("negentropy", eps_floor)
    lhs = float(np.abs(reg.grad(p) - reg.grad(q)).max())
    rhs = float(np.abs(np.asarray(p) - q).sum()) / eps_floor
    return LemmaReport("negent_smooth", f"A={len(p)} floor={eps_floor:g}", lhs, rhs, tol)


def check_pinsker(u, v, tol=1e-12):
    """``KL(u || v) >= |u - v|_1^2 / 2``."""
    reg = Regularizer("negentropy")
    lhs = 0.5 * float(np.abs(np.asarray(u) - v).sum()) ** 2
    return LemmaReport("pinsker", f"A={len(u)}", lhs, float(reg.bregman(u, v)), tol)
