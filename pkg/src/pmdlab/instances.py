"""Built-in instances: the three-state convex-landscape MDP, the two-state
smoothness example and a seeded random generator."""
from __future__ import annotations

import numpy as np

from .mdp import Mdp
from .policy_classes import ConvexHull, LogLinear

U, B = 0, 1


def fig1(gamma: float = 0.99, p: float = 0.01) -> Mdp:
    """Three states; S0 branches to S1 (u) or S2 (b), both return to S0.

    Cost 1 is paid for u in S1 and for b in S2, so a constant policy
    ``alpha = pi(u)`` pays ``alpha`` at S1 and ``1 - alpha`` at S2.
    """
    P = np.zeros((3, 2, 3))
    P[0, U, 1] = P[0, B, 2] = 1.0
    P[1, :, 0] = P[2, :, 0] = 1.0
    cost = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rho0 = np.array([1 - p, p / 2, p / 2])
    return Mdp(P, cost, gamma, rho0)


def constant_policy(alpha, n_states: int = 3) -> np.ndarray:
    return np.tile([alpha, 1 - alpha], (n_states, 1)).astype(float)


def fig1_hull() -> ConvexHull:
    """Hull of "always u" and "always b"; coordinates ``(alpha, 1 - alpha)``."""
    return ConvexHull(np.stack([constant_policy(1.0), constant_policy(0.0)]))


def fig1_loglinear(theta=(0.0, 0.0)) -> LogLinear:
    """Features e1 for u and e2 for b at every state, so alpha = sigmoid(theta1 - theta2)."""
    phi = np.zeros((3, 2, 2))
    phi[:, U, 0] = 1.0
    phi[:, B, 1] = 1.0
    return LogLinear(phi, np.asarray(theta, dtype=float))


class Fig1ClosedForm:
    """Closed-form quantities of the three-state instance under a constant policy."""

    def __init__(self, gamma=0.99, p=0.01):
        self.gamma, self.p = gamma, p
        self.H = 1 / (1 - gamma)
        self.Ht = gamma / ((1 - gamma) * (1 + gamma))

    def v0(self, a):
        return self.Ht * (a**2 + (1 - a) ** 2)

    def values(self, a):
        v0 = self.v0(a)
        return np.array([v0, a + self.gamma * v0, (1 - a) + self.gamma * v0])

    def value(self, a):
        g, p = self.gamma, self.p
        return (1 - p + g * p) * self.v0(a) + p / 2

    def dvalue(self, a):
        g, p = self.gamma, self.p
        return (1 - p + g * p) * self.Ht * (4 * a - 2)

    def q(self, a):
        g = self.gamma
        v0, v1, v2 = self.values(a)
        return np.array([[g * v1, g * v2], [1 + g * v0, g * v0], [g * v0, 1 + g * v0]])

    def mu0(self):
        g, H = self.gamma, self.H
        return (1 - self.p + g * H) / ((1 + g) * H)

    def occupancy(self, a):
        g, p = self.gamma, self.p
        m0 = self.mu0()
        return np.array([m0, (1 - g) * p / 2 + g * a * m0, (1 - g) * p / 2 + g * (1 - a) * m0])


def fig2(eps: float, p: float, gamma: float = 0.9):
    """Two-state deterministic MDP started at S0, with the policy pair used to
    probe tightness of the smoothness bound.

    a0 stays at S0 / moves S1 -> S0; a1 moves S0 -> S1 / stays at S1.  Cost of
    action i is i.  Returns ``(mdp, pi, pi_tilde)``.
    """
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[0, 1, 1] = 1.0
    P[1, 0, 0] = P[1, 1, 1] = 1.0
    cost = np.array([[0.0, 1.0], [0.0, 1.0]])
    mdp = Mdp(P, cost, gamma, np.array([1.0, 0.0]))
    pi = np.array([[1 - eps, eps], [1.0, 0.0]])
    pi_tilde = np.array([[1 - p, p], [0.0, 1.0]])
    return mdp, pi, pi_tilde


def random_policy(rng, S, A, interior=0.5):
    """Mixture of a Dirichlet draw and uniform; ``interior`` is the uniform weight."""
    return (1 - interior) * rng.dirichlet(np.ones(A), size=S) + interior / A


def random_mdp(rng, S, A, gamma) -> Mdp:
    P = rng.uniform(size=(S, A, S))
    P /= P.sum(axis=2, keepdims=True)
    cost = rng.uniform(size=(S, A))
    rho0 = rng.uniform(0.1, 1.0, size=S)
    return Mdp(P, cost, gamma, rho0 / rho0.sum())


def generate_random_instance(n_states=4, n_actions=3, n_bases=3, seed=0, gamma=0.8,
                             interior=0.5):
    """Seeded random MDP and hull class with interior bases."""
    for name, v, cap in (("n_states", n_states, 64), ("n_actions", n_actions, 16),
                         ("n_bases", n_bases, 64)):
        if not 1 <= v <= cap:
            raise ValueError(f"{name}={v} outside [1, {cap}]")
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, n_states, n_actions, gamma)
    bases = np.stack([random_policy(rng, n_states, n_actions, interior) for _ in range(n_bases)])
    return mdp, ConvexHull(bases)
