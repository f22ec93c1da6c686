"""Finite discounted MDPs in the cost convention, evaluated exactly.

All quantities are obtained from dense linear solves against
``I - gamma * P_pi``; nothing here samples trajectories.

Shapes: transitions ``(S, A, S)``, cost ``(S, A)``, policies ``(S, A)``,
values and occupancies ``(S,)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .config import TOL


class MdpError(ValueError):
    """Invalid MDP or policy input; the message names the offending indices."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    transitions: np.ndarray
    cost: np.ndarray
    gamma: float
    rho0: np.ndarray

    def __post_init__(self):
        P = _readonly(self.transitions)
        r = _readonly(self.cost)
        rho0 = _readonly(self.rho0)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "cost", r)
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "gamma", float(self.gamma))
        validate(P, r, self.gamma, rho0)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def horizon(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "rho0": self.rho0.tolist(),
            "cost": self.cost.tolist(),
            "transitions": self.transitions.tolist(),
            "convention": "cost",
        }


def validate(P, r, gamma, rho0, tol=TOL.prob_sum):
    """Raise ``MdpError`` describing the first violated invariant."""
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        raise MdpError(f"transitions must have shape (S, A, S), got {P.shape}")
    S, A, _ = P.shape
    if r.shape != (S, A):
        raise MdpError(f"cost must have shape ({S}, {A}), got {r.shape}")
    if rho0.shape != (S,):
        raise MdpError(f"rho0 must have shape ({S},), got {rho0.shape}")
    if not 0.0 < gamma < 1.0:
        raise MdpError(f"gamma must lie in (0, 1), got {gamma}")
    if not np.all(np.isfinite(P)):
        s, a, t = np.argwhere(~np.isfinite(P))[0]
        raise MdpError(f"transitions[{s}][{a}][{t}] is not finite")
    neg = np.argwhere(P < 0)
    if len(neg):
        s, a, t = neg[0]
        raise MdpError(f"transitions[{s}][{a}][{t}] = {P[s, a, t]} is negative")
    row_err = np.abs(P.sum(axis=2) - 1.0)
    bad = np.argwhere(row_err > tol)
    if len(bad):
        s, a = bad[0]
        raise MdpError(f"transitions[{s}][{a}] sums to {float(P[s, a].sum())!r}, not 1")
    bad = np.argwhere(~((r >= 0) & (r <= 1)))
    if len(bad):
        s, a = bad[0]
        raise MdpError(f"cost[{s}][{a}] = {r[s, a]} outside [0, 1]")
    bad = np.argwhere(rho0 < 0)
    if len(bad):
        raise MdpError(f"rho0[{bad[0][0]}] = {rho0[bad[0][0]]} is negative")
    if abs(rho0.sum() - 1.0) > tol:
        raise MdpError(f"rho0 sums to {float(rho0.sum())!r}, not 1")


def from_dict(data: dict) -> Mdp:
    """Build an ``Mdp`` from the JSON schema; ``convention: reward`` maps r -> 1 - r."""
    for key in ("n_states", "n_actions", "gamma", "rho0", "cost", "transitions"):
        if key not in data:
            raise MdpError(f"missing field {key!r}")
    convention = data.get("convention", "cost")
    if convention not in ("cost", "reward"):
        raise MdpError(f"convention must be 'cost' or 'reward', got {convention!r}")
    try:
        P = np.asarray(data["transitions"], dtype=float)
        r = np.asarray(data["cost"], dtype=float)
        rho0 = np.asarray(data["rho0"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MdpError(f"non-numeric or ragged array: {exc}") from None
    S, A = int(data["n_states"]), int(data["n_actions"])
    if P.shape != (S, A, S):
        raise MdpError(f"transitions shape {P.shape} does not match n_states={S}, n_actions={A}")
    if convention == "reward":
        r = 1.0 - r
    return Mdp(P, r, float(data["gamma"]), rho0)


def load_mdp(path) -> Mdp:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MdpError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(data)


def save_mdp(mdp: Mdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()))


def check_policy(mdp: Mdp, pi, tol=TOL.prob_sum) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise MdpError(f"policy shape {pi.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})")
    bad = np.argwhere(pi < -tol)
    if len(bad):
        s, a = bad[0]
        raise MdpError(f"policy[{s}][{a}] = {pi[s, a]} is negative")
    err = np.abs(pi.sum(axis=1) - 1.0)
    if np.any(err > tol):
        s = int(np.argmax(err))
        raise MdpError(f"policy row {s} sums to {float(pi[s].sum())!r}, not 1")
    return pi


def _check_start(mdp, start):
    if start is None:
        return mdp.rho0
    start = np.asarray(start, dtype=float)
    if start.shape != (mdp.n_states,):
        raise MdpError(f"start distribution shape {start.shape} != ({mdp.n_states},)")
    return start


def policy_matrices(mdp: Mdp, pi):
    """Policy-averaged transition matrix ``P_pi[s, s']`` and cost ``r_pi[s]``."""
    P_pi = np.einsum("sa,sat->st", pi, mdp.transitions)
    r_pi = np.einsum("sa,sa->s", pi, mdp.cost)
    return P_pi, r_pi


def _factor(mdp, pi):
    P_pi, r_pi = policy_matrices(mdp, pi)
    M = np.eye(mdp.n_states) - mdp.gamma * P_pi
    return M, sla.lu_factor(M), r_pi


def evaluate_value(mdp: Mdp, pi) -> np.ndarray:
    pi = check_policy(mdp, pi)
    M, lu, r_pi = _factor(mdp, pi)
    v = sla.lu_solve(lu, r_pi)
    resid = np.max(np.abs(M @ v - r_pi))
    assert resid <= 1e-10 * mdp.n_states * max(1.0, mdp.horizon), resid
    return v


def evaluate_q(mdp: Mdp, pi, v=None) -> np.ndarray:
    if v is None:
        v = evaluate_value(mdp, pi)
    return mdp.cost + mdp.gamma * mdp.transitions @ v


def value(mdp: Mdp, pi, start=None) -> float:
    """Scalar objective ``V_rho(pi)``; ``rho0`` by default."""
    return float(_check_start(mdp, start) @ evaluate_value(mdp, pi))


def occupancy(mdp: Mdp, pi, start=None) -> np.ndarray:
    """Normalized discounted state occupancy ``(1 - gamma) start^T (I - gamma P_pi)^{-1}``."""
    pi = check_policy(mdp, pi)
    start = _check_start(mdp, start)
    _, lu, _ = _factor(mdp, pi)
    mu = (1.0 - mdp.gamma) * sla.lu_solve(lu, start, trans=1)
    return mu


def occupancy_from_rows(mdp: Mdp, pi, starts) -> np.ndarray:
    """Occupancies for a batch of start distributions (one per row of ``starts``)."""
    pi = check_policy(mdp, pi)
    _, lu, _ = _factor(mdp, pi)
    starts = np.atleast_2d(starts)
    return (1.0 - mdp.gamma) * sla.lu_solve(lu, starts.T, trans=1).T


def policy_gradient(mdp: Mdp, pi, start=None) -> np.ndarray:
    """``grad V_rho(pi)[s, a] = H * mu_rho(s) * Q[s, a]`` in the direct parametrization."""
    mu = occupancy(mdp, pi, start)
    return mdp.horizon * mu[:, None] * evaluate_q(mdp, pi)


def value_difference(mdp: Mdp, pi, pi_tilde, start=None) -> float:
    """``H * E_{s ~ mu^pi} <Q^{pi~}_s, pi~_s - pi_s>``, which equals ``V(pi~) - V(pi)``."""
    pi_tilde = check_policy(mdp, pi_tilde)
    mu = occupancy(mdp, pi, start)
    q_t = evaluate_q(mdp, pi_tilde)
    return float(mdp.horizon * mu @ np.einsum("sa,sa->s", q_t, pi_tilde - pi))


def q_difference_identity(mdp: Mdp, pi, pi_tilde) -> float:
    """Max over (s, a) of the residual in the Q-difference identity.

    ``Q^{pi~}_{s,a} - Q^pi_{s,a} = gamma H E_{s' ~ mu^pi_{P_{s,a}}} <Q^{pi~}_{s'}, pi~_{s'} - pi_{s'}>``
    """
    pi = check_policy(mdp, pi)
    pi_tilde = check_policy(mdp, pi_tilde)
    S, A = pi.shape
    q = evaluate_q(mdp, pi)
    q_t = evaluate_q(mdp, pi_tilde)
    adv = np.einsum("sa,sa->s", q_t, pi_tilde - pi)
    mus = occupancy_from_rows(mdp, pi, mdp.transitions.reshape(S * A, S))
    rhs = (mdp.gamma * mdp.horizon * mus @ adv).reshape(S, A)
    return float(np.max(np.abs((q_t - q) - rhs)))


def greedy_policy(q) -> np.ndarray:
    """Deterministic argmin policy; ties go to the lowest action index."""
    q = np.asarray(q)
    pi = np.zeros_like(q, dtype=float)
    pi[np.arange(q.shape[0]), np.argmin(q, axis=1)] = 1.0
    return pi


def optimal_policy(mdp: Mdp, max_iter: int = 10_000):
    """Policy iteration over the complete class; returns ``(pi_star, v_star)``."""
    pi = greedy_policy(mdp.cost)
    for _ in range(max_iter):
        v = evaluate_value(mdp, pi)
        q = evaluate_q(mdp, pi, v)
        # keep the incumbent action unless another is strictly better
        cur = np.einsum("sa,sa->s", q, pi)
        improve = q.min(axis=1) < cur - 1e-12 * max(1.0, mdp.horizon)
        if not improve.any():
            return pi, v
        new = pi.copy()
        new[improve] = greedy_policy(q[improve])
        pi = new
    raise RuntimeError("policy iteration did not terminate")
