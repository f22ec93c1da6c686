"""Variational gradient dominance: estimation, epsilon-greedy degradation and closure audits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import mdp as mdp_core
from ..geometry import L2, Regularizer, state_action_product, weighted_norm
from ..policy_classes import ClassError, Complete, linear_min_oracle, unwrap, wrap_eps
from ..search import best_in_class
from .reports import LemmaReport


def advantage(mdp, cls, pi, grad=None) -> float:
    """``max_{pi~ in cls} <grad V(pi), pi - pi~>``."""
    grad = mdp_core.policy_gradient(mdp, pi) if grad is None else grad
    _, vmin = linear_min_oracle(cls, grad)
    return float(np.sum(grad * pi)) - vmin


@dataclass
class VgdEstimate:
    policies: list
    gaps: np.ndarray
    advantages: np.ndarray
    v_star: float
    v_star_mode: str
    best_value: float
    best_coords: np.ndarray
    extra: dict = field(default_factory=dict)

    def eps_vgd(self, C: float) -> float:
        """``max_i gap_i - C adv_i`` over the sample."""
        return float(np.max(self.gaps - C * self.advantages))

    def curve(self, Cs):
        return [(float(C), self.eps_vgd(C)) for C in Cs]

    def c_for_zero(self, tol=1e-9) -> float:
        """Smallest ``C`` with ``eps_vgd(C) <= tol``; ``inf`` if some sample has no advantage."""
        pos = self.gaps > tol
        if np.any(pos & (self.advantages <= 0)):
            return math.inf
        if not np.any(pos):
            return 0.0
        return float(np.max((self.gaps[pos] - tol) / self.advantages[pos]))

    @property
    def missed_minimizer(self) -> bool:
        return bool(np.min(self.gaps) < -1e-9)

    def residual(self, mdp, cls, pi, C) -> float:
        """``V(pi) - v_star - C adv(pi)`` at a single policy."""
        return mdp_core.value(mdp, pi) - self.v_star - C * advantage(mdp, cls, pi)


def _samples(cls, rng, n):
    out = [cls.random_member(rng) for _ in range(n)]
    try:
        verts = cls.vertices(cap=256)
    except ClassError:
        verts = []
    return out + [np.array(v) for v in verts]


def estimate_vgd(mdp, cls, n_samples=100, v_star_mode="in_class", rng=None, best=None) -> VgdEstimate:
    """Sample class members, then record their gaps and first-order advantages."""
    if not getattr(cls, "is_convex", False):
        raise ClassError("VGD estimation needs a convex class")
    if v_star_mode not in ("in_class", "global"):
        raise ValueError("v_star_mode must be 'in_class' or 'global'")
    rng = np.random.default_rng(0) if rng is None else rng
    best = best_in_class(mdp, cls, rng) if best is None else best
    pols = _samples(cls, rng, n_samples) + [best.policy]
    values = np.array([mdp_core.value(mdp, p) for p in pols])
    best_value = min(best.value, float(values.min()))
    if v_star_mode == "in_class":
        v_star = best_value
    else:
        _, v = mdp_core.optimal_policy(mdp)
        v_star = float(mdp.rho0 @ v)
    adv = np.array([advantage(mdp, cls, p) for p in pols])
    return VgdEstimate(pols, values - v_star, adv, v_star, v_star_mode, best_value, best.coords)


def check_complete_vgd(mdp, pi, tol=1e-8) -> LemmaReport:
    """Complete class: ``V(pi) - V* <= H nu0 adv(pi)`` with ``nu0 = |mu*/rho0|_inf``."""
    pi_star, v = mdp_core.optimal_policy(mdp)
    mu_star = mdp_core.occupancy(mdp, pi_star)
    if np.any((mdp.rho0 <= 0) & (mu_star > 0)):
        nu0 = math.inf
    else:
        on = mdp.rho0 > 0
        nu0 = float(np.max(mu_star[on] / mdp.rho0[on]))
    cls = Complete(mdp.n_states, mdp.n_actions)
    lhs = mdp_core.value(mdp, pi) - float(mdp.rho0 @ v)
    rhs = mdp.horizon * nu0 * advantage(mdp, cls, pi)
    return LemmaReport("complete_vgd", f"S={mdp.n_states} A={mdp.n_actions}", lhs, rhs, tol,
                       {"nu0": nu0})


def check_epsgreedy_vgd(mdp, cls, eps_expl, vgd: VgdEstimate, C_star=None, n_samples=20,
                        rng=None, wrapped_best=None, tol=1e-8):
    """Exploration degrades VGD by at most ``12 eps C H^2 A``.

    For each sampled member ``pi`` of ``cls`` the check uses
    ``eps_vgd = max(curve value at C_star, residual at pi)`` so that the VGD
    hypothesis is exactly true at the policy the argument is applied to.
    Returns the list of per-sample reports.
    """
    if vgd.v_star_mode != "in_class":
        raise ValueError("the degradation bound is stated against the in-class optimum")
    rng = np.random.default_rng(1) if rng is None else rng
    if C_star is None:
        c0 = vgd.c_for_zero()
        C_star = max(1.0, c0) if math.isfinite(c0) else 1.0
    base_eps = max(0.0, vgd.eps_vgd(C_star))
    wrapped = wrap_eps(cls, eps_expl)
    if wrapped_best is None:
        wrapped_best = best_in_class(mdp, wrapped, rng).value
    H, A = mdp.horizon, mdp.n_actions
    members = [cls.random_member(rng) for _ in range(n_samples)]
    v_wrapped = [mdp_core.value(mdp, wrapped.wrap(p) if eps_expl else p) for p in members]
    v_star_eps = min([wrapped_best] + v_wrapped)
    reports = []
    for pi, v_eps in zip(members, v_wrapped):
        eps_vgd = max(base_eps, vgd.residual(mdp, cls, pi, C_star))
        pi_eps = wrapped.wrap(pi) if eps_expl else pi
        lhs = v_eps - v_star_eps - eps_vgd - 12 * eps_expl * C_star * H**2 * A
        rhs = C_star * advantage(mdp, wrapped, pi_eps)
        reports.append(LemmaReport("epsgreedy_vgd", f"eps={eps_expl:g} C={C_star:.3g}", lhs, rhs,
                                   tol, {"eps_vgd": eps_vgd}))
    return reports


@dataclass
class ClosureReport:
    policy: np.ndarray
    eta: float
    regularizer: str
    in_class_update: np.ndarray
    complete_update: np.ndarray
    closure_error: float
    concentrability: float
    eps_approx: float
    eps_greedy: float
    nu_star: float
    advantage: float
    lhs: float
    rhs: float
    asserted: bool

    @property
    def slack(self):
        return self.rhs - self.lhs

    def report(self, tol=1e-8) -> LemmaReport:
        return LemmaReport("closure_vgd", f"eta={self.eta:g} reg={self.regularizer}",
                           self.lhs, self.rhs, tol,
                           {"C_v": self.concentrability, "eps_approx": self.eps_approx,
                            "eps_greedy": self.eps_greedy, "nu_star": self.nu_star,
                            "closure_error": self.closure_error, "asserted": self.asserted})


def _concentrability(v, pairs):
    worst = 0.0
    for m in pairs:
        m = np.ravel(m)
        if np.any((v <= 0) & (m > 0)):
            return math.inf
        on = v > 0
        worst = max(worst, float(np.sum(m[on] ** 2 / v[on])))
    return worst


def closure_audit(mdp, cls, pi, eta, reg: Regularizer, q_hat=None, v_sampling=None,
                  coords=None, inner_tol=1e-12) -> ClosureReport:
    """Measure closure quantities at ``pi`` and evaluate the closure-implies-VGD bound.

    ``pi+`` is the in-class PMD step from ``pi`` under ``q_hat`` with the given
    step size and regularizer.  ``v_sampling`` defaults to ``mu^pi o pi``.
    """
    from ..pmd import pmd_subproblem

    pi = mdp_core.check_policy(mdp, pi)
    H = mdp.horizon
    q = mdp_core.evaluate_q(mdp, pi)
    q_hat = q if q_hat is None else np.asarray(q_hat, dtype=float)
    mu = mdp_core.occupancy(mdp, pi)
    v = (state_action_product(mu, pi) if v_sampling is None else np.asarray(v_sampling)).ravel()
    plus = pmd_subproblem(mdp, cls, pi, q_hat, eta, reg, inner_tol, coords=coords, mu=mu)
    inner, eps = unwrap(cls)
    complete = wrap_eps(Complete(mdp.n_states, mdp.n_actions), eps)
    full = pmd_subproblem(mdp, complete, pi, q_hat, eta, reg, inner_tol, mu=mu)
    pi_plus = plus.policy
    eps_greedy = max(0.0, float(mu @ np.einsum("sa,sa->s", q_hat, pi_plus)
                                - mu @ q_hat.min(axis=1)))
    eps_approx = float(v @ ((q_hat - q) ** 2).ravel())
    pi_star, v_opt = mdp_core.optimal_policy(mdp)
    mu_star = mdp_core.occupancy(mdp, pi_star)
    if np.any((mu <= 0) & (mu_star > 0)):
        nu_star = math.inf
    else:
        on = mu > 0
        nu_star = float(np.max(mu_star[on] / mu[on]))
    pairs = [state_action_product(m, p) for m in (mu, mu_star) for p in (pi, pi_plus, pi_star)]
    c_v = _concentrability(v, pairs)
    adv = advantage(mdp, cls, pi)
    lhs = mdp_core.value(mdp, pi) - float(mdp.rho0 @ v_opt)
    asserted = math.isfinite(nu_star) and math.isfinite(c_v)
    if asserted:
        rhs = nu_star * adv + H * nu_star * (eps_greedy + 4 * math.sqrt(c_v * eps_approx))
    else:
        rhs = math.inf
    return ClosureReport(pi, eta, reg.kind, pi_plus, full.policy,
                         weighted_norm(mu, L2, pi_plus - full.policy), c_v, eps_approx,
                         eps_greedy, nu_star, adv, lhs, rhs, asserted)
