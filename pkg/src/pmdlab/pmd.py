"""On-policy policy mirror descent over convex policy classes.

Each iteration evaluates the occupancy and a (possibly perturbed) Q-function
of the current policy and solves

    min_{pi in class}  E_{s~mu^k} [ H <Q_hat_s, pi_s> + B_R(pi_s, pi^k_s) / eta ].

With ``g = H mu o Q_hat`` and ``R_mu = E_mu R`` this is exactly a Bregman prox
step for the value function in the occupancy-weighted local geometry, so hull
classes reuse :func:`pmdlab.prox.prox_step`.  The complete class is solved
state by state.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mdp as mdp_core
from .geometry import (ActionNorm, Regularizer, mirror_step, simplex_project,
                       state_action_product, state_regularizer_bregman,
                       state_regularizer_grad, weighted_dual_norm, weighted_norm)
from .policy_classes import (ClassError, Complete, ConvexHull, linear_min_oracle, unwrap,
                             wrap_eps)
from .prox import HullSet, Objective, ProxCertificate, gradient_mapping, hull_minimize, prox_step

log = logging.getLogger(__name__)

EPS_EXPL_CLIP = 0.99


# ---------------------------------------------------------------------------
# local geometry


class OccupancyFrame:
    """``|.|_{L2(mu), o}`` with ``R_mu(pi) = E_{s~mu} R(pi_s)``."""

    def __init__(self, mu, reg: Regularizer):
        self.mu = np.asarray(mu, dtype=float)
        self.reg = reg
        self.action_norm = reg.paired_norm
        self.L = reg.lipschitz
        self.quadratic = reg.quadratic

    def norm(self, u):
        return weighted_norm(self.mu, self.action_norm, u, 2)

    def dual_norm(self, z):
        return weighted_dual_norm(self.mu, self.action_norm, z)

    def reg_grad(self, y):
        return state_regularizer_grad(self.mu, self.reg, y)

    def bregman(self, u, v):
        return state_regularizer_bregman(self.mu, self.reg, u, v)


class OccupancyGeometry:
    def __init__(self, mdp, reg: Regularizer):
        self.mdp = mdp
        self.reg = reg

    def at(self, pi):
        return OccupancyFrame(mdp_core.occupancy(self.mdp, pi), self.reg)


class ValueObjective(Objective):
    """``V_rho`` as a function of the policy table.

    With ``q_hat`` set, the algorithm sees ``H mu o q_hat`` instead of the
    true gradient and ``eps_grad`` is the exact local dual-norm error.
    """

    def __init__(self, mdp, q_hat=None):
        self.mdp = mdp
        self.q_hat = None if q_hat is None else np.asarray(q_hat, dtype=float)

    def value(self, x):
        return mdp_core.value(self.mdp, x)

    def grad(self, x):
        return mdp_core.policy_gradient(self.mdp, x)

    def grad_hat(self, x):
        if self.q_hat is None:
            return self.grad(x)
        mu = mdp_core.occupancy(self.mdp, x)
        return self.mdp.horizon * state_action_product(mu, self.q_hat)

    def eps_grad(self, x, frame):
        if self.q_hat is None:
            return 0.0
        return frame.dual_norm(self.grad_hat(x) - self.grad(x))


# ---------------------------------------------------------------------------
# critic


def critic(mdp, pi, eps_crit: float = 0.0, seed=0, mu=None, q=None):
    """Q-function estimate with weighted squared error exactly ``eps_crit``.

    A seeded Gaussian direction is rescaled so that
    ``E_{s~mu^pi} |Q_hat_s - Q_s|_2^2 = eps_crit``.  Returns ``(q_hat, realized)``.
    """
    if eps_crit < 0:
        raise ValueError("eps_crit must be nonnegative")
    q = mdp_core.evaluate_q(mdp, pi) if q is None else q
    if eps_crit == 0:
        return q.copy(), 0.0
    mu = mdp_core.occupancy(mdp, pi) if mu is None else mu
    z = np.random.default_rng(seed).standard_normal(q.shape)
    z *= math.sqrt(eps_crit / float(mu @ (z * z).sum(axis=1)))
    q_hat = q + z
    return q_hat, float(mu @ ((q_hat - q) ** 2).sum(axis=1))


# ---------------------------------------------------------------------------
# the per-iteration subproblem


@dataclass
class SubproblemResult:
    policy: np.ndarray
    coords: np.ndarray
    cert: ProxCertificate


def _complete_certificate(mu, g, pi_k, pi_next, eta, reg, eps):
    """``max_{pi in class} <grad phi(pi_next), pi_next - pi>`` for the (wrapped) complete class."""
    on = mu > 0
    d = g[on] + (reg.grad(pi_next[on]) - reg.grad(pi_k[on])) / eta
    # best wrapped vertex per state: (1 - eps) e_a + eps u
    best = (1 - eps) * d.min(axis=1) + eps * d.mean(axis=1)
    gaps = np.einsum("sa,sa->s", d, pi_next[on]) - best
    return float(mu[on] @ np.maximum(gaps, 0.0))


def _complete_step(mu, pi_k, q_hat, H, eta, reg, eps, inner_tol):
    A = pi_k.shape[1]
    u = 1.0 / A
    on = mu > 0
    g = H * q_hat
    inner = (pi_k - eps * u) / (1 - eps)
    out = inner.copy()
    converged = True
    if reg.kind == "euclidean":
        out[on] = simplex_project(inner[on] - eta * g[on] / (1 - eps))
    elif eps == 0:
        out[on] = mirror_step(reg, pi_k[on], g[on], eta)
    else:
        hull = HullSet((1 - eps) * np.eye(A) + eps * u)
        for s in np.flatnonzero(on):
            rs = reg.grad(pi_k[s])

            def grad_fn(y, s=s, rs=rs):
                return g[s] + (reg.grad(y) - rs) / eta

            lam0 = np.clip(inner[s], 0, None)
            res = hull_minimize(grad_fn, hull, lam0 / lam0.sum(), inner_tol)
            converged &= res.converged
            out[s] = res.lam
    pi_next = (1 - eps) * out + eps * u
    return out, pi_next, converged


def hull_coordinates(cls, pi, tol=1e-9):
    """Hull coordinates of a class member (Euclidean projection onto the hull)."""
    hull = HullSet(cls.vertices())
    target = np.asarray(pi, dtype=float)
    res = hull_minimize(lambda y: y - target, hull, np.full(hull.m, 1.0 / hull.m),
                        1e-14, quadratic=True)
    if np.abs(hull.point(res.lam) - target).max() > tol:
        raise ClassError("policy is not a member of the class")
    return res.lam


def pmd_subproblem(mdp, cls, pi_k, q_hat, eta, reg: Regularizer, inner_tol, coords=None,
                   mu=None) -> SubproblemResult:
    """One PMD step over ``cls`` (already epsilon-wrapped if exploration is on).

    ``coords`` are the hull coordinates of ``pi_k`` for hull classes; they are
    recovered by projection when omitted.  The certificate's ``eps_opt`` is the
    actor error: the worst first-order violation over the class vertices.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    inner, eps = unwrap(cls)
    pi_k = np.asarray(pi_k, dtype=float)
    mu = mdp_core.occupancy(mdp, pi_k) if mu is None else mu
    frame = OccupancyFrame(mu, reg)
    objective = ValueObjective(mdp, q_hat)
    if isinstance(inner, Complete):
        g = mdp.horizon * np.asarray(q_hat, dtype=float)
        new_coords, pi_next, converged = _complete_step(mu, pi_k, g / mdp.horizon, mdp.horizon,
                                                        eta, reg, eps, inner_tol)
        eps_act = _complete_certificate(mu, g, pi_k, pi_next, eta, reg, eps)
        if not converged:
            log.warning("per-state entropy step stopped above tolerance %.3g", inner_tol)
        cert = ProxCertificate(eps_opt=eps_act,
                               eps_grad=objective.eps_grad(pi_k, frame),
                               grad_mapping_norm=gradient_mapping(frame, pi_k, pi_next, eta),
                               converged=converged)
        return SubproblemResult(pi_next, new_coords, cert)
    if not isinstance(inner, ConvexHull):
        raise ClassError(f"{type(inner).__name__} is not a convex class; PMD needs a convex class")
    if coords is None:
        coords = hull_coordinates(cls, pi_k)
    hull = HullSet(cls.vertices())
    lam, cert = prox_step(objective, None, hull, coords, eta, inner_tol, frame=frame)
    return SubproblemResult(hull.point(lam), lam, cert)


def linearization_residual(mdp, pi_k, probes, eta, reg: Regularizer, mu=None, q=None) -> float:
    """Check that the PMD objective equals the linearized prox objective up to a constant.

    Evaluates ``E_mu[H <Q_s, pi_s> + B_R(pi_s, pi^k_s)/eta]`` state by state and
    ``<grad V(pi^k), pi> + B_{R_mu}(pi, pi^k)/eta`` in matrix form for each
    probe; returns the largest spread of their difference, relative to scale.
    """
    mu = mdp_core.occupancy(mdp, pi_k) if mu is None else mu
    q = mdp_core.evaluate_q(mdp, pi_k) if q is None else q
    grad = mdp_core.policy_gradient(mdp, pi_k)
    H = mdp.horizon
    diffs, scale = [], 1.0
    for pi in probes:
        lhs = 0.0
        for s in np.flatnonzero(mu > 0):
            lhs += mu[s] * (H * q[s] @ pi[s] + reg.bregman(pi[s], pi_k[s]) / eta)
        rhs = float(np.sum(grad * pi)) + state_regularizer_bregman(mu, reg, pi, pi_k) / eta
        diffs.append(lhs - rhs)
        scale = max(scale, abs(lhs), abs(rhs))
    return (max(diffs) - min(diffs)) / scale


# ---------------------------------------------------------------------------
# constants


def smoothness_constant(cls, mdp, action_norm: ActionNorm) -> float:
    """``beta = 2 * H^3 / sqrt(eps)`` (l1) or ``2 * A H^3 / sqrt(eps)`` (l2).

    ``eps`` is the smallest action probability any class member can have.
    The factor 2 converts the bound into the ``beta/2 |.|^2`` convention.
    """
    eps = cls.min_prob_bound()
    if eps <= 0:
        raise ValueError("class has members with zero action probability; smoothness is unbounded")
    coef = mdp.horizon**3 / math.sqrt(eps)
    if action_norm.kind == "l2":
        coef *= mdp.n_actions
    return 2.0 * coef


def tuned_eps_expl(K: int, regularizer: str, n_actions: int):
    """Exploration level from the rate analysis; returns ``(eps, clipped)``."""
    K = max(K, 1)
    if regularizer == "euclidean":
        eps = K ** (-2 / 3)
    else:
        eps = K ** (-2 / 7) * n_actions ** (2 / 5)
    if eps > EPS_EXPL_CLIP:
        log.info("tuned eps_expl %.4g clipped to %.2f", eps, EPS_EXPL_CLIP)
        return EPS_EXPL_CLIP, True
    return eps, False


# ---------------------------------------------------------------------------
# runs


@dataclass
class PmdConfig:
    eta: float
    K: int
    regularizer: str = "euclidean"
    eps_expl: float | None = None       # None: tuned from K
    critic_noise: float = 0.0
    inner_tol: float = 1e-10
    initial: list | None = None         # hull coordinates or inner policy; None: uniform
    seed: int = 0
    check_identity: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if self.regularizer not in ("euclidean", "negentropy"):
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.eps_expl is not None and not 0 <= self.eps_expl < 1:
            raise ValueError("eps_expl must lie in [0, 1)")
        if self.inner_tol < 0 or self.critic_noise < 0:
            raise ValueError("inner_tol and critic_noise must be nonnegative")


@dataclass
class IterateRecord:
    k: int
    coords: np.ndarray
    value: float
    advantage: float
    min_prob: float
    gap: float = math.nan
    eps_act: float = math.nan
    eps_crit_realized: float = math.nan
    eps_grad: float = math.nan
    grad_map: float = math.nan
    descent_slack: float = math.nan


CSV_COLUMNS = ["k", "value", "gap", "eps_act", "eps_crit_realized", "grad_map", "advantage",
               "min_prob"]


@dataclass
class PmdRun:
    records: list
    config: PmdConfig
    eps_expl: float
    eps_clipped: bool
    reference: float
    reference_unwrapped: float
    beta: float
    extra: dict = field(default_factory=dict)

    @property
    def values(self):
        return np.array([r.value for r in self.records])

    @property
    def gaps(self):
        return np.array([r.gap for r in self.records])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([r.k] + [repr(float(getattr(r, c))) for c in CSV_COLUMNS[1:]])

    def summary(self, window=0.5) -> dict:
        from .rates import fit_rate

        ks = np.array([r.k for r in self.records])
        fit = fit_rate(ks[1:], self.gaps[1:], window) if len(ks) > 1 else None
        cfg = asdict(self.config)
        cfg["eps_expl"] = self.eps_expl
        return {
            "final_gap": float(self.gaps[-1]),
            "final_gap_unwrapped": float(self.values[-1] - self.reference_unwrapped),
            "final_value": float(self.values[-1]),
            "reference": self.reference,
            "reference_unwrapped": self.reference_unwrapped,
            "rate": None if fit is None else fit.to_dict(),
            "tuning": {"eta": self.config.eta, "eps_expl": self.eps_expl,
                       "eps_expl_clipped": self.eps_clipped, "beta": self.beta,
                       "eta_theory": 1 / (2 * self.beta) if np.isfinite(self.beta) else 0.0},
            "config": cfg,
            **self.extra,
        }

    def write_summary(self, path, window=0.5):
        with open(path, "w") as fh:
            json.dump(self.summary(window), fh, indent=2, sort_keys=True)


def _initial_coords(inner, wrapped, initial):
    if isinstance(inner, Complete):
        if initial is None:
            return np.full((inner.n_states, inner.n_actions), 1.0 / inner.n_actions)
        return inner.materialize(np.asarray(initial, dtype=float)).copy()
    if initial is None:
        return np.full(inner.m, 1.0 / inner.m)
    lam = np.asarray(initial, dtype=float)
    wrapped.materialize(lam)  # validates
    return lam.copy()


def run_pmd(mdp, cls, config: PmdConfig, reference=None, reference_unwrapped=None,
            search_rng=None) -> PmdRun:
    """``K`` PMD iterations over ``cls`` wrapped with ``eps_expl`` exploration.

    ``reference`` is the best known value of the wrapped class (searched when
    omitted); gaps are measured against the smaller of it and the best value
    the run itself visits.
    """
    from .search import best_in_class

    inner, _ = unwrap(cls)
    if not getattr(cls, "is_convex", False):
        raise ClassError("PMD needs a convex class")
    if config.eps_expl is None:
        eps, clipped = tuned_eps_expl(config.K, config.regularizer, mdp.n_actions)
    else:
        eps, clipped = config.eps_expl, False
    wrapped = wrap_eps(cls, eps)
    floor = wrapped.min_prob_bound() if config.regularizer == "negentropy" else 0.0
    reg = Regularizer(config.regularizer, floor)
    try:
        beta = smoothness_constant(wrapped, mdp, reg.paired_norm)
    except ValueError:
        beta = math.inf
    coords = _initial_coords(inner, wrapped, config.initial)
    probe_rng = np.random.default_rng([config.seed, 1])
    H = mdp.horizon
    records = []
    for k in range(config.K + 1):
        pi = wrapped.materialize(coords)
        v = mdp_core.evaluate_value(mdp, pi)
        q = mdp_core.evaluate_q(mdp, pi, v)
        mu = mdp_core.occupancy(mdp, pi)
        grad = H * state_action_product(mu, q)
        _, vmin = linear_min_oracle(wrapped, grad)
        rec = IterateRecord(k, np.array(coords, copy=True), float(mdp.rho0 @ v),
                            float(np.sum(grad * pi)) - vmin, float(pi.min()))
        records.append(rec)
        if k == config.K:
            break
        q_hat, realized = critic(mdp, pi, config.critic_noise, seed=[config.seed, k], mu=mu, q=q)
        if config.check_identity:
            probes = [pi, wrapped.random_member(probe_rng), linear_min_oracle(wrapped, grad)[0]]
            resid = linearization_residual(mdp, pi, probes, config.eta, reg, mu=mu, q=q)
            assert resid <= 1e-8, f"linearized objective mismatch {resid:.3g} at k={k}"
        sub = pmd_subproblem(mdp, wrapped, pi, q_hat, config.eta, reg, config.inner_tol,
                             coords=coords, mu=mu)
        c = sub.cert
        rec.eps_act, rec.eps_crit_realized = c.eps_opt, realized
        rec.eps_grad, rec.grad_map = c.eps_grad, c.grad_mapping_norm
        if np.isfinite(reg.lipschitz):
            v_next = mdp_core.value(mdp, sub.policy)
            rec.descent_slack = (rec.value - config.eta / (2 * reg.lipschitz**2) * c.grad_mapping_norm**2
                                 + config.eta * c.eps_grad * c.grad_mapping_norm + c.eps_opt - v_next)
        coords = sub.coords
    if reference is None:
        reference = best_in_class(mdp, wrapped, search_rng).value
    if reference_unwrapped is None:
        reference_unwrapped = reference if eps == 0 else best_in_class(mdp, cls, search_rng).value
    reference = min(reference, min(r.value for r in records))
    for r in records:
        r.gap = r.value - reference
    return PmdRun(records, config, eps, clipped, float(reference), float(reference_unwrapped), beta)
