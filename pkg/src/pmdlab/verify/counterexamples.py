"""The convex-landscape example where closure bounds are vacuous, and the
two-state example showing the exploration dependence of local smoothness."""
from __future__ import annotations

import math

import numpy as np

from .. import instances as inst
from .. import mdp as mdp_core
from ..geometry import L1, weighted_norm
from ..policy_classes import loglinear_npg_step, loglinear_regression
from .checks import linearization_error
from .reports import LemmaReport


def transfer_error(mdp, cls, theta, mu_star) -> float:
    """``E_{s~mu*, a~Unif}[(phi^T w - Q)^2]`` for the on-policy regression fit ``w`` at ``theta``."""
    w, pi, mu, q = loglinear_regression(mdp, cls, theta)
    resid = cls.features @ w - q
    return float(mu_star @ (resid**2).mean(axis=1))


def start_mismatch(mdp, mu_star) -> float:
    """``|mu*/rho0|_inf``."""
    return float(np.max(np.asarray(mu_star) / mdp.rho0))


def closure_floor(mdp, eps_bias, mu_star, C0=1.0, factor=1.0) -> float:
    """``factor * H nu0 sqrt(A C0 eps_bias)`` with ``nu0 = |mu*/rho0|_inf``."""
    nu0 = start_mismatch(mdp, mu_star)
    return factor * mdp.horizon * nu0 * math.sqrt(mdp.n_actions * C0 * eps_bias)


def run_npg(mdp, cls, eta, K, theta0):
    """Log-linear NPG iterates ``theta_0 .. theta_K``."""
    thetas = [np.asarray(theta0, dtype=float)]
    for _ in range(K):
        thetas.append(loglinear_npg_step(mdp, cls, eta, thetas[-1]))
    return thetas


def npg_floor_certificate(mdp, cls, thetas, mu_star, C0=1.0) -> dict:
    """Error floor ``2 H nu0 sqrt(A C0 eps_bias)`` of the closure-based log-linear
    bound, with ``eps_bias`` the worst transfer error along the NPG iterates."""
    errs = [transfer_error(mdp, cls, th, mu_star) for th in thetas]
    values = [mdp_core.value(mdp, cls.materialize(th)) for th in thetas]
    eps_bias = max(errs)
    return {"eps_bias": eps_bias, "floor": closure_floor(mdp, eps_bias, mu_star, C0, factor=2.0),
            "values": values, "transfer_errors": errs}


def fig1_closed_form_deviation(gamma=0.99, p=0.01, n_grid=101) -> dict:
    mdp = inst.fig1(gamma, p)
    cf = inst.Fig1ClosedForm(gamma, p)
    dev = {"value": 0.0, "q": 0.0, "mu0": 0.0, "occupancy": 0.0}
    for a in np.linspace(0.0, 1.0, n_grid):
        pi = inst.constant_policy(a)
        v = mdp_core.evaluate_value(mdp, pi)
        mu = mdp_core.occupancy(mdp, pi)
        dev["value"] = max(dev["value"], abs(float(mdp.rho0 @ v) - cf.value(a)),
                           float(np.abs(v - cf.values(a)).max()))
        dev["q"] = max(dev["q"], float(np.abs(mdp_core.evaluate_q(mdp, pi, v) - cf.q(a)).max()))
        dev["mu0"] = max(dev["mu0"], abs(mu[0] - cf.mu0()))
        dev["occupancy"] = max(dev["occupancy"], float(np.abs(mu - cf.occupancy(a)).max()))
    return dev


def fig2_occupancy(eps, gamma=0.9):
    """Solver occupancy next to the closed forms; returns ``(mu, mu0_formula, mu1_formula, mu1_as_printed)``."""
    mdp, pi, _ = inst.fig2(eps, p=max(2 * eps, 0.1), gamma=gamma)
    mu = mdp_core.occupancy(mdp, pi)
    ge = gamma * eps
    return mu, 1 / (1 + ge), ge / (1 + ge), ge / ((1 + ge) * (1 - gamma))


def fig2_smoothness_ratio(p, gamma=0.9, eps=None) -> float:
    """Linearization error over ``|pi~ - pi|^2_{L2(mu^pi), 1}`` at ``eps = p^2``."""
    eps = p * p if eps is None else eps
    mdp, pi, pi_t = inst.fig2(eps, p, gamma)
    mu = mdp_core.occupancy(mdp, pi)
    return linearization_error(mdp, pi, pi_t) / weighted_norm(mu, L1, pi_t - pi) ** 2


def counterexample_suite(gamma=0.99, p=0.01, fig2_gamma=0.9):
    reports = []
    # (a) closed forms on the three-state instance
    dev = fig1_closed_form_deviation(gamma, p)
    reports.append(LemmaReport("fig1_closed_form", f"gamma={gamma} p={p}", max(dev.values()),
                               1e-9, 0.0, dev))
    mdp = inst.fig1(gamma, p)
    pi_star = inst.constant_policy(0.5)
    mu_star = mdp_core.occupancy(mdp, pi_star)
    # (b) mu* is close to (1/2, 1/4, 1/4)
    dev_mu = float(np.abs(mu_star - [0.5, 0.25, 0.25]).max())
    reports.append(LemmaReport("fig1_mu_star_approx", f"gamma={gamma} p={p}", dev_mu, 0.01, 0.0,
                               {"mu_star": mu_star.tolist()}))
    # (c) transfer error at alpha = 1/2
    cls = inst.fig1_loglinear()
    eps_bias = transfer_error(mdp, cls, np.zeros(2), mu_star)
    reports.append(LemmaReport("fig1_transfer_error", "alpha=1/2", 1 / 32, eps_bias, 1e-6))
    # (d) closure floor
    floor = closure_floor(mdp, eps_bias, mu_star)
    reports.append(LemmaReport("fig1_closure_floor", "C0=1", 10 * mdp.horizon, floor, 0.0,
                               {"nu0": start_mismatch(mdp, mu_star), "H": mdp.horizon}))
    # (e) two-state occupancies and smoothness growth
    for eps in (0.1, 0.01):
        mu, m0, m1, _ = fig2_occupancy(eps, fig2_gamma)
        reports.append(LemmaReport("fig2_occupancy", f"eps={eps}",
                                   float(max(abs(mu[0] - m0), abs(mu[1] - m1))), 1e-9, 0.0))
    for q in (0.1, 0.05, 0.02):
        r = fig2_smoothness_ratio(q, fig2_gamma)
        reports.append(LemmaReport("fig2_smoothness_ratio", f"p={q} eps=p^2",
                                   1 / (8 * q), r, 0.0))
    growth = fig2_smoothness_ratio(0.05, fig2_gamma) / fig2_smoothness_ratio(0.1, fig2_gamma)
    reports.append(LemmaReport("fig2_smoothness_growth", "eps 0.01 -> 0.0025", 1.5, growth, 0.0))
    return reports
