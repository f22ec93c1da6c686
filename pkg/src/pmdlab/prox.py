"""Bregman proximal point steps over convex hulls with locally varying geometry.

The decision set is the convex hull of finitely many vertices in R^d.  Each
step approximately solves

    x+ = argmin_{y in X} <g_hat(x), y> + B_{R_x}(y, x) / eta

with pairwise Frank-Wolfe in hull coordinates.  The Frank-Wolfe gap at the
returned point is exactly the worst first-order violation over the vertices,
so it doubles as the ``eps_opt`` certificate.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError

log = logging.getLogger(__name__)

INNER_CAP_CEILING = 1_000_000


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# problem pieces


class Objective:
    """First-order oracle.  Subclasses supply ``value`` and ``grad``.

    ``grad_hat`` is what the algorithm sees; ``eps_grad`` bounds its error in
    the local dual norm (0 for exact oracles).
    """

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_hat(self, x) -> np.ndarray:
        return self.grad(x)

    def eps_grad(self, x, frame) -> float:
        return 0.0


class FunctionObjective(Objective):
    def __init__(self, f, grad):
        self._f = f
        self._grad = grad

    def value(self, x):
        return float(self._f(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)


class EuclideanFrame:
    """Plain ``|.|_2`` with ``R = |.|^2 / 2`` (same at every point)."""

    L = 1.0
    quadratic = True

    def norm(self, u):
        return float(np.linalg.norm(np.ravel(u)))

    def dual_norm(self, z):
        return float(np.linalg.norm(np.ravel(z)))

    def reg_grad(self, y):
        return np.array(y, dtype=float)

    def bregman(self, u, v):
        d = np.ravel(u) - np.ravel(v)
        return 0.5 * float(d @ d)


class EuclideanGeometry:
    def at(self, x):
        return EuclideanFrame()


class HullSet:
    """Convex hull of the rows of ``vertices`` (shape ``(m, ...)``)."""

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        self.flat = self.vertices.reshape(self.vertices.shape[0], -1)

    @property
    def m(self):
        return self.flat.shape[0]

    def point(self, lam):
        return (np.asarray(lam) @ self.flat).reshape(self.vertices.shape[1:])

    def lmo(self, g):
        vals = self.flat @ np.ravel(g)
        i = int(np.argmin(vals))
        return i, float(vals[i])

    def diameter(self, frame) -> float:
        # a norm is convex, so the max over the hull is attained at a vertex pair
        best = 0.0
        for i in range(self.m):
            for j in range(i + 1, self.m):
                best = max(best, frame.norm((self.flat[i] - self.flat[j]).reshape(self.vertices.shape[1:])))
        return best


# ---------------------------------------------------------------------------
# inner solver


@dataclass
class InnerResult:
    lam: np.ndarray
    gap: float
    iters: int
    converged: bool


def _line_search(dphi, t_max, quadratic):
    """Minimize a convex 1-d function on [0, t_max] given its derivative."""
    d0 = dphi(0.0)
    if d0 >= 0:
        return 0.0
    try:
        d1 = dphi(t_max)
    except DomainError:
        d1 = math.inf
    if d1 <= 0:
        return t_max
    if quadratic:
        return t_max * d0 / (d0 - d1)
    lo, hi = 0.0, t_max
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        try:
            dm = dphi(mid)
        except DomainError:
            dm = math.inf
        if dm > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * max(1.0, t_max):
            break
    return 0.5 * (lo + hi)


def hull_minimize(grad_fn, hull: HullSet, lam0, tol, max_iter=None, quadratic=False) -> InnerResult:
    """Pairwise Frank-Wolfe for a convex objective over ``hull``.

    ``grad_fn(y)`` returns the objective gradient at the point ``y``.
    Stops when the Frank-Wolfe gap drops to ``tol``.
    """
    m = hull.m
    if max_iter is None:
        max_iter = min(10 * m * math.ceil(1.0 / max(tol, 1e-300)), INNER_CAP_CEILING)
    lam = np.array(lam0, dtype=float)
    lam[lam < 0] = 0.0
    lam /= lam.sum()
    shape = hull.vertices.shape[1:]
    y = hull.point(lam)
    gap = math.inf
    for it in range(max_iter + 1):
        g = np.ravel(grad_fn(y))
        scores = hull.flat @ g
        fw = int(np.argmin(scores))
        gap = float(g @ np.ravel(y) - scores[fw])
        if gap <= tol:
            return InnerResult(lam, max(gap, 0.0), it, True)
        if it == max_iter:
            break
        active = np.flatnonzero(lam > 0)
        away = int(active[np.argmax(scores[active])])
        if away == fw:
            break
        d = (hull.flat[fw] - hull.flat[away]).reshape(shape)
        t_max = lam[away]

        def dphi(t):
            return float(np.ravel(grad_fn(y + t * d)) @ np.ravel(d))

        t = _line_search(dphi, t_max, quadratic)
        if t <= 0:
            # no progress possible along the pairwise direction; fall back to a plain FW step
            d = (hull.flat[fw] - np.ravel(y)).reshape(shape)

            def dphi_fw(s):
                return float(np.ravel(grad_fn(y + s * d)) @ np.ravel(d))

            s = _line_search(dphi_fw, 1.0, quadratic)
            if s <= 0:
                break
            lam *= 1.0 - s
            lam[fw] += s
        else:
            lam[fw] += t
            lam[away] -= t
            if t >= t_max:
                lam[away] = 0.0
        y = hull.point(lam)
    return InnerResult(lam, max(gap, 0.0), it, gap <= tol)


# ---------------------------------------------------------------------------
# certificates and diagnostics


@dataclass
class ProxCertificate:
    eps_opt: float
    eps_grad: float
    grad_mapping_norm: float
    converged: bool = True
    inner_iters: int = 0


def gradient_mapping(frame, x, x_plus, eta) -> float:
    """Dual norm of ``G = (grad R_x(x) - grad R_x(x+)) / eta``; checks ``|x - x+| <= eta |G|_*``."""
    G = (frame.reg_grad(x) - frame.reg_grad(x_plus)) / eta
    g_norm = frame.dual_norm(G)
    step = frame.norm(np.asarray(x) - np.asarray(x_plus))
    assert step <= eta * g_norm + 1e-10, (step, eta * g_norm)
    return g_norm


def prox_step(objective, geometry, hull: HullSet, lam, eta, inner_tol, frame=None):
    """One approximate Bregman prox step from the hull point with coordinates ``lam``.

    Returns ``(lam_plus, certificate)``.
    """
    if eta <= 0:
        raise PreconditionError("eta must be positive")
    x = hull.point(lam)
    frame = geometry.at(x) if frame is None else frame
    g = objective.grad_hat(x)
    rx = frame.reg_grad(x)

    def grad_fn(y):
        return g + (frame.reg_grad(y) - rx) / eta

    res = hull_minimize(grad_fn, hull, lam, inner_tol, quadratic=frame.quadratic)
    if not res.converged:
        log.warning("prox inner solver stopped at gap %.3g > tol %.3g after %d iterations",
                    res.gap, inner_tol, res.iters)
    x_plus = hull.point(res.lam)
    cert = ProxCertificate(
        eps_opt=res.gap,
        eps_grad=objective.eps_grad(x, frame),
        grad_mapping_norm=gradient_mapping(frame, x, x_plus, eta),
        converged=res.converged,
        inner_iters=res.iters,
    )
    return res.lam, cert


def check_descent(objective, frame, x, x_plus, cert: ProxCertificate, eta, beta) -> float:
    """Slack of ``f(x+) <= f(x) - eta/(2L^2) |G|^2 + eta eps_grad |G| + eps_opt``."""
    if eta > 1.0 / (2.0 * beta) * (1 + 1e-12):
        raise PreconditionError(f"eta={eta!r} exceeds 1/(2 beta)={1 / (2 * beta)!r}")
    G = cert.grad_mapping_norm
    rhs = (objective.value(x) - eta / (2 * frame.L**2) * G**2
           + eta * cert.eps_grad * G + cert.eps_opt)
    return rhs - objective.value(x_plus)


@dataclass
class Stationarity:
    lhs: float
    rhs: float
    D: float
    M: float

    @property
    def slack(self):
        return self.rhs - self.lhs


def stationarity_bound(objective, frame, hull: HullSet, x, cert: ProxCertificate, eta) -> Stationarity:
    """``max_y <grad f(x), x - y> <= (D + eta M)|G|_* + eps_grad D + eps_opt``.

    The left side is computed exactly with the vertex oracle; D and M are the
    exact diameter and gradient dual norm at ``x``.
    """
    grad = objective.grad(x)
    _, vmin = hull.lmo(grad)
    lhs = float(np.ravel(grad) @ np.ravel(x)) - vmin
    D = hull.diameter(frame)
    M = frame.dual_norm(grad)
    rhs = (D + eta * M) * cert.grad_mapping_norm + cert.eps_grad * D + cert.eps_opt
    return Stationarity(lhs, rhs, D, M)


def weak_gm_constants(C_star, eps_vgd, eps_opt, eps_grad, D, M, eta, L=None):
    """``omega = (C (D + eta M))^-2 / 2`` and ``delta = eps_vgd + eps_opt C + eps_grad C D``.

    ``L`` is accepted for signature symmetry with the convergence bound; it
    does not enter either constant.
    """
    if min(eps_vgd, eps_opt, eps_grad, D, M, eta) < 0:
        raise ValueError("inputs must be nonnegative")
    if C_star < 1:
        raise ValueError("C_star must be at least 1")
    omega = 0.5 / (C_star * (D + eta * M)) ** 2
    delta = eps_vgd + eps_opt * C_star + eps_grad * C_star * D
    return omega, delta


# ---------------------------------------------------------------------------
# full runs


@dataclass
class StepRecord:
    k: int
    lam: np.ndarray
    f: float
    cert: ProxCertificate | None = None
    descent_slack: float = math.nan
    stationarity: Stationarity | None = None


@dataclass
class ProxTrajectory:
    records: list
    eta: float
    L: float
    constants: dict = field(default_factory=dict)

    @property
    def values(self):
        return np.array([r.f for r in self.records])

    @property
    def grad_norms(self):
        return np.array([r.cert.grad_mapping_norm for r in self.records if r.cert is not None])

    def stationarity_rate(self):
        """``(min_k |G_k|^2, bound)`` with the accumulated error terms folded into the bound."""
        steps = [r for r in self.records if r.cert is not None]
        K = len(steps)
        if K == 0:
            return 0.0, 0.0
        g2 = min(r.cert.grad_mapping_norm ** 2 for r in steps)
        f1 = self.records[0].f
        fmin = float(self.values.min())
        extra = sum(self.eta * r.cert.eps_grad * r.cert.grad_mapping_norm + r.cert.eps_opt
                    for r in steps)
        bound = 2 * self.L**2 * (f1 - fmin + extra) / (self.eta * K)
        return g2, bound

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "f", "eps_opt", "grad_mapping_norm", "descent_slack",
                        "stationarity_lhs", "stationarity_rhs"])
            for r in self.records:
                c, st = r.cert, r.stationarity
                w.writerow([r.k, repr(r.f),
                            repr(c.eps_opt) if c else "", repr(c.grad_mapping_norm) if c else "",
                            repr(r.descent_slack), repr(st.lhs) if st else "",
                            repr(st.rhs) if st else ""])


def run_prox_point(objective, geometry, hull: HullSet, lam1, eta, K, inner_tol,
                   beta=None, check=True) -> ProxTrajectory:
    """``K`` prox steps from ``lam1``; returns ``K + 1`` records.

    With ``beta`` given, ``eta <= 1/(2 beta)`` is enforced and the descent
    inequality is evaluated at every step.  With ``check`` the descent,
    stationarity and min-gradient-mapping inequalities are asserted.
    """
    if beta is not None and eta > 1.0 / (2.0 * beta) * (1 + 1e-12):
        raise PreconditionError(f"eta={eta!r} exceeds 1/(2 beta)={1 / (2 * beta)!r}")
    lam = np.array(lam1, dtype=float)
    x = hull.point(lam)
    records = []
    L = None
    for k in range(1, K + 1):
        frame = geometry.at(x)
        L = frame.L
        f = objective.value(x)
        lam_plus, cert = prox_step(objective, geometry, hull, lam, eta, inner_tol, frame=frame)
        x_plus = hull.point(lam_plus)
        slack = check_descent(objective, frame, x, x_plus, cert, eta, beta) if beta else math.nan
        st = stationarity_bound(objective, frame, hull, x, cert, eta)
        if check:
            if beta:
                assert slack >= -1e-8, f"descent violated at k={k}: slack {slack}"
            assert st.slack >= -1e-8, f"stationarity violated at k={k}: slack {st.slack}"
        records.append(StepRecord(k, lam.copy(), f, cert, slack, st))
        lam, x = lam_plus, x_plus
    if L is None:
        L = geometry.at(x).L
    records.append(StepRecord(K + 1, lam.copy(), objective.value(x)))
    traj = ProxTrajectory(records, eta, L)
    if check and K > 0:
        g2, bound = traj.stationarity_rate()
        assert g2 <= bound + 1e-8, (g2, bound)
    return traj
