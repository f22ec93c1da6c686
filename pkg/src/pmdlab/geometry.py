"""Action norms, regularizers, Bregman divergences and occupancy-weighted norms.

Per-state vectors live on the last axis, so a policy ``(S, A)`` is a
batch of ``S`` action vectors for every function here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy


class DomainError(ValueError):
    """A point lies outside the domain on which a regularizer's gradient is defined."""


@dataclass(frozen=True)
class ActionNorm:
    kind: str = "l2"

    def __post_init__(self):
        if self.kind not in ("l1", "l2"):
            raise ValueError(f"unknown action norm {self.kind!r}")

    def __call__(self, u, axis=-1):
        u = np.asarray(u, dtype=float)
        if self.kind == "l1":
            return np.abs(u).sum(axis=axis)
        return np.sqrt((u * u).sum(axis=axis))

    def dual(self, z, axis=-1):
        z = np.asarray(z, dtype=float)
        if self.kind == "l1":
            return np.abs(z).max(axis=axis)
        return np.sqrt((z * z).sum(axis=axis))


L1 = ActionNorm("l1")
L2 = ActionNorm("l2")


@dataclass(frozen=True)
class Regularizer:
    """``euclidean``: R(p) = |p|^2 / 2.  ``negentropy``: R(p) = sum p log p on Delta_floor."""

    kind: str = "euclidean"
    domain_floor: float = 0.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "negentropy"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.domain_floor < 0:
            raise ValueError("domain_floor must be nonnegative")

    @property
    def paired_norm(self) -> ActionNorm:
        return L2 if self.kind == "euclidean" else L1

    @property
    def lipschitz(self) -> float:
        if self.kind == "euclidean":
            return 1.0
        if self.domain_floor <= 0:
            return np.inf
        return 1.0 / self.domain_floor

    @property
    def quadratic(self) -> bool:
        return self.kind == "euclidean"

    def check_domain(self, p):
        if self.kind == "euclidean":
            return
        p = np.asarray(p)
        floor = self.domain_floor
        # tiny slack for rounding in affine images such as (1 - e) pi + e u
        bad = (p <= 0) | (p < floor * (1 - 1e-9) - 1e-15)
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DomainError(
                f"entry {idx} = {p[idx]!r} below the entropy domain floor {floor!r}")

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "euclidean":
            return 0.5 * (p * p).sum(axis=-1)
        return xlogy(p, p).sum(axis=-1)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "euclidean":
            return p.copy()
        self.check_domain(p)
        return np.log(p) + 1.0

    def bregman(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            d = u - v
            return 0.5 * (d * d).sum(axis=-1)
        self.check_domain(v)
        # KL(u || v) on the simplex; the sum(v - u) term keeps it exact off-simplex
        return (xlogy(u, u) - xlogy(u, v)).sum(axis=-1) + (v - u).sum(axis=-1)


EUCLIDEAN = Regularizer("euclidean")


def state_action_product(mu, W):
    """``(mu o W)[s, a] = mu[s] * W[s, a]``."""
    return np.asarray(mu)[:, None] * np.asarray(W)


def weighted_norm(mu, action_norm: ActionNorm, u, p: int = 2) -> float:
    """``(E_{s~mu} |u_s|^p)^{1/p}``; states outside supp(mu) contribute nothing."""
    mu = np.asarray(mu, dtype=float)
    per_state = action_norm(u)
    return float((mu @ per_state**p) ** (1.0 / p))


def weighted_dual_norm(mu, action_norm: ActionNorm, z) -> float:
    """Dual of ``|.|_{L2(mu), o}``: ``sqrt(sum_s |z_s|_*^2 / mu(s))``.

    Returns ``inf`` if ``z`` puts mass on a state with ``mu(s) = 0``.
    """
    mu = np.asarray(mu, dtype=float)
    z = np.asarray(z, dtype=float)
    dual = action_norm.dual(z)
    off = mu <= 0
    if np.any(dual[off] > 0):
        return np.inf
    on = ~off
    return float(np.sqrt(np.sum(dual[on] ** 2 / mu[on])))


def simplex_project(v) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    flat = np.atleast_2d(v)
    n = flat.shape[-1]
    u = -np.sort(-flat, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=-1)
    theta = css[np.arange(flat.shape[0]), rho] / (rho + 1)
    out = np.maximum(flat - theta[:, None], 0.0)
    return out.reshape(v.shape)


def mirror_step(reg: Regularizer, p, g, eta: float) -> np.ndarray:
    """``argmin_{q in simplex} <g, q> + B_R(q, p) / eta`` for each row."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    if reg.kind == "euclidean":
        return simplex_project(p - eta * g)
    reg.check_domain(p)
    logits = np.log(p) - eta * g
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def state_regularizer_bregman(mu, reg: Regularizer, pi, pi_ref) -> float:
    """``E_{s~mu} B_R(pi_s, pi_ref_s)``, evaluated on supp(mu) only."""
    mu = np.asarray(mu, dtype=float)
    on = mu > 0
    pi = np.asarray(pi, dtype=float)[on]
    pi_ref = np.asarray(pi_ref, dtype=float)[on]
    return float(mu[on] @ reg.bregman(pi, pi_ref))


def state_regularizer_grad(mu, reg: Regularizer, pi) -> np.ndarray:
    """Gradient of ``R_mu(pi) = E_{s~mu} R(pi_s)``: rows ``mu(s) * grad R(pi_s)``."""
    mu = np.asarray(mu, dtype=float)
    pi = np.asarray(pi, dtype=float)
    out = np.zeros_like(pi)
    on = mu > 0
    out[on] = mu[on, None] * reg.grad(pi[on])
    return out
