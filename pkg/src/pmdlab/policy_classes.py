"""Policy classes: complete, convex hulls of base policies, epsilon-greedy wraps, log-linear.

Convex classes are handled through hull coordinates ``lam`` (a point of the
simplex over the base policies); the policy is the affine image.  Log-linear
classes are parametrized by ``theta`` and only used as an evaluation baseline.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import mdp as mdp_core
from .config import TOL
from .geometry import state_action_product


class ClassError(ValueError):
    pass


def uniform_policy(S: int, A: int) -> np.ndarray:
    return np.full((S, A), 1.0 / A)


def min_action_prob(pi) -> float:
    return float(np.min(pi))


def _as_lambda(lam, m):
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (m,):
        raise ClassError(f"hull coordinates must have shape ({m},), got {lam.shape}")
    if np.any(lam < -TOL.prob_sum) or abs(lam.sum() - 1) > 1e-9:
        raise ClassError("hull coordinates must lie in the simplex")
    return lam


@dataclass(frozen=True, eq=False)
class Complete:
    n_states: int
    n_actions: int
    is_convex = True

    def materialize(self, coords):
        pi = np.asarray(coords, dtype=float)
        if pi.shape != (self.n_states, self.n_actions):
            raise ClassError(f"complete class expects a policy of shape "
                             f"({self.n_states}, {self.n_actions}), got {pi.shape}")
        return pi

    def lmo(self, g):
        """Per-state argmin; ties go to the lowest action index."""
        pi = mdp_core.greedy_policy(g)
        return pi, float(np.sum(g * pi))

    def vertices(self, cap: int = 4096):
        S, A = self.n_states, self.n_actions
        if A**S > cap:
            raise ClassError(f"complete class has {A}^{S} vertices, above cap {cap}")
        out = np.zeros((A**S, S, A))
        for i, acts in enumerate(itertools.product(range(A), repeat=S)):
            out[i, np.arange(S), acts] = 1.0
        return out

    def min_prob_bound(self) -> float:
        return 1.0 if self.n_actions == 1 else 0.0

    def random_member(self, rng):
        return rng.dirichlet(np.ones(self.n_actions), size=self.n_states)

    def to_dict(self):
        return {"variant": "complete"}


@dataclass(frozen=True, eq=False)
class ConvexHull:
    bases: np.ndarray
    is_convex = True

    def __post_init__(self):
        b = np.array(self.bases, dtype=float)
        if b.ndim != 3 or b.shape[0] < 1:
            raise ClassError("hull needs at least one base policy of shape (S, A)")
        for i, pi in enumerate(b):
            try:
                mdp_core.check_policy(_ShapeOnly(*pi.shape), pi)
            except mdp_core.MdpError as exc:
                raise ClassError(f"base {i}: {exc}") from None
        b.setflags(write=False)
        object.__setattr__(self, "bases", b)

    @property
    def n_states(self):
        return self.bases.shape[1]

    @property
    def n_actions(self):
        return self.bases.shape[2]

    @property
    def m(self):
        return self.bases.shape[0]

    def materialize(self, lam):
        lam = _as_lambda(lam, self.m)
        return np.tensordot(lam, self.bases, axes=1)

    def lmo(self, g):
        """Best vertex (lowest index on ties); linear objectives attain their min at a vertex."""
        vals = np.einsum("msa,sa->m", self.bases, g)
        i = int(np.argmin(vals))
        return self.bases[i].copy(), float(vals[i])

    def vertices(self, cap: int = 4096):
        return self.bases

    def min_prob_bound(self) -> float:
        return float(self.bases.min())

    def random_member(self, rng):
        return self.materialize(rng.dirichlet(np.ones(self.m)))

    def to_dict(self):
        return {"variant": "hull", "bases": self.bases.tolist()}


@dataclass(frozen=True, eq=False)
class EpsGreedy:
    inner: object
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ClassError(f"eps must lie in [0, 1], got {self.eps}")

    @property
    def is_convex(self):
        return bool(self.inner.is_convex)

    @property
    def n_states(self):
        return self.inner.n_states

    @property
    def n_actions(self):
        return self.inner.n_actions

    def wrap(self, pi):
        return (1.0 - self.eps) * np.asarray(pi) + self.eps / self.n_actions

    def materialize(self, coords):
        return self.wrap(self.inner.materialize(coords))

    def lmo(self, g):
        if not self.is_convex:
            raise ClassError("linear minimization needs a convex class")
        pi, _ = self.inner.lmo(g)
        pi = self.wrap(pi)
        return pi, float(np.sum(g * pi))

    def vertices(self, cap: int = 4096):
        return self.wrap(self.inner.vertices(cap))

    def min_prob_bound(self) -> float:
        return (1.0 - self.eps) * self.inner.min_prob_bound() + self.eps / self.n_actions

    def random_member(self, rng):
        return self.wrap(self.inner.random_member(rng))

    def to_dict(self):
        return {"variant": "eps_greedy", "eps": self.eps, "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class LogLinear:
    features: np.ndarray
    theta: np.ndarray = field(default=None)
    is_convex = False

    def __post_init__(self):
        phi = np.array(self.features, dtype=float)
        if phi.ndim != 3:
            raise ClassError("features must have shape (S, A, d)")
        if not np.all(np.isfinite(phi)):
            raise ClassError("features must be finite")
        theta = np.zeros(phi.shape[2]) if self.theta is None else np.array(self.theta, dtype=float)
        if theta.shape != (phi.shape[2],):
            raise ClassError(f"theta must have shape ({phi.shape[2]},), got {theta.shape}")
        phi.setflags(write=False)
        object.__setattr__(self, "features", phi)
        object.__setattr__(self, "theta", theta)

    @property
    def n_states(self):
        return self.features.shape[0]

    @property
    def n_actions(self):
        return self.features.shape[1]

    @property
    def dim(self):
        return self.features.shape[2]

    def materialize(self, theta=None):
        theta = self.theta if theta is None else np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ClassError(f"theta must have shape ({self.dim},), got {theta.shape}")
        logits = self.features @ theta
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    def lmo(self, g):
        raise ClassError("log-linear class is not convex; no linear minimization oracle")

    def with_theta(self, theta):
        return LogLinear(self.features, theta)

    def min_prob_bound(self) -> float:
        return 0.0

    def to_dict(self):
        return {"variant": "log_linear", "features": self.features.tolist(),
                "theta": self.theta.tolist()}


@dataclass(frozen=True)
class _ShapeOnly:
    n_states: int
    n_actions: int


def linear_min_oracle(cls, g):
    """``argmin_{pi in cls} <g, pi>`` and its value."""
    if not cls.is_convex:
        raise ClassError(f"{type(cls).__name__} is not convex; no linear minimization oracle")
    return cls.lmo(np.asarray(g, dtype=float))


def materialize(cls, coords=None):
    return cls.materialize(coords)


def wrap_eps(cls, eps: float):
    """Epsilon-greedy version of ``cls``; ``eps = 0`` returns the class unchanged."""
    return cls if eps == 0 else EpsGreedy(cls, eps)


def unwrap(cls):
    """Strip epsilon-greedy layers; returns ``(inner, total_eps)``."""
    keep = 1.0
    while isinstance(cls, EpsGreedy):
        keep *= 1.0 - cls.eps
        cls = cls.inner
    return cls, 1.0 - keep


def class_from_dict(data: dict, n_states: int | None = None, n_actions: int | None = None):
    variant = data.get("variant")
    if variant == "complete":
        if n_states is None or n_actions is None:
            raise ClassError("complete class needs the MDP dimensions")
        return Complete(n_states, n_actions)
    if variant == "hull":
        return ConvexHull(np.asarray(data["bases"], dtype=float))
    if variant == "eps_greedy":
        return EpsGreedy(class_from_dict(data["inner"], n_states, n_actions), float(data["eps"]))
    if variant == "log_linear":
        return LogLinear(np.asarray(data["features"], dtype=float),
                         np.asarray(data["theta"], dtype=float))
    raise ClassError(f"unknown policy-class variant {variant!r}")


def loglinear_regression(mdp, cls: LogLinear, theta=None):
    """Least-squares fit of ``Q^pi`` by ``phi^T w`` under the ``mu^pi o pi`` weighting.

    Returns ``(w, pi, mu, q)``.  A ridge term is added only when the weighted
    Gram matrix is rank deficient.
    """
    pi = cls.materialize(theta)
    mu = mdp_core.occupancy(mdp, pi)
    q = mdp_core.evaluate_q(mdp, pi)
    weights = state_action_product(mu, pi).ravel()
    phi = cls.features.reshape(-1, cls.dim)
    gram = phi.T @ (weights[:, None] * phi)
    rhs = phi.T @ (weights * q.ravel())
    if np.linalg.matrix_rank(gram) < cls.dim:
        gram = gram + TOL.ridge * np.eye(cls.dim)
    w = np.linalg.solve(gram, rhs)
    return w, pi, mu, q


def loglinear_npg_step(mdp, cls: LogLinear, eta: float, theta=None) -> np.ndarray:
    """One log-linear natural policy gradient step: ``theta - eta * w_star``."""
    theta = cls.theta if theta is None else np.asarray(theta, dtype=float)
    w, *_ = loglinear_regression(mdp, cls, theta)
    return theta - eta * w
