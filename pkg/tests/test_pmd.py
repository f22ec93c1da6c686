import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmdlab import instances as inst
from pmdlab import mdp as M
from pmdlab.geometry import L1, L2, Regularizer, simplex_project
from pmdlab.policy_classes import ClassError, Complete, ConvexHull, EpsGreedy
from pmdlab.pmd import (CSV_COLUMNS, OccupancyFrame, PmdConfig, ValueObjective, critic,
                        hull_coordinates, linearization_residual, pmd_subproblem, run_pmd,
                        smoothness_constant, tuned_eps_expl)
from pmdlab.prox import HullSet, prox_step


def deterministic_vertices(S, A):
    """All deterministic policies as a hull basis."""
    idx = np.array(np.meshgrid(*[np.arange(A)] * S, indexing="ij")).reshape(S, -1).T
    out = np.zeros((len(idx), S, A))
    for n, acts in enumerate(idx):
        out[n, np.arange(S), acts] = 1.0
    return out


class TestCritic:
    def test_exact(self, rng):
        mdp = inst.random_mdp(rng, 3, 2, 0.8)
        pi = inst.random_policy(rng, 3, 2)
        q_hat, realized = critic(mdp, pi)
        np.testing.assert_array_equal(q_hat, M.evaluate_q(mdp, pi))
        assert realized == 0.0

    def test_rescaling_is_exact(self, rng):
        mdp = inst.random_mdp(rng, 4, 3, 0.9)
        pi = inst.random_policy(rng, 4, 3)
        mu = M.occupancy(mdp, pi)
        q_hat, realized = critic(mdp, pi, 0.01, seed=3)
        err = mu @ ((q_hat - M.evaluate_q(mdp, pi)) ** 2).sum(axis=1)
        assert realized == pytest.approx(0.01, abs=1e-10)
        assert err == pytest.approx(0.01, abs=1e-10)

    def test_seeds_differ_with_same_error(self, rng):
        mdp = inst.random_mdp(rng, 3, 3, 0.8)
        pi = inst.random_policy(rng, 3, 3)
        a, ea = critic(mdp, pi, 0.05, seed=1)
        b, eb = critic(mdp, pi, 0.05, seed=2)
        assert not np.allclose(a, b)
        assert ea == pytest.approx(eb, abs=1e-12)

    def test_negative_noise_rejected(self, rng):
        mdp = inst.random_mdp(rng, 2, 2, 0.5)
        with pytest.raises(ValueError):
            critic(mdp, inst.random_policy(rng, 2, 2), -1.0)

    def test_gradient_error_chain(self, rng):
        mdp = inst.random_mdp(rng, 4, 3, 0.8)
        pi = inst.random_policy(rng, 4, 3)
        mu = M.occupancy(mdp, pi)
        q_hat, realized = critic(mdp, pi, 0.02, seed=7)
        frame = OccupancyFrame(mu, Regularizer())
        err = ValueObjective(mdp, q_hat).eps_grad(pi, frame)
        assert err == pytest.approx(mdp.horizon * math.sqrt(realized), rel=1e-10)


class TestSubproblem:
    @pytest.mark.parametrize("S,A", [(1, 2), (2, 2), (2, 3), (3, 3)])
    def test_complete_closed_form_matches_hull_solver(self, rng, S, A):
        mdp = inst.random_mdp(rng, S, A, 0.8)
        pi = inst.random_policy(rng, S, A)
        q_hat, _ = critic(mdp, pi)
        eta = 0.05
        res = pmd_subproblem(mdp, Complete(S, A), pi, q_hat, eta, Regularizer(), 1e-12)
        mu = M.occupancy(mdp, pi)
        # the closed form itself
        np.testing.assert_allclose(res.policy, simplex_project(pi - eta * mdp.horizon * q_hat),
                                   atol=1e-12)
        # and the generic hull solver on the complete class's vertex set
        hull = HullSet(deterministic_vertices(S, A))
        lam0 = hull_coordinates(ConvexHull(hull.vertices), pi)
        lam, _ = prox_step(ValueObjective(mdp, q_hat), None, hull, lam0, eta, 1e-13,
                           frame=OccupancyFrame(mu, Regularizer()))
        np.testing.assert_allclose(hull.point(lam), res.policy, atol=1e-7)

    def test_small_eta_keeps_policy(self, rng):
        mdp, cls = inst.generate_random_instance(3, 3, 3, seed=2)
        lam = np.array([0.2, 0.5, 0.3])
        pi = cls.materialize(lam)
        q_hat, _ = critic(mdp, pi)
        for c in (cls, Complete(3, 3)):
            res = pmd_subproblem(mdp, c, pi, q_hat, 1e-9, Regularizer(), 1e-8,
                                 coords=lam if c is cls else None)
            assert np.abs(res.policy - pi).max() <= 1e-6

    def test_constant_q_is_indifferent(self, rng):
        mdp = inst.random_mdp(rng, 3, 3, 0.7)
        pi = inst.random_policy(rng, 3, 3)
        q_hat = np.repeat(rng.normal(size=(3, 1)), 3, axis=1)
        for reg in (Regularizer(), Regularizer("negentropy")):
            res = pmd_subproblem(mdp, Complete(3, 3), pi, q_hat, 0.7, reg, 1e-12)
            np.testing.assert_allclose(res.policy, pi, atol=1e-12)

    def test_entropy_complete_is_multiplicative(self, rng):
        mdp = inst.random_mdp(rng, 3, 3, 0.7)
        pi = inst.random_policy(rng, 3, 3)
        q_hat, _ = critic(mdp, pi)
        eta = 0.01
        res = pmd_subproblem(mdp, Complete(3, 3), pi, q_hat, eta, Regularizer("negentropy"), 1e-12)
        w = pi * np.exp(-eta * mdp.horizon * q_hat)
        np.testing.assert_allclose(res.policy, w / w.sum(axis=1, keepdims=True), atol=1e-12)

    def test_wrapped_complete_certificate(self, rng):
        mdp = inst.random_mdp(rng, 3, 3, 0.7)
        cls = EpsGreedy(Complete(3, 3), 0.3)
        pi = cls.materialize(inst.random_policy(rng, 3, 3))
        q_hat, _ = critic(mdp, pi)
        for reg in (Regularizer(), Regularizer("negentropy", 0.1)):
            res = pmd_subproblem(mdp, cls, pi, q_hat, 0.05, reg, 1e-11)
            assert res.cert.eps_opt <= 1e-9
            assert res.policy.min() >= 0.1 - 1e-12

    def test_unreached_state_unchanged(self):
        P = np.zeros((2, 2, 2))
        P[:, :, 0] = 1.0
        mdp = M.Mdp(P, np.array([[0.0, 1.0], [1.0, 0.0]]), 0.5, np.array([1.0, 0.0]))
        pi = np.array([[0.5, 0.5], [0.3, 0.7]])
        q_hat, _ = critic(mdp, pi)
        res = pmd_subproblem(mdp, Complete(2, 2), pi, q_hat, 0.1, Regularizer(), 1e-12)
        np.testing.assert_array_equal(res.policy[1], pi[1])

    def test_rejects_nonconvex_class(self, rng):
        mdp = inst.fig1()
        pi = inst.constant_policy(0.5)
        with pytest.raises(ClassError):
            pmd_subproblem(mdp, inst.fig1_loglinear(), pi, M.evaluate_q(mdp, pi), 0.1,
                           Regularizer(), 1e-9)

    @given(st.integers(0, 10_000))
    def test_linearization_identity(self, seed):
        rng = np.random.default_rng(seed)
        mdp = inst.random_mdp(rng, 3, 3, 0.8)
        pi = inst.random_policy(rng, 3, 3, interior=0.3)
        probes = [inst.random_policy(rng, 3, 3, interior=0.3) for _ in range(3)]
        for reg in (Regularizer(), Regularizer("negentropy")):
            assert linearization_residual(mdp, pi, probes, 0.3, reg) <= 1e-8


class TestConstants:
    def test_smoothness_example(self):
        mdp = M.Mdp(np.ones((1, 2, 1)), np.zeros((1, 2)), 0.9, np.ones(1))
        cls = EpsGreedy(Complete(1, 2), 0.5)
        assert smoothness_constant(cls, mdp, L1) == pytest.approx(4000.0)
        assert smoothness_constant(cls, mdp, L2) == pytest.approx(8000.0)

    def test_single_action(self):
        mdp = M.Mdp(np.ones((1, 1, 1)), np.zeros((1, 1)), 0.9, np.ones(1))
        assert smoothness_constant(Complete(1, 1), mdp, L1) == pytest.approx(2 * 10**3)

    def test_unbounded_rejected(self):
        mdp = inst.fig1()
        with pytest.raises(ValueError):
            smoothness_constant(inst.fig1_hull(), mdp, L1)

    def test_tuning(self):
        assert tuned_eps_expl(1000, "euclidean", 3) == (pytest.approx(0.01), False)
        eps, clipped = tuned_eps_expl(2, "negentropy", 4)
        assert clipped and eps == 0.99
        eps, clipped = tuned_eps_expl(10**6, "negentropy", 2)
        assert not clipped and eps == pytest.approx(1e-6 ** (2 / 7) * 2 ** 0.4)

    def test_config_validation(self):
        for bad in ({"eta": 0, "K": 1}, {"eta": 1, "K": -1}, {"eta": 1, "K": 1, "eps_expl": 1.0},
                    {"eta": 1, "K": 1, "regularizer": "l3"}):
            with pytest.raises(ValueError):
                PmdConfig(**bad)


class TestRunPmd:
    def test_zero_iterations(self):
        mdp = inst.fig1()
        run = run_pmd(mdp, inst.fig1_hull(), PmdConfig(eta=1e-4, K=0, eps_expl=0.0, initial=[1, 0]),
                      reference=0.0)
        assert len(run.records) == 1
        np.testing.assert_array_equal(run.records[0].coords, [1.0, 0.0])

    def test_descent_with_theory_step(self):
        mdp, cls = inst.generate_random_instance(3, 3, 3, seed=3)
        eps = 0.5
        beta = smoothness_constant(EpsGreedy(cls, eps), mdp, L2)
        run = run_pmd(mdp, cls, PmdConfig(eta=1 / (2 * beta), K=40, eps_expl=eps, initial=[1, 0, 0]))
        v = run.values
        acts = np.array([r.eps_act for r in run.records[:-1]])
        assert np.all(v[1:] <= v[:-1] + acts + 1e-12)
        assert all(r.descent_slack >= -1e-8 for r in run.records[:-1])

    def test_records_are_sane(self):
        mdp, cls = inst.generate_random_instance(3, 2, 3, seed=1)
        run = run_pmd(mdp, cls, PmdConfig(eta=0.01, K=20, critic_noise=1e-3, seed=4))
        H = mdp.horizon
        for r in run.records:
            assert 0 <= r.value <= H
            assert r.gap >= 0 and r.advantage >= -1e-12
        for r in run.records[:-1]:
            assert r.eps_act >= 0 and r.eps_crit_realized == pytest.approx(1e-3)
        assert run.records[0].min_prob >= run.eps_expl / 2 - 1e-15

    def test_fig1_converges(self):
        mdp = inst.fig1()
        run = run_pmd(mdp, inst.fig1_hull(), PmdConfig(eta=5e-5, K=2000, initial=[1, 0]),
                      reference=inst.Fig1ClosedForm().value(0.5))
        assert run.gaps[-1] <= 1e-3
        assert np.all(np.diff(run.gaps) <= 1e-9)

    def test_outputs(self, tmp_path):
        mdp, cls = inst.generate_random_instance(2, 2, 2, seed=0)
        run = run_pmd(mdp, cls, PmdConfig(eta=0.05, K=25))
        run.to_csv(tmp_path / "run.csv")
        run.write_summary(tmp_path / "s.json")
        rows = list(csv.reader(open(tmp_path / "run.csv")))
        assert rows[0] == CSV_COLUMNS and len(rows) == 27
        summary = json.load(open(tmp_path / "s.json"))
        assert {"final_gap", "rate", "tuning"} <= summary.keys()
        assert summary["tuning"]["eps_expl"] == pytest.approx(25 ** (-2 / 3))
