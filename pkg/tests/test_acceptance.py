"""Acceptance criteria, one test per criterion.

Each test records a single pass/fail line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""
import math
import time

import numpy as np

from pmdlab import instances as inst
from pmdlab import mdp as M
from pmdlab.geometry import L1, L2, Regularizer, weighted_dual_norm
from pmdlab.pmd import (OccupancyGeometry, PmdConfig, ValueObjective, critic, run_pmd,
                        smoothness_constant)
from pmdlab.policy_classes import Complete, EpsGreedy
from pmdlab.prox import HullSet, run_prox_point
from pmdlab.rates import fit_rate
from pmdlab.verify import (check_epsgreedy_vgd, check_local_smoothness, check_negent_smooth,
                           check_occupancy_l1, check_pinsker, check_softmax_approx,
                           closure_audit, estimate_vgd)
from pmdlab.verify.counterexamples import (closure_floor, fig1_closed_form_deviation,
                                           fig2_occupancy, fig2_smoothness_ratio,
                                           npg_floor_certificate, run_npg, transfer_error)

from support import brute_dual, finite_difference, worst_vertex


def test_criterion_01_fig1_closed_forms(acceptance):
    t0 = time.perf_counter()
    dev = fig1_closed_form_deviation(gamma=0.99, p=0.01, n_grid=101)
    elapsed = time.perf_counter() - t0
    worst = max(dev["value"], dev["mu0"], dev["q"])
    acceptance(1, worst <= 1e-9 and elapsed < 1.0,
               f"max deviation {worst:.2e} (tol 1e-9), {elapsed:.2f}s (limit 1s)")


def test_criterion_02_fig2_occupancy(acceptance):
    # mu(S1) is checked against the formula exactly as printed; see the ledger
    dev0, dev1 = 0.0, 0.0
    for eps in (0.1, 0.01):
        mu, m0, _, m1_printed = fig2_occupancy(eps, gamma=0.9)
        dev0 = max(dev0, abs(mu[0] - m0))
        dev1 = max(dev1, abs(mu[1] - m1_printed))
    acceptance(2, dev0 <= 1e-9 and dev1 <= 1e-9,
               f"mu(S0) deviation {dev0:.2e}, mu(S1) deviation {dev1:.2e} (tol 1e-9)")


def test_criterion_03_local_smoothness(acceptance):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst, n = math.inf, 0
    while n < 1000:
        S, A = (int(x) for x in rng.integers(1, 7, size=2))
        mdp = inst.random_mdp(rng, S, A, float(rng.uniform(0.3, 0.95)))
        pi = 0.05 + (1 - 0.05 * A) * rng.dirichlet(np.ones(A), size=S)
        pt = rng.dirichlet(np.ones(A), size=S)
        for r in check_local_smoothness(mdp, pi, pt):
            worst = min(worst, r.slack)
        n += 1
    elapsed = time.perf_counter() - t0
    acceptance(3, worst >= -1e-8 and elapsed < 60,
               f"{n} triples, worst slack {worst:.3g} (tol -1e-8), {elapsed:.1f}s (limit 60s)")


def test_criterion_04_smoothness_tightness(acceptance):
    ps = (0.1, 0.05, 0.02)
    ratios = {p: fig2_smoothness_ratio(p, gamma=0.9) for p in ps}
    above = all(ratios[p] >= 1 / (8 * p) for p in ps)
    # halving p divides eps = p^2 by four
    growth = min(fig2_smoothness_ratio(p / 2, gamma=0.9) / ratios[p] for p in ps)
    acceptance(4, above and growth >= 1.5,
               "ratios " + ", ".join(f"{ratios[p]:.1f}>={1 / (8 * p):.2f}" for p in ps)
               + f"; min growth at eps/4 {growth:.2f} (need 1.5)")


def test_criterion_05_counterexample_separation(acceptance):
    mdp = inst.fig1(0.99, 0.01)
    H = mdp.horizon
    mu_star = M.occupancy(mdp, inst.constant_policy(0.5))
    cls = inst.fig1_loglinear()
    eps_bias = transfer_error(mdp, cls, np.zeros(2), mu_star)
    floor = closure_floor(mdp, eps_bias, mu_star)
    v_star = inst.Fig1ClosedForm(0.99, 0.01).value(0.5)
    run = run_pmd(mdp, inst.fig1_hull(), PmdConfig(eta=5e-5, K=2000, initial=[1.0, 0.0]),
                  reference=v_star, reference_unwrapped=v_star)
    gap = run.values[-1] - v_star
    npg = npg_floor_certificate(mdp, cls, run_npg(mdp, cls, 0.01, 200, [2.0, 0.0]), mu_star)
    ok = (eps_bias >= 1 / 32 - 1e-6 and floor >= 10 * H and gap <= 1e-3
          and npg["floor"] > H)
    acceptance(5, ok,
               f"eps_bias {eps_bias:.4f} (>= 1/32), closure floor {floor:.0f} (>= {10 * H:.0f}), "
               f"PMD gap {gap:.2e} at K=2000, NPG floor {npg['floor']:.0f} (> H={H:.0f})")


def test_criterion_06_descent_and_stationarity(acceptance):
    rng = np.random.default_rng(6)
    worst_descent, worst_stat, worst_rate, moved = math.inf, math.inf, math.inf, 0
    for seed in range(50):
        mdp, base = inst.generate_random_instance(3, 3, 3, seed=seed)
        cls = EpsGreedy(base, 0.1)
        beta = smoothness_constant(cls, mdp, L2)
        eta = 1 / (2 * beta)
        traj = run_prox_point(ValueObjective(mdp), OccupancyGeometry(mdp, Regularizer()),
                              HullSet(cls.vertices()), rng.dirichlet(np.ones(3)), eta, 30, 1e-12,
                              beta=beta, check=False)
        steps = traj.records[:-1]
        worst_descent = min(worst_descent, min(r.descent_slack for r in steps))
        worst_stat = min(worst_stat, min(r.stationarity.slack for r in steps))
        g2 = min(r.cert.grad_mapping_norm ** 2 for r in steps)
        bound = 2 * traj.L**2 * (traj.values[0] - traj.values.min()) / (eta * len(steps))
        worst_rate = min(worst_rate, bound + 1e-8 - g2)
        moved += traj.values[-1] < traj.values[0]
    ok = worst_descent >= -1e-8 and worst_stat >= -1e-8 and worst_rate >= 0
    acceptance(6, ok,
               f"50 instances ({moved} with strict decrease): worst descent slack {worst_descent:.3g}, "
               f"stationarity slack {worst_stat:.3g}, rate slack {worst_rate:.3g}")


def test_criterion_07_identity_suite(acceptance):
    rng = np.random.default_rng(7)
    fails = {}
    n = 120
    for name in ("value_diff", "q_diff", "grad_fd", "occupancy_l1", "dual_norm", "pinsker",
                 "entropy_lipschitz"):
        fails[name] = 0
    for _ in range(n):
        S, A = (int(x) for x in rng.integers(1, 7, size=2))
        mdp = inst.random_mdp(rng, S, A, float(rng.uniform(0.3, 0.95)))
        pi = inst.random_policy(rng, S, A, 0.3)
        pt = rng.dirichlet(np.ones(A), size=S)
        lhs = M.value_difference(mdp, pi, pt)
        fails["value_diff"] += abs(lhs - (M.value(mdp, pt) - M.value(mdp, pi))) > 1e-9
        fails["q_diff"] += M.q_difference_identity(mdp, pi, pt) > 1e-9
        an = float(np.sum(M.policy_gradient(mdp, pi) * (pt - pi)))
        fd = finite_difference(lambda x: M.value(mdp, x), pi, pt - pi)
        fails["grad_fd"] += abs(fd - an) > 1e-5 * max(1.0, abs(an))
        fails["occupancy_l1"] += not check_occupancy_l1(mdp, pi, pt).passed
        mu = M.occupancy(mdp, pi)
        z = rng.normal(size=(S, A))
        for norm in (L1, L2):
            fails["dual_norm"] += abs(weighted_dual_norm(mu, norm, z) - brute_dual(mu, norm, z)) > 1e-6
        u, v = rng.dirichlet(np.ones(A + 1), size=2)
        fails["pinsker"] += not check_pinsker(u, v).passed
        p = 0.05 + (1 - 0.05 * (A + 1)) * rng.dirichlet(np.ones(A + 1))
        q = 0.05 + (1 - 0.05 * (A + 1)) * rng.dirichlet(np.ones(A + 1))
        fails["entropy_lipschitz"] += not check_negent_smooth(p, q, 0.05).passed
    total = sum(fails.values())
    acceptance(7, total == 0,
               f"{n} instances per identity, failures: "
               + ", ".join(f"{k}={v}" for k, v in fails.items()))


def test_criterion_08_epsgreedy_vgd(acceptance):
    rng = np.random.default_rng(8)
    reports = []
    for seed in range(20):
        mdp, cls = inst.generate_random_instance(3, 2, 3, seed=100 + seed, gamma=0.7)
        est = estimate_vgd(mdp, cls, 30, rng=rng)
        for eps in (0.01, 0.05, 0.1, 0.2):
            reports += check_epsgreedy_vgd(mdp, cls, eps, est, n_samples=5, rng=rng)
    worst = min(r.slack for r in reports)
    acceptance(8, len(reports) >= 400 and all(r.passed for r in reports),
               f"{len(reports)} combinations, worst slack {worst:.3g} (tol -1e-8)")


def test_criterion_09_closure_implies_vgd(acceptance):
    rng = np.random.default_rng(9)
    reports, skipped = [], 0
    for i in range(50):
        if i % 2:
            mdp, cls = inst.generate_random_instance(3, 3, 3, seed=200 + i, gamma=0.8)
            lam = rng.dirichlet(np.ones(3))
            pi, coords = cls.materialize(lam), lam
        else:
            mdp = inst.random_mdp(rng, 4, 3, 0.8)
            cls, pi, coords = Complete(4, 3), inst.random_policy(rng, 4, 3), None
        q_hat, _ = critic(mdp, pi, float(rng.choice([0.0, 1e-3, 1e-2])), seed=i)
        rep = closure_audit(mdp, cls, pi, float(rng.choice([0.1, 1.0, 10.0])), Regularizer(),
                            q_hat=q_hat, coords=coords)
        if not rep.asserted:
            skipped += 1
            continue
        reports.append(rep.report())
    worst = min(r.slack for r in reports)
    acceptance(9, skipped == 0 and all(r.passed for r in reports),
               f"{len(reports)} instances asserted ({skipped} with infinite mismatch), "
               f"worst slack {worst:.3g}")


def _rate_instances():
    mdp = inst.fig1()
    yield "fig1", mdp, inst.fig1_hull(), PmdConfig(eta=5e-5, K=2000, initial=[1.0, 0.0])
    for seed in range(5):
        mdp, cls = inst.generate_random_instance(4, 3, 3, seed=seed)
        start = np.eye(3)[worst_vertex(mdp, cls, M.value)]
        yield f"random{seed}", mdp, cls, PmdConfig(eta=2e-3, K=1500, initial=start.tolist())


def test_criterion_10_rate_sanity(acceptance):
    lines, ok = [], True
    for name, mdp, cls, cfg in _rate_instances():
        run = run_pmd(mdp, cls, cfg)
        rise = float(np.max(np.diff(run.gaps)))
        fit = fit_rate(np.arange(1, len(run.gaps)), run.gaps[1:])
        rate_ok = fit.status == "converged-exactly" or fit.slope <= -0.4
        noisy_cfg = PmdConfig(**{**cfg.__dict__, "critic_noise": 1e-4})
        noisy = run_pmd(mdp, cls, noisy_cfg, reference=run.reference,
                        reference_unwrapped=run.reference_unwrapped)
        degrade = noisy.values[-1] - run.values[-1]
        allowance = 10 * mdp.horizon * math.sqrt(1e-4)
        ok &= rise <= 1e-9 and rate_ok and degrade <= allowance
        slope = "exact" if fit.slope is None else f"{fit.slope:.2f}"
        lines.append(f"{name}: rise {rise:.1e} slope {slope} noise +{degrade:.1e}/{allowance:.2f}")
    acceptance(10, ok, "; ".join(lines))


def test_criterion_11_softmax(acceptance):
    rng = np.random.default_rng(11)
    reports = []
    for _ in range(1000):
        d = int(rng.integers(2, 11))
        x = rng.normal(size=d) * rng.uniform(0.01, 100)
        reports.append(check_softmax_approx(x, float(rng.choice([0.01, 0.1, 1.0]))))
    worst = min(r.slack for r in reports)
    acceptance(11, all(r.passed for r in reports),
               f"{len(reports)} cases, worst slack {worst:.3g}")
