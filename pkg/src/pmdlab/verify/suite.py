"""Randomized sweep over every checker, collapsed to one report per lemma."""
from __future__ import annotations

import numpy as np

from .. import instances as inst
from .. import mdp as mdp_core
from ..geometry import EUCLIDEAN, Regularizer
from ..pmd import critic
from ..policy_classes import Complete
from . import checks
from .counterexamples import counterexample_suite
from .reports import LemmaReport, worst
from .vgd import check_complete_vgd, check_epsgreedy_vgd, closure_audit, estimate_vgd


def _identity_report(name, residuals, tol):
    r = max(residuals)
    return LemmaReport(name, f"{len(residuals)} random pairs", r, tol, 0.0)


def run_suite(seed: int = 0, n: int = 50) -> list:
    rng = np.random.default_rng(seed)
    out = list(counterexample_suite())
    smooth, occ, vd, qd = [], [], [], []
    for _ in range(n):
        S, A = rng.integers(1, 7, size=2)
        mdp = inst.random_mdp(rng, S, A, rng.uniform(0.3, 0.95))
        pi = inst.random_policy(rng, S, A, interior=max(0.3, 0.05 * A))
        pt = rng.dirichlet(np.ones(A), size=S)
        smooth.extend(checks.check_local_smoothness(mdp, pi, pt))
        occ.append(checks.check_occupancy_l1(mdp, pi, pt))
        vd.append(abs(mdp_core.value_difference(mdp, pi, pt)
                      - (mdp_core.value(mdp, pt) - mdp_core.value(mdp, pi))))
        qd.append(mdp_core.q_difference_identity(mdp, pi, pt))
    out.append(worst([r for r in smooth if r.lemma_id.endswith("l1")], instance=f"{n} triples"))
    out.append(worst([r for r in smooth if r.lemma_id.endswith("l2")], instance=f"{n} triples"))
    out.append(worst(occ, instance=f"{n} pairs"))
    out.append(_identity_report("value_difference", vd, 1e-9))
    out.append(_identity_report("q_difference", qd, 1e-9))

    soft, omd, neg, pin = [], [], [], []
    for _ in range(n):
        d = int(rng.integers(2, 11))
        soft.append(checks.check_softmax_approx(rng.normal(size=d) * rng.uniform(0.1, 10),
                                                float(rng.choice([0.01, 0.1, 1.0]))))
        x = rng.dirichlet(np.ones(3))
        omd.append(checks.check_omd_to_greedy(EUCLIDEAN, rng.normal(size=3), x, 0.05))
        p = 0.05 + 0.85 * rng.dirichlet(np.ones(3))
        q = 0.05 + 0.85 * rng.dirichlet(np.ones(3))
        neg.append(checks.check_negent_smooth(p, q, 0.05))
        pin.append(checks.check_pinsker(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))))
    out += [worst(soft), worst(omd), worst(neg), worst(pin)]

    cvgd, eg, cl = [], [], []
    for i in range(max(2, n // 10)):
        mdp, cls = inst.generate_random_instance(3, 2, 3, seed=seed * 1000 + i, gamma=0.7)
        pi = inst.random_policy(rng, 3, 2)
        cvgd.append(check_complete_vgd(mdp, pi))
        est = estimate_vgd(mdp, cls, 20, rng=rng)
        for eps in (0.0, 0.05):
            eg += check_epsgreedy_vgd(mdp, cls, eps, est, n_samples=3, rng=rng)
        q_hat, _ = critic(mdp, pi, 1e-3, seed=[seed, i])
        rep = closure_audit(mdp, Complete(3, 2), pi, 1.0, Regularizer(), q_hat=q_hat)
        if rep.asserted:
            cl.append(rep.report())
    out += [worst(cvgd), worst(eg)]
    if cl:
        out.append(worst(cl))
    return out


def summary_table(reports) -> str:
    rows = [f"{'lemma':<28} {'instance':<26} {'slack':>12}  result"]
    for r in reports:
        rows.append(f"{r.lemma_id:<28} {r.instance[:26]:<26} {r.slack:>12.4g}  "
                    f"{'pass' if r.passed else 'FAIL'}")
    return "\n".join(rows)
