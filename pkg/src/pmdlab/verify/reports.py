"""Numerical inequality reports."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..config import TOL


@dataclass
class LemmaReport:
    """``lhs <= rhs`` checked with slack ``rhs - lhs >= -tol``.

    Lower-bound claims (``measured >= bound``) are stored with the bound as
    ``lhs`` and the measurement as ``rhs``.
    """

    lemma_id: str
    instance: str
    lhs: float
    rhs: float
    tol: float = TOL.lemma
    detail: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        s = self.slack
        return not math.isnan(s) and s >= -self.tol

    def to_dict(self):
        return {"lemma_id": self.lemma_id, "instance": self.instance, "lhs": self.lhs,
                "rhs": self.rhs, "slack": self.slack, "tol": self.tol, "pass": self.passed,
                "detail": self.detail}


def worst(reports, lemma_id=None, instance="worst case"):
    """Collapse many reports into the one with the smallest slack."""
    reports = list(reports)
    r = min(reports, key=lambda r: r.slack if not math.isnan(r.slack) else -math.inf)
    out = LemmaReport(lemma_id or r.lemma_id, instance, r.lhs, r.rhs, r.tol, dict(r.detail))
    out.detail["n_checked"] = len(reports)
    out.detail["n_failed"] = sum(not x.passed for x in reports)
    return out
