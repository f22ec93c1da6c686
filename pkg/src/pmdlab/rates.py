"""Log-log rate fits for gap series."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_POINTS = 10
GAP_FLOOR = 1e-12


@dataclass
class RateFit:
    window: float
    slope: float | None
    r2: float | None
    n_points: int
    status: str = "fitted"       # or "converged-exactly"

    def to_dict(self):
        return {"window": self.window, "slope": self.slope, "r2": self.r2,
                "n_points": self.n_points, "status": self.status}


def fit_rate(ks, gaps, window: float = 0.5) -> RateFit:
    """Least-squares slope of ``log gap`` against ``log k`` over the last ``window`` of the series.

    Points with gap at or below 1e-12 are dropped; with fewer than ten left the
    series is reported as converged rather than fitted.
    """
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    ks = np.asarray(ks, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    n = len(ks)
    start = n - max(1, int(math.ceil(window * n)))
    k, g = ks[start:], gaps[start:]
    keep = (g > GAP_FLOOR) & (k > 0)
    if keep.sum() < MIN_POINTS:
        return RateFit(window, None, None, int(keep.sum()), "converged-exactly")
    x, y = np.log(k[keep]), np.log(g[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss == 0 else 1.0 - float((resid**2).sum()) / ss
    return RateFit(window, float(slope), r2, int(keep.sum()))
