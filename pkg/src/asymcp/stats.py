"""Tail estimates, log-linear decay fits and empirical dominance checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class TailEstimate:
    k: float
    p_hat: float
    ci_low: float
    ci_high: float
    n: int


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    points: int


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def tail_estimate(samples, k: float) -> TailEstimate:
    """Fraction of samples strictly above ``k`` with a 95% Wilson interval."""
    x = np.asarray(samples)
    if x.size == 0:
        raise ValueError("tail_estimate needs a nonempty sample")
    hits = int((x > k).sum())
    lo, hi = wilson_interval(hits, x.size)
    return TailEstimate(k=k, p_hat=hits / x.size, ci_low=lo, ci_high=hi, n=int(x.size))


def tail_curve(samples, ks) -> np.ndarray:
    """P_hat(X > k) for each k in ``ks`` (sorted-sample lookup)."""
    x = np.sort(np.asarray(samples))
    ks = np.asarray(ks, dtype=float)
    return (x.size - np.searchsorted(x, ks, side="right")) / x.size


def fit_decay_slope(points) -> DecayFit:
    """OLS of log p against k over the points with p > 0."""
    pts = [(float(k), float(p)) for k, p in points if p > 0]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points with p > 0, got {len(pts)}")
    k = np.array([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    kc = k - k.mean()
    sxx = float(kc @ kc)
    if sxx == 0:
        raise ValueError("all k values coincide")
    slope = float(kc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * k.mean())
    resid = y - (intercept + slope * k)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(resid @ resid) / ss_tot)
    return DecayFit(slope=slope, intercept=intercept, r2=r2, points=len(pts))


def dominance_check(samples_a, samples_b, n_se: float = 2.0) -> dict:
    """Does ``a`` look stochastically smaller than ``b``?

    Compares empirical survival functions at every integer k between the
    smallest and largest observation; ``max_violation`` is the largest value
    of S_a(k) - S_b(k) - n_se * SE(k), with SE the standard error of the
    difference. Holds iff that is <= 0.
    """
    a = np.asarray(samples_a)
    b = np.asarray(samples_b)
    if a.size == 0 or b.size == 0:
        raise ValueError("dominance_check needs two nonempty samples")
    lo = math.floor(min(a.min(), b.min()))
    hi = math.ceil(max(a.max(), b.max()))
    ks = np.arange(lo, hi + 1)
    sa = tail_curve(a, ks)
    sb = tail_curve(b, ks)
    se = np.sqrt(sa * (1 - sa) / a.size + sb * (1 - sb) / b.size)
    excess = sa - sb - n_se * se
    worst = int(np.argmax(excess))
    return {
        "holds": bool(excess[worst] <= 0),
        "max_violation": float(excess[worst]),
        "worst_k": int(ks[worst]),
    }
