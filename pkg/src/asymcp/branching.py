"""Galton-Watson process dominating the symptomatic lineage.

A symptomatic individual can only infect its 2d neighbours during the healthy
windows it sees before it recovers, so its number of symptomatic children is
dominated by

    Y = Y_1 + ... + Y_{2d+N},   Y_j ~ Bernoulli(gamma / (gamma + 1)),

with ``N`` a geometric count on {0, 1, ...} of mean 2d (neighbour recovery marks
before the centre recovers). Everything here is built from the closed forms of
the generating functions of ``N``, ``Y_j``, ``Y`` and of the total progeny.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class PGFDomainError(ValueError):
    """Argument outside the region where a closed-form PGF is finite."""


class NonConvergenceError(ArithmeticError):
    """Fixed-point iteration diverged or ran out of budget."""


class NotSubcriticalError(ValueError):
    pass


@dataclass(frozen=True)
class GWParams:
    d: int
    gamma: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")

    @property
    def onset_prob(self) -> float:
        """P(a new asymptomatic turns symptomatic before recovering)."""
        return self.gamma / (self.gamma + 1.0)

    @property
    def window_success(self) -> float:
        # success probability of the geometric window count
        return 1.0 / (2 * self.d + 1)

    def subcritical(self) -> bool:
        return self.gamma * (4 * self.d - 1) < 1.0


@dataclass(frozen=True)
class ProgenyResult:
    progeny: int
    generations: int
    capped: bool


@dataclass(frozen=True)
class TailBound:
    """Certificate ``P(X > K) <= c * s**(-K)``."""

    c: float
    s: float

    def bound(self, k) -> float | np.ndarray:
        return self.c * np.power(self.s, -np.asarray(k, dtype=float))


def offspring_mean(params: GWParams) -> float:
    return 4 * params.d * params.gamma / (params.gamma + 1.0)


def progeny_mean(params: GWParams) -> float:
    """E(pi) = (gamma+1)/(gamma+1-4d gamma); infinite when not subcritical."""
    if not params.subcritical():
        return math.inf
    g = params.gamma
    return (g + 1.0) / (g + 1.0 - 4 * params.d * g)


# --------------------------------------------------------------------------
# samplers


def sample_window_count(params: GWParams, rng: np.random.Generator, size=None):
    """Healthy-window excess ``N``: P(N = i) = (2d/(2d+1))**i / (2d+1)."""
    return rng.geometric(params.window_success, size=size) - 1


def sample_offspring(params: GWParams, rng: np.random.Generator, size=None):
    n = sample_window_count(params, rng, size=size)
    return rng.binomial(2 * params.d + n, params.onset_prob)


def simulate_progeny_batch(params: GWParams, n: int, rng: np.random.Generator, cap: int = 10**6):
    """Run ``n`` independent lineages generation by generation.

    A generation of size ``X`` produces ``Binomial(2dX + NB(X), p)`` children,
    which is exactly the law of a sum of ``X`` independent copies of ``Y``.
    Returns ``(progeny, generations, capped)`` arrays.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    p = params.onset_prob
    q = params.window_success
    two_d = 2 * params.d

    progeny = np.ones(n, dtype=np.int64)
    generations = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    if cap == 1:
        capped[:] = True
        return progeny, generations, capped

    idx = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    while idx.size:
        windows = two_d * size + rng.negative_binomial(size, q)
        kids = rng.binomial(windows, p)
        progeny[idx] += kids
        born = kids > 0
        generations[idx[born]] += 1
        over = progeny[idx] >= cap
        if over.any():
            hit = idx[over]
            progeny[hit] = cap
            capped[hit] = True
        keep = born & ~over
        idx = idx[keep]
        size = kids[keep]
    return progeny, generations, capped


def simulate_progeny(params: GWParams, cap: int, rng: np.random.Generator) -> ProgenyResult:
    prog, gens, capped = simulate_progeny_batch(params, 1, rng, cap=cap)
    return ProgenyResult(int(prog[0]), int(gens[0]), bool(capped[0]))


# --------------------------------------------------------------------------
# generating functions


def offspring_pole(params: GWParams) -> float:
    """Where gamma + 1 + 2d gamma (1 - s) vanishes (inf when gamma = 0)."""
    if params.gamma == 0:
        return math.inf
    return 1.0 + (params.gamma + 1.0) / (2 * params.d * params.gamma)


def pgf_window_count(s: float, d: int) -> float:
    den = 1.0 + 2 * d * (1.0 - s)
    if den <= 0:
        raise PGFDomainError(f"G_N undefined at s={s} (d={d})")
    return 1.0 / den


def pgf_bernoulli(s: float, gamma: float) -> float:
    return (gamma * s + 1.0) / (gamma + 1.0)


def pgf_offspring(s: float, params: GWParams) -> float:
    """G_Y(s) = (g+1)/(g+1+2d g(1-s)) * ((g s + 1)/(g+1))**(2d)."""
    if s < 0 or s >= offspring_pole(params):
        raise PGFDomainError(f"G_Y undefined at s={s} for {params}")
    g = params.gamma
    d = params.d
    return (g + 1.0) / (g + 1.0 + 2 * d * g * (1.0 - s)) * pgf_bernoulli(s, g) ** (2 * d)


def solve_progeny_pgf(
    s: float,
    params: GWParams,
    tol: float = 1e-12,
    max_iter: int = 10**5,
    ceiling: float = 1e10,
) -> float:
    """Smallest root of ``x = s * G_Y(x)``, i.e. the progeny PGF at ``s``.

    Iterates from ``x = 0``; the iterates increase monotonically to the
    smallest fixed point when one exists. Leaving the domain of ``G_Y`` or
    exhausting ``max_iter`` means ``s`` lies beyond the radius of convergence.
    """
    if s < 0:
        raise PGFDomainError("s must be >= 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    pole = min(offspring_pole(params), ceiling)
    x = 0.0
    for _ in range(max_iter):
        if x >= pole:
            break
        nxt = s * pgf_offspring(x, params)
        if abs(nxt - x) <= tol:
            return nxt
        x = nxt
    raise NonConvergenceError(f"progeny PGF iteration did not converge at s={s} for {params}")


def progeny_pgf_converges(s: float, params: GWParams, **kw) -> bool:
    try:
        solve_progeny_pgf(s, params, **kw)
    except NonConvergenceError:
        return False
    return True


def tail_certificate(params: GWParams, target_s: float | None = None, s_max: float = 64.0, backoff: float = 0.99) -> TailBound:
    """Markov certificate ``P(pi > K) <= G_pi(s1) * s1**(-K)``.

    With ``target_s`` the certificate is evaluated there. Otherwise the edge of
    convergence of ``G_pi`` is located by bisection on (1, s_max] and ``s1`` is
    backed off from it by the factor ``backoff``.
    """
    if not params.subcritical():
        raise NotSubcriticalError(f"no exponential progeny tail certificate for {params}")
    if target_s is not None:
        if target_s <= 1:
            raise ValueError("target_s must exceed 1")
        return TailBound(c=solve_progeny_pgf(target_s, params), s=float(target_s))

    if progeny_pgf_converges(s_max, params):
        s1 = s_max
    else:
        lo, hi = 1.0, s_max
        while hi - lo > 1e-10 * hi:
            mid = 0.5 * (lo + hi)
            if progeny_pgf_converges(mid, params):
                lo = mid
            else:
                hi = mid
        s1 = backoff * lo
        if s1 <= 1.0:
            s1 = 1.0 + backoff * (lo - 1.0)
    return TailBound(c=solve_progeny_pgf(s1, params), s=s1)


def cumulative_infection_pgf(s: float, params: GWParams, l: int) -> float:
    """PGF of 2dl + N_1 + ... + N_l, which dominates pi_1 given pi_2 <= l."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    d = params.d
    if s < 0:
        raise PGFDomainError("s must be >= 0")
    return (s ** (2 * d) * pgf_window_count(s, d)) ** l


def infected_tail_certificate(params: GWParams, progeny_bound: TailBound | None = None) -> TailBound:
    """Exponential tail certificate for pi_1 when lambda1 = 0.

    Splits on pi_2 <= K/6d: the progeny certificate handles the large-pi_2
    part and the geometric sum above (at s0 = 1 + 1/4d) the rest.
    """
    b = progeny_bound or tail_certificate(params)
    d = params.d
    rate = min(b.s, 1.0 + (1.0 - 1.0 / (4 * d)) / 4.0)
    return TailBound(c=b.c + 1.0, s=rate ** (1.0 / (6 * d)))


def phi_check(d: int) -> dict:
    """phi(s) = (1 + 2d(1-s)) s**(4d) at s0 = 1 + 1/4d against its lower bound."""
    if d < 1:
        raise ValueError("d must be >= 1")
    s0 = 1.0 + 1.0 / (4 * d)
    value = (1.0 + 2 * d * (1.0 - s0)) * s0 ** (4 * d)
    lower = 1.0 + 0.25 * (1.0 - 1.0 / (4 * d))
    assert value >= lower > 1.0, (value, lower)
    return {"phi_at_s0": value, "lower_bound": lower}
