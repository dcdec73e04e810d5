"""Exact solution of the process on lattices of at most five sites.

The state space {0,1,2}^n is enumerated, the generator written down site by
site from the local rates, and the absorption quantities obtained by linear
solves. With lambda2 = inf the chain lives on the closed configurations (no
healthy site next to a symptomatic one) and every transition is followed by
the closure map.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .model import Boundary, Configuration, Lattice, SimParams, init_state

MAX_SITES = 5


@dataclass(frozen=True)
class OracleResult:
    extinction_prob: float
    mean_extinction_time: float
    extinction_prob_by_horizon: float


def _close(state: tuple, nbr: np.ndarray) -> tuple:
    s = list(state)
    flip = [x for x in range(len(s)) if s[x] == 0 and any(y >= 0 and state[y] == 2 for y in nbr[x])]
    for x in flip:
        s[x] = 1
    return tuple(s)


def generator_matrix(params: SimParams, lattice: Lattice) -> tuple[np.ndarray, list[tuple]]:
    """Generator ``Q`` over the reachable state space and the state list."""
    n, nbr = lattice.n, lattice.nbr
    two_d = 2 * lattice.d
    inf = params.lambda2_infinite
    states = list(itertools.product((0, 1, 2), repeat=n))
    if inf:
        states = [s for s in states if _close(s, nbr) == s]
    index = {s: i for i, s in enumerate(states)}
    q = np.zeros((len(states), len(states)))

    for i, s in enumerate(states):
        moves: list[tuple[tuple, float]] = []
        for x in range(n):
            if s[x] == 0:
                k1 = sum(1 for y in nbr[x] if y >= 0 and s[y] == 1)
                k2 = sum(1 for y in nbr[x] if y >= 0 and s[y] == 2)
                rate = params.lambda1 * k1 / two_d + (0.0 if inf else params.lambda2 * k2 / two_d)
                moves.append((s[:x] + (1,) + s[x + 1 :], rate))
            elif s[x] == 1:
                moves.append((s[:x] + (2,) + s[x + 1 :], params.gamma))
                moves.append((s[:x] + (0,) + s[x + 1 :], 1.0))
            else:
                moves.append((s[:x] + (0,) + s[x + 1 :], 1.0))
        for target, rate in moves:
            if rate == 0.0:
                continue
            if inf:
                target = _close(target, nbr)
            j = index[target]
            if j != i:
                q[i, j] += rate
                q[i, i] -= rate
    return q, states


def exact_small_lattice_oracle(params: SimParams, initial="single_symptomatic_at_origin") -> OracleResult:
    """Extinction probability and mean extinction time, computed exactly.

    ``initial`` may be a Configuration or anything :func:`init_state` takes.
    ``extinction_prob_by_horizon`` is P(extinct before ``params.horizon``),
    the quantity a horizon-limited simulation estimates.
    """
    if params.boundary is Boundary.SYMPTOMATIC_FROZEN:
        raise ValueError("the oracle supports healthy_frozen and periodic boundaries only")
    lattice = initial.lattice if isinstance(initial, Configuration) else Lattice.for_params(params)
    if lattice.n > MAX_SITES:
        raise ValueError(f"oracle limited to {MAX_SITES} sites, lattice has {lattice.n}")
    config = initial if isinstance(initial, Configuration) else init_state(params, initial, lattice=lattice)
    start = tuple(int(v) for v in config.states)

    q, states = generator_matrix(params, lattice)
    zero = (0,) * lattice.n
    if start == zero:
        return OracleResult(1.0, 0.0, 1.0)
    absorbing = states.index(zero)
    transient = [i for i in range(len(states)) if i != absorbing]
    pos = transient.index(states.index(start))
    q_tt = q[np.ix_(transient, transient)]
    q_t0 = q[transient, absorbing]

    # P(absorb): Q_TT h = -Q_T0 ; E(time): Q_TT m = -1
    h = np.linalg.solve(q_tt, -q_t0)
    m = np.linalg.solve(q_tt, -np.ones(len(transient)))
    by_horizon = expm(q * params.horizon)[states.index(start), absorbing]
    return OracleResult(float(h[pos]), float(m[pos]), float(min(max(by_horizon, 0.0), 1.0)))
