"""Compiled event-driven engine.

Each infected site carries the clocks of the graphical construction: recovery
at rate 1, onset at rate gamma (asymptomatic only) and infection attempts at
rate lambda_i, sent along one of its 2d outgoing edges chosen uniformly. An
attempt landing on a non-healthy site or outside the lattice does nothing, so
the embedded jump chain equals the exact CTMC in law while each event costs
O(1). A frozen exterior contributes attempts along the edges that cross into
the lattice.

With lambda2 = inf the symptomatic infection clocks are replaced by closure:
right after an onset its healthy neighbours become asymptomatic, and a site
that recovers next to a symptomatic site is reinfected at once.

Random numbers inside the kernel come from a SplitMix64 stream started at the
per-run seed (see :mod:`asymcp.rng`), so every run is reproducible from its
seed alone.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..rng import draw_seed
from .model import (
    SYMPTOMATIC,
    BlockGeometry,
    BlockOutcome,
    Boundary,
    Lattice,
    RunSummary,
    SimParams,
    init_state,
)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_INV53 = 1.0 / 9007199254740992.0

# columns of the kernel output
PI1, PI2, TCUM, EXT_TIME, MAX_SPACE, EXTINCT, HIT_EDGE, A_HIT, LAM_MINUS, LAM_PLUS, PERI0 = range(11)
N_OUT = 11


@njit(inline="always")
def _uniform(rs):
    """Uniform on (0, 1] from the SplitMix64 state ``rs[0]``."""
    rs[0] += _GOLDEN
    z = rs[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return (float(z >> _S11) + 1.0) * _INV53


@njit(cache=True, nogil=True)
def _simulate(nbr, ext_state, supnorm, edge, peri, amask, state0, lam1, lam2, lam2_inf,
              gamma, horizon, a_t0, a_t1, seed, out):
    n, two_d = nbr.shape
    rs = np.empty(1, dtype=np.uint64)
    rs[0] = seed
    state = state0.copy()

    ones = np.empty(n, dtype=np.int64)
    twos = np.empty(n, dtype=np.int64)
    slot = np.full(n, -1, dtype=np.int64)
    n1 = 0
    n2 = 0

    ext_targets = np.empty(n * two_d, dtype=np.int64)
    n_ext = 0
    for x in range(n):
        for k in range(two_d):
            if nbr[x, k] < 0:
                ext_targets[n_ext] = x
                n_ext += 1
    lam_ext = 0.0
    if ext_state == 1:
        lam_ext = lam1
    elif ext_state == 2 and not lam2_inf:
        lam_ext = lam2
    ext_rate = lam_ext * n_ext / two_d
    lam2_rate = 0.0 if lam2_inf else lam2
    w1 = 1.0 + gamma + lam1
    w2 = 1.0 + lam2_rate

    pi1 = 0
    pi2 = 0
    max_space = 0
    hit_edge = False
    n_a = 0
    lam_plus = 0
    t = 0.0
    a_hit = False

    for x in range(n):
        s = state[x]
        if s == 1:
            slot[x] = n1
            ones[n1] = x
            n1 += 1
        elif s == 2:
            slot[x] = n2
            twos[n2] = x
            n2 += 1
            pi2 += 1

    if lam2_inf:
        flip = np.empty(n, dtype=np.int64)
        nf = 0
        for x in range(n):
            if state[x] != 0:
                continue
            for k in range(two_d):
                y = nbr[x, k]
                if (y >= 0 and state[y] == 2) or (y < 0 and ext_state == 2):
                    flip[nf] = x
                    nf += 1
                    break
        for i in range(nf):
            x = flip[i]
            state[x] = 1
            slot[x] = n1
            ones[n1] = x
            n1 += 1
            pi1 += 1

    lam_minus = 0
    peri0 = 0
    for x in range(n):
        if state[x] != 0:
            lam_minus += 1
            if supnorm[x] > max_space:
                max_space = supnorm[x]
            if edge[x]:
                hit_edge = True
            if peri[x]:
                peri0 += 1
            if amask[x]:
                n_a += 1
    if n_a > 0 and a_t0 <= 0.0:
        a_hit = True

    tcum = 0.0
    extinct = False
    ext_time = np.nan

    while True:
        n_inf = n1 + n2
        rate = n1 * w1 + n2 * w2 + ext_rate
        if rate <= 0.0:
            extinct = True
            ext_time = t
            break
        t_next = t - math.log(_uniform(rs)) / rate
        if n_a > 0 and t_next > a_t0 and t <= a_t1:
            a_hit = True
        if t_next >= horizon:
            tcum += n_inf * (horizon - t)
            t = horizon
            break
        tcum += n_inf * (t_next - t)
        t = t_next

        v = _uniform(rs) * rate
        target = -1
        src = -1
        kind = -1  # 0 recover, 1 onset, 2 infection attempt
        if v < n1 * w1:
            j = min(int(v / w1), n1 - 1)
            src = ones[j]
            r = v - j * w1
            if r < 1.0:
                kind = 0
            elif r < 1.0 + gamma:
                kind = 1
            else:
                kind = 2
        elif v < n1 * w1 + n2 * w2:
            v -= n1 * w1
            j = min(int(v / w2), n2 - 1)
            src = twos[j]
            kind = 0 if v - j * w2 < 1.0 else 2
        else:
            j = min(int(_uniform(rs) * n_ext), n_ext - 1)
            target = ext_targets[j]
            kind = 3

        if kind == 2:
            k = min(int(_uniform(rs) * two_d), two_d - 1)
            target = nbr[src, k]

        # recoveries, possibly followed by instant reinfection
        if kind == 0:
            x = src
            if state[x] == 1:
                last = ones[n1 - 1]
                ones[slot[x]] = last
                slot[last] = slot[x]
                n1 -= 1
            else:
                last = twos[n2 - 1]
                twos[slot[x]] = last
                slot[last] = slot[x]
                n2 -= 1
            state[x] = 0
            slot[x] = -1
            if amask[x]:
                n_a -= 1
            target = -1
            if lam2_inf:
                for k in range(two_d):
                    y = nbr[x, k]
                    if (y >= 0 and state[y] == 2) or (y < 0 and ext_state == 2):
                        target = x
                        break
        elif kind == 1:
            x = src
            last = ones[n1 - 1]
            ones[slot[x]] = last
            slot[last] = slot[x]
            n1 -= 1
            state[x] = 2
            slot[x] = n2
            twos[n2] = x
            n2 += 1
            pi2 += 1
            target = -1
            if lam2_inf:
                for k in range(two_d):
                    y = nbr[x, k]
                    if y >= 0 and state[y] == 0:
                        state[y] = 1
                        slot[y] = n1
                        ones[n1] = y
                        n1 += 1
                        pi1 += 1
                        if supnorm[y] > max_space:
                            max_space = supnorm[y]
                        if edge[y]:
                            hit_edge = True
                        if peri[y]:
                            lam_plus += 1
                        if amask[y]:
                            n_a += 1
                            if a_t0 <= t <= a_t1:
                                a_hit = True

        if target >= 0 and state[target] == 0:
            y = target
            state[y] = 1
            slot[y] = n1
            ones[n1] = y
            n1 += 1
            pi1 += 1
            if supnorm[y] > max_space:
                max_space = supnorm[y]
            if edge[y]:
                hit_edge = True
            if peri[y]:
                lam_plus += 1
            if amask[y]:
                n_a += 1
                if a_t0 <= t <= a_t1:
                    a_hit = True

    out[PI1] = pi1
    out[PI2] = pi2
    out[TCUM] = tcum
    out[EXT_TIME] = ext_time
    out[MAX_SPACE] = max_space
    out[EXTINCT] = 1.0 if extinct else 0.0
    out[HIT_EDGE] = 1.0 if hit_edge else 0.0
    out[A_HIT] = 1.0 if a_hit else 0.0
    out[LAM_MINUS] = lam_minus
    out[LAM_PLUS] = lam_plus + peri0
    out[PERI0] = peri0


@njit(cache=True, nogil=True)
def _simulate_many(nbr, ext_state, supnorm, edge, peri, amask, state0, lam1, lam2, lam2_inf,
                   gamma, horizon, a_t0, a_t1, seeds, out):
    for r in range(seeds.shape[0]):
        _simulate(nbr, ext_state, supnorm, edge, peri, amask, state0, lam1, lam2, lam2_inf,
                  gamma, horizon, a_t0, a_t1, seeds[r], out[r])


def simulate_raw(
    params: SimParams,
    seeds,
    initial="single_symptomatic_at_origin",
    lattice: Lattice | None = None,
    peri: np.ndarray | None = None,
    amask: np.ndarray | None = None,
    a_window: tuple[float, float] = (math.inf, math.inf),
) -> np.ndarray:
    """Run one simulation per seed; returns the (len(seeds), N_OUT) output table.

    ``initial`` is anything :func:`init_state` accepts; the kernel itself
    applies the lambda2 = inf closure at time 0.
    """
    lat = lattice or Lattice.for_params(params)
    start = init_state(params, initial, lattice=lat, closure=False).states
    n = lat.n
    peri = np.zeros(n, dtype=np.bool_) if peri is None else np.asarray(peri, dtype=np.bool_)
    amask = np.zeros(n, dtype=np.bool_) if amask is None else np.asarray(amask, dtype=np.bool_)
    edge = lat.edge_mask if not lat.periodic else np.zeros(n, dtype=np.bool_)
    seeds = np.ascontiguousarray(np.atleast_1d(np.asarray(seeds, dtype=np.uint64)))
    out = np.empty((seeds.shape[0], N_OUT))
    _simulate_many(
        lat.nbr, params.exterior_state, lat.supnorm, edge, peri, amask, start,
        float(params.lambda1), 0.0 if params.lambda2_infinite else float(params.lambda2),
        params.lambda2_infinite, float(params.gamma), float(params.horizon),
        float(a_window[0]), float(a_window[1]), seeds, out,
    )
    return out


def _summary(row: np.ndarray, horizon: float) -> RunSummary:
    # the time extent of a surviving run is cut at the horizon
    extinct = bool(row[EXTINCT])
    return RunSummary(
        pi1=int(row[PI1]),
        pi2=int(row[PI2]),
        t_cumulative=float(row[TCUM]),
        extinction_time=float(row[EXT_TIME]) if extinct else None,
        max_space=int(row[MAX_SPACE]),
        max_time=float(row[EXT_TIME]) if extinct else horizon,
        extinct=extinct,
        hit_boundary=bool(row[HIT_EDGE]),
    )


def _check_single_source(params: SimParams):
    if params.boundary is Boundary.SYMPTOMATIC_FROZEN:
        raise ValueError("single-source runs need a healthy_frozen or periodic boundary")


def run_single_source_batch(params: SimParams, seeds) -> list[RunSummary]:
    _check_single_source(params)
    out = simulate_raw(params, seeds)
    return [_summary(row, params.horizon) for row in out]


def single_source_arrays(params: SimParams, seeds) -> dict[str, np.ndarray]:
    """Column arrays of the single-source observables (fast path for statistics)."""
    _check_single_source(params)
    out = simulate_raw(params, seeds)
    extinct = out[:, EXTINCT] > 0
    return {
        "pi1": out[:, PI1].astype(np.int64),
        "pi2": out[:, PI2].astype(np.int64),
        "t_cumulative": out[:, TCUM],
        "extinction_time": out[:, EXT_TIME],
        "max_space": out[:, MAX_SPACE].astype(np.int64),
        "max_time": np.where(extinct, out[:, EXT_TIME], params.horizon),
        "extinct": extinct,
        "hit_boundary": out[:, HIT_EDGE] > 0,
    }


def run_single_source(params: SimParams, rng: np.random.Generator) -> RunSummary:
    """One run from a single symptomatic site at the origin."""
    return run_single_source_batch(params, [draw_seed(rng)])[0]


def block_params(geom: BlockGeometry, params: SimParams) -> SimParams:
    """The simulation parameters of block B: box [-2K,2K]^d over [0, 2K]."""
    return SimParams(
        d=geom.d, half_width=2 * geom.k, lambda1=params.lambda1, lambda2=params.lambda2,
        gamma=params.gamma, boundary=params.boundary, horizon=2.0 * geom.k, seed=params.seed,
    )


def run_block_batch(geom: BlockGeometry, params: SimParams, seeds, initial="all_symptomatic") -> list[BlockOutcome]:
    """Simulate block B from ``initial`` (its bottom) and measure H and the entry points."""
    if params.d != geom.d:
        raise ValueError("geometry and parameters disagree on d")
    bp = block_params(geom, params)
    lat = Lattice.for_params(bp)
    k = geom.k
    peri = lat.supnorm == 2 * k
    amask = lat.supnorm <= k
    out = simulate_raw(bp, seeds, initial=initial, lattice=lat, peri=peri, amask=amask, a_window=(float(k), 2.0 * k))
    return [
        BlockOutcome(
            healthy_block=not bool(row[A_HIT]),
            card_lambda_minus=int(row[LAM_MINUS]),
            card_lambda_plus=int(row[LAM_PLUS]),
            card_union=int(row[LAM_MINUS] + row[LAM_PLUS] - row[PERI0]),
        )
        for row in out
    ]


def run_block_experiment(geom: BlockGeometry, params: SimParams, rng: np.random.Generator, initial="all_symptomatic") -> BlockOutcome:
    return run_block_batch(geom, params, [draw_seed(rng)], initial=initial)[0]
