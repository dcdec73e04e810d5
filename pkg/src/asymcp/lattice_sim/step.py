"""Reference next-event step on a Configuration.

This is the slow, literal version of the dynamics: every site's transition
rates are recomputed from its neighbourhood before each event. The compiled
engine in :mod:`asymcp.lattice_sim.engine` uses clock thinning instead and is
checked against this module and against the exact small-lattice solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ASYMPTOMATIC, HEALTHY, SYMPTOMATIC, Configuration, SimParams, apply_closure

KINDS = ("infect1", "infect2", "onset", "recover")


class _Absorbed:
    def __repr__(self):
        return "ABSORBED"

    def __bool__(self):
        return False


ABSORBED = _Absorbed()


@dataclass(frozen=True)
class StepEvent:
    time: float
    site: tuple[int, ...]
    kind: str
    closure: tuple[tuple[int, ...], ...] = ()


def site_rates(config: Configuration, params: SimParams) -> np.ndarray:
    """(n_sites, 4) array of rates for infect1, infect2, onset, recover."""
    lat = config.lattice
    st = config.states
    ext = params.exterior_state
    nb_states = np.where(lat.nbr >= 0, st[np.maximum(lat.nbr, 0)], ext)
    two_d = 2 * lat.d
    healthy = st == HEALTHY
    rates = np.zeros((lat.n, 4))
    rates[:, 0] = np.where(healthy, params.lambda1 * (nb_states == ASYMPTOMATIC).sum(axis=1) / two_d, 0.0)
    if not params.lambda2_infinite:
        rates[:, 1] = np.where(healthy, params.lambda2 * (nb_states == SYMPTOMATIC).sum(axis=1) / two_d, 0.0)
    rates[:, 2] = np.where(st == ASYMPTOMATIC, params.gamma, 0.0)
    rates[:, 3] = np.where(st != HEALTHY, 1.0, 0.0)
    return rates


def gillespie_step(config: Configuration, params: SimParams, rng: np.random.Generator):
    """Advance ``config`` in place by one event; return the event or ABSORBED."""
    rates = site_rates(config, params)
    total = rates.sum()
    if total <= 0.0:
        return ABSORBED
    config.time += rng.exponential(1.0 / total)
    flat = np.cumsum(rates.ravel())
    pick = min(int(np.searchsorted(flat, rng.random() * flat[-1], side="right")), flat.size - 1)
    while rates.ravel()[pick] == 0.0:
        pick -= 1
    x, kind = divmod(pick, 4)

    lat = config.lattice
    closure: list[int] = []
    if kind in (0, 1):
        config.states[x] = ASYMPTOMATIC
        config.pi1 += 1
    elif kind == 2:
        config.states[x] = SYMPTOMATIC
        config.pi2 += 1
        closure = apply_closure(config, params, [y for y in lat.nbr[x] if y >= 0])
    else:
        config.states[x] = HEALTHY
        closure = apply_closure(config, params, [x])
    coords = lat.coords
    return StepEvent(
        time=config.time,
        site=tuple(coords[x].tolist()),
        kind=KINDS[kind],
        closure=tuple(tuple(coords[y].tolist()) for y in closure),
    )
