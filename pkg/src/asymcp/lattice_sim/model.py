"""Parameters, lattice geometry and configurations for the spatial process."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

INFINITY = math.inf

HEALTHY, ASYMPTOMATIC, SYMPTOMATIC = 0, 1, 2


class Boundary(str, enum.Enum):
    HEALTHY_FROZEN = "healthy_frozen"
    PERIODIC = "periodic"
    SYMPTOMATIC_FROZEN = "symptomatic_frozen"


@dataclass(frozen=True)
class SimParams:
    """Spatial process on the box [-half_width, half_width]^d.

    ``lambda2`` may be ``INFINITY``: healthy sites next to a symptomatic site
    are then infected instantly. ``path_sites`` replaces the box by a d = 1
    path of that many sites (used for exact small-lattice comparisons).
    """

    d: int = 1
    half_width: int = 100
    lambda1: float = 0.0
    lambda2: float = INFINITY
    gamma: float = 0.2
    boundary: Boundary = Boundary.HEALTHY_FROZEN
    horizon: float = 1e3
    seed: int = 0
    path_sites: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if int(self.half_width) != self.half_width or self.half_width < 1:
            raise ValueError(f"half_width must be a positive integer, got {self.half_width!r}")
        for name in ("lambda1", "gamma"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not self.lambda2 >= 0:
            raise ValueError(f"lambda2 must be >= 0 or INFINITY, got {self.lambda2!r}")
        if not (self.horizon > 0):
            raise ValueError(f"horizon must be > 0, got {self.horizon!r}")
        if self.path_sites is not None and (self.d != 1 or self.path_sites < 1):
            raise ValueError("path_sites requires d = 1 and at least one site")

    @property
    def lambda2_infinite(self) -> bool:
        return math.isinf(self.lambda2)

    @property
    def exterior_state(self) -> int:
        return SYMPTOMATIC if self.boundary is Boundary.SYMPTOMATIC_FROZEN else HEALTHY


class Lattice:
    """Finite piece of Z^d with a neighbour table.

    Sites are numbered in C order over the shape; ``coords[i]`` is site ``i``
    relative to the origin. ``nbr[i, k]`` is the k-th neighbour (directions
    +e_1, -e_1, +e_2, ...) or -1 when it lies outside a non-periodic lattice.
    """

    def __init__(self, d: int, shape: tuple[int, ...], origin: tuple[int, ...], periodic: bool = False):
        self.d = d
        self.shape = tuple(shape)
        self.origin = tuple(origin)
        self.periodic = periodic
        self.n = int(np.prod(shape))
        grid = np.array(list(itertools.product(*[range(s) for s in shape])), dtype=np.int64).reshape(self.n, d)
        self.coords = grid - np.array(origin, dtype=np.int64)
        self.supnorm = np.abs(self.coords).max(axis=1)
        strides = np.array([int(np.prod(shape[i + 1 :])) for i in range(d)], dtype=np.int64)

        nbr = np.full((self.n, 2 * d), -1, dtype=np.int64)
        for axis in range(d):
            for k, step in enumerate((1, -1)):
                moved = grid[:, axis] + step
                if periodic:
                    moved %= shape[axis]
                    ok = np.ones(self.n, dtype=bool)
                else:
                    ok = (moved >= 0) & (moved < shape[axis])
                target = grid.copy()
                target[:, axis] = moved
                nbr[ok, 2 * axis + k] = (target[ok] * strides).sum(axis=1)
        self.nbr = nbr
        self._index = {tuple(c): i for i, c in enumerate(self.coords.tolist())}

    @classmethod
    def for_params(cls, params: SimParams) -> "Lattice":
        periodic = params.boundary is Boundary.PERIODIC
        if params.path_sites is not None:
            n = params.path_sites
            return cls(1, (n,), ((n - 1) // 2,), periodic)
        w = 2 * params.half_width + 1
        return cls(params.d, (w,) * params.d, (params.half_width,) * params.d, periodic)

    def index(self, site) -> int:
        key = tuple(int(c) for c in np.atleast_1d(site))
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"site {key} is outside the lattice") from None

    @property
    def origin_index(self) -> int:
        return self._index[(0,) * self.d]

    @property
    def edge_mask(self) -> np.ndarray:
        """Sites with at least one neighbour slot outside the lattice."""
        return (self.nbr < 0).any(axis=1)


@dataclass
class Configuration:
    """States indexed by lattice site, plus time and transition counters."""

    lattice: Lattice
    states: np.ndarray
    time: float = 0.0
    pi1: int = 0
    pi2: int = 0

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(c): int(s) for c, s in zip(self.lattice.coords.tolist(), self.states)}

    def infected(self) -> np.ndarray:
        return np.flatnonzero(self.states)


@dataclass(frozen=True)
class RunSummary:
    pi1: int
    pi2: int
    t_cumulative: float
    extinction_time: float | None
    max_space: int
    max_time: float
    extinct: bool
    hit_boundary: bool = False

    CSV_FIELDS = ("pi1", "pi2", "t_cumulative", "extinction_time", "max_space", "max_time", "extinct")


@dataclass(frozen=True)
class BlockGeometry:
    """Blocks A = [-K,K]^d x [K,2K] inside B = [-2K,2K]^d x [0,2K]."""

    k: int
    d: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"K must be a positive integer, got {self.k!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")

    @property
    def m_bound(self) -> int:
        k, d = self.k, self.d
        return 4 * d * k * (4 * k + 1) ** (d - 1)

    def block_a(self, m=None, n: int = 0):
        """Space-time box of A_{m,n} as (spatial lows, spatial highs, t_low, t_high)."""
        m = np.zeros(self.d, dtype=int) if m is None else np.asarray(m)
        c = 2 * m * self.k
        return c - self.k, c + self.k, n * self.k + self.k, n * self.k + 2 * self.k

    def block_b(self, m=None, n: int = 0):
        m = np.zeros(self.d, dtype=int) if m is None else np.asarray(m)
        c = 2 * m * self.k
        return c - 2 * self.k, c + 2 * self.k, n * self.k, n * self.k + 2 * self.k

    @property
    def bottom_size(self) -> int:
        return (4 * self.k + 1) ** self.d


@dataclass(frozen=True)
class BlockOutcome:
    healthy_block: bool
    card_lambda_minus: int
    card_lambda_plus: int
    card_union: int = field(default=0, compare=False)

    CSV_FIELDS = ("healthy_block", "card_lambda_minus", "card_lambda_plus")


def _neighbour_states(config: Configuration, x: int, exterior: int) -> np.ndarray:
    nb = config.lattice.nbr[x]
    return np.where(nb >= 0, config.states[np.maximum(nb, 0)], exterior)


def apply_closure(config: Configuration, params: SimParams, candidates=None) -> list[int]:
    """Infect every healthy site that touches a symptomatic site (lambda2 = inf).

    The affected set is collected first and flipped afterwards. Newly created
    asymptomatic sites cannot trigger further flips, so one sweep suffices.
    Returns the flipped site indices; each counts as a 0 -> 1 transition.
    """
    if not params.lambda2_infinite:
        return []
    lat = config.lattice
    ext = params.exterior_state
    sites = range(lat.n) if candidates is None else candidates
    flip = sorted(
        {x for x in sites if config.states[x] == HEALTHY and (_neighbour_states(config, x, ext) == SYMPTOMATIC).any()}
    )
    for x in flip:
        config.states[x] = ASYMPTOMATIC
    config.pi1 += len(flip)
    return flip


def init_state(
    params: SimParams,
    initial="single_symptomatic_at_origin",
    lattice: Lattice | None = None,
    closure: bool = True,
) -> Configuration:
    """Configuration at time 0.

    ``initial`` is ``"single_symptomatic_at_origin"``, ``"all_healthy"``,
    ``"all_symptomatic"`` or a mapping from site coordinates to states (sites
    left out are healthy).
    """
    lat = lattice or Lattice.for_params(params)
    states = np.zeros(lat.n, dtype=np.int8)
    if isinstance(initial, str):
        if initial == "single_symptomatic_at_origin":
            states[lat.origin_index] = SYMPTOMATIC
        elif initial == "all_symptomatic":
            states[:] = SYMPTOMATIC
        elif initial != "all_healthy":
            raise ValueError(f"unknown initial description {initial!r}")
    elif isinstance(initial, Mapping):
        for site, s in initial.items():
            if s not in (HEALTHY, ASYMPTOMATIC, SYMPTOMATIC):
                raise ValueError(f"illegal state {s!r} at {site}")
            states[lat.index(site)] = s
    else:
        states[:] = np.asarray(initial, dtype=np.int8)
        if states.shape != (lat.n,) or not np.isin(states, (0, 1, 2)).all():
            raise ValueError("explicit state array must hold one state in {0,1,2} per site")
    config = Configuration(lat, states, 0.0, 0, int((states == SYMPTOMATIC).sum()))
    if closure:
        apply_closure(config, params)
    return config
