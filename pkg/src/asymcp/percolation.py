"""Oriented site percolation on Z^d x N.

Sites are tuples ``(m_1, ..., m_d, n)`` with level ``n >= 0``. From each site
there are 2d + 1 arrows: one to each spatial neighbour at the same level and
one to the site directly above.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

SiteL = tuple[int, ...]
PATH_BUDGET = 10**8


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PathReport:
    length: int
    count: int
    bound: float


def out_neighbors(site: SiteL, d: int) -> set[SiteL]:
    if len(site) != d + 1 or site[-1] < 0:
        raise ValueError(f"{site} is not a site of Z^{d} x N")
    out = set()
    for axis in range(d):
        for step in (1, -1):
            s = list(site)
            s[axis] += step
            out.add(tuple(s))
    out.add(site[:-1] + (site[-1] + 1,))
    return out


def _moves(d: int) -> list[SiteL]:
    moves = []
    for axis in range(d):
        for step in (1, -1):
            v = [0] * (d + 1)
            v[axis] = step
            moves.append(tuple(v))
    moves.append((0,) * d + (1,))
    return moves


def iter_directed_sa_paths(n: int, d: int) -> Iterator[list[SiteL]]:
    """All self-avoiding directed paths with ``n`` steps from the origin (DFS)."""
    moves = _moves(d)
    path: list[SiteL] = [(0,) * (d + 1)]
    seen = {path[0]}

    def extend(depth):
        if depth == n:
            yield list(path)
            return
        here = path[-1]
        for mv in moves:
            nxt = tuple(a + b for a, b in zip(here, mv))
            if nxt in seen:
                continue
            seen.add(nxt)
            path.append(nxt)
            yield from extend(depth + 1)
            path.pop()
            seen.remove(nxt)

    yield from extend(0)


def count_directed_sa_paths(n: int, d: int) -> PathReport:
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    if n * (2 * d + 1) ** n > PATH_BUDGET:
        raise BudgetExceeded(f"enumerating paths of length {n} in d={d} exceeds the budget")
    count = sum(1 for _ in iter_directed_sa_paths(n, d))
    return PathReport(length=n, count=count, bound=float((2 * d + 1) ** n))


def separation(a: SiteL, b: SiteL) -> int:
    """Sup-norm distance over all coordinates, level included."""
    return max(abs(x - y) for x, y in zip(a, b))


def extract_two_separated(path: Sequence[SiteL], d: int) -> list[SiteL]:
    """Greedy subset of ``path`` whose sites are pairwise more than 2 apart.

    Each kept site rules out at most 5^(d+1) sites of a self-avoiding path, so
    at least ceil((len(path)) / 5^(d+1)) sites survive.
    """
    kept: list[SiteL] = []
    for site in path:
        if len(site) != d + 1:
            raise ValueError(f"{site} is not a site of Z^{d} x N")
        if all(separation(site, k) > 2 for k in kept):
            kept.append(tuple(site))
    return kept


def halving_log_epsilon(d: int) -> float:
    """log of (4d+2)^(-5^(d+1)), the closed-site density that makes the bound 2^-n."""
    return -(5 ** (d + 1)) * math.log(4 * d + 2)


def log_closed_path_bound(n: int, d: int, epsilon: float | None = None, *, log_epsilon: float | None = None) -> float:
    if (epsilon is None) == (log_epsilon is None):
        raise ValueError("give exactly one of epsilon and log_epsilon")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    if log_epsilon is None:
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if epsilon == 0.0:
            return -math.inf
        log_epsilon = math.log(epsilon)
    return n * math.log(2 * d + 1) + n / 5 ** (d + 1) * log_epsilon


def closed_path_bound(n: int, d: int, epsilon: float | None = None, *, log_epsilon: float | None = None) -> float:
    """(2d+1)^n * epsilon^(n / 5^(d+1)), evaluated in log space."""
    return math.exp(log_closed_path_bound(n, d, epsilon, log_epsilon=log_epsilon))


# --------------------------------------------------------------------------
# random fields


@dataclass(frozen=True)
class PercField:
    """Closed sites of the box [-width, width]^d x {0, ..., levels - 1}.

    ``closed`` is indexed ``[m_1 + width, ..., m_d + width, n]``.
    """

    epsilon: float
    width: int
    levels: int
    closed: np.ndarray

    @property
    def d(self) -> int:
        return self.closed.ndim - 1

    def closed_sites(self) -> set[SiteL]:
        return {tuple(int(i) - self.width for i in idx[:-1]) + (int(idx[-1]),) for idx in np.argwhere(self.closed)}


def field_shape(d: int, width: int, levels: int) -> tuple[int, ...]:
    return (2 * width + 1,) * d + (levels,)


def sample_field(epsilon: float, d: int, width: int, levels: int, rng: np.random.Generator | None = None,
                 uniforms: np.ndarray | None = None) -> PercField:
    """I.i.d. field; pass the same ``uniforms`` to couple fields across epsilon."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if uniforms is None:
        uniforms = rng.random(field_shape(d, width, levels))
    return PercField(epsilon, width, levels, uniforms < epsilon)


def search_closed(field: PercField, source: SiteL | None = None) -> dict:
    """Breadth-first search along arrows through closed sites.

    Starts from every closed level-0 site (or from ``source`` only). Reports
    whether the top level is reached, the largest BFS depth (the length of a
    shortest, hence self-avoiding, closed path to the farthest reachable
    site) and the highest level reached (-1 when nothing is reachable).
    """
    closed = field.closed
    d = field.d
    w = field.width
    shape = closed.shape
    dist = np.full(shape, -1, dtype=np.int64)
    queue: deque = deque()
    if source is None:
        for idx in np.argwhere(closed[..., 0]):
            start = tuple(int(i) for i in idx) + (0,)
            dist[start] = 0
            queue.append(start)
    else:
        start = tuple(c + w for c in source[:-1]) + (source[-1],)
        if all(0 <= s < m for s, m in zip(start, shape)) and closed[start]:
            dist[start] = 0
            queue.append(start)
    moves = _moves(d)
    longest = -1
    top = -1
    while queue:
        here = queue.popleft()
        dh = dist[here]
        longest = max(longest, int(dh))
        top = max(top, here[-1])
        for mv in moves:
            nxt = tuple(a + b for a, b in zip(here, mv))
            if all(0 <= s < m for s, m in zip(nxt, shape)) and closed[nxt] and dist[nxt] < 0:
                dist[nxt] = dh + 1
                queue.append(nxt)
    return {
        "has_closed_path": top == field.levels - 1,
        "longest": longest,
        "max_level": top,
    }


def sample_field_and_search(epsilon: float, d: int, width: int, levels: int, rng: np.random.Generator) -> dict:
    return search_closed(sample_field(epsilon, d, width, levels, rng))
