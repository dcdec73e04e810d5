"""Mean-field ODE for the densities of asymptomatic (u1) and symptomatic (u2) sites.

    u1' = (lambda1 u1 + lambda2 u2)(1 - u1 - u2) - (gamma + 1) u1
    u2' = gamma u1 - u2

An epidemic (an interior fixed point) exists iff lambda1 + gamma lambda2 > 1 + gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-9


class SimplexViolation(ArithmeticError):
    def __init__(self, time: float, state):
        super().__init__(f"trajectory left the simplex at t={time:.6g}: {state}")
        self.time = time
        self.state = state


@dataclass(frozen=True)
class MFParams:
    lambda1: float
    lambda2: float
    gamma: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "gamma"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class MFState:
    u1: float
    u2: float

    def in_simplex(self, tol: float = SIMPLEX_TOL) -> bool:
        return self.u1 >= -tol and self.u2 >= -tol and self.u1 + self.u2 <= 1 + tol

    def distance(self, other: "MFState") -> float:
        return math.hypot(self.u1 - other.u1, self.u2 - other.u2)


@dataclass(frozen=True)
class FixedPointReport:
    """Interior fixed point, or ``point=None`` with the origin's spectrum."""

    point: MFState | None
    eigen_real_parts: tuple[float, float]
    stable: bool


def _field(u1, u2, l1, l2, g):
    # works on floats and on numpy arrays alike
    return (l1 * u1 + l2 * u2) * (1.0 - u1 - u2) - (g + 1.0) * u1, g * u1 - u2


def mf_derivative(state: MFState, params: MFParams) -> tuple[float, float]:
    return _field(state.u1, state.u2, params.lambda1, params.lambda2, params.gamma)


def threshold_check(params: MFParams) -> bool:
    return params.lambda1 + params.gamma * params.lambda2 > 1.0 + params.gamma


def _rk4(u1, u2, l1, l2, g, dt):
    a1, a2 = _field(u1, u2, l1, l2, g)
    b1, b2 = _field(u1 + 0.5 * dt * a1, u2 + 0.5 * dt * a2, l1, l2, g)
    c1, c2 = _field(u1 + 0.5 * dt * b1, u2 + 0.5 * dt * b2, l1, l2, g)
    e1, e2 = _field(u1 + dt * c1, u2 + dt * c2, l1, l2, g)
    return (
        u1 + dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + e1),
        u2 + dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + e2),
    )


def _steps(t_end: float, dt: float) -> tuple[int, float]:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    n = max(int(math.ceil(t_end / dt - 1e-9)), 1) if t_end > 0 else 0
    return n, (t_end / n if n else dt)


def integrate(start: MFState, params: MFParams, t_end: float, dt: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 trajectory; returns ``(times, states)`` with states of shape (n+1, 2).

    The step is shrunk slightly if needed so the last time is exactly
    ``t_end``. Raises :class:`SimplexViolation` instead of clamping.
    """
    if not start.in_simplex():
        raise ValueError(f"start {start} is not in the simplex")
    n, h = _steps(t_end, dt)
    l1, l2, g = params.lambda1, params.lambda2, params.gamma
    out = np.empty((n + 1, 2))
    u1, u2 = float(start.u1), float(start.u2)
    out[0] = u1, u2
    for i in range(1, n + 1):
        u1, u2 = _rk4(u1, u2, l1, l2, g, h)
        if u1 < -SIMPLEX_TOL or u2 < -SIMPLEX_TOL or u1 + u2 > 1.0 + SIMPLEX_TOL:
            raise SimplexViolation(i * h, (u1, u2))
        out[i] = u1, u2
    return np.linspace(0.0, n * h, n + 1), out


def integrate_final(starts: np.ndarray, lambda1, lambda2, gamma, t_end: float, dt: float = 0.01) -> np.ndarray:
    """Final states of many trajectories at once (one per row of ``starts``).

    Parameters broadcast against the rows; the same simplex check applies.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n, h = _steps(t_end, dt)
    u1, u2 = starts[:, 0].copy(), starts[:, 1].copy()
    l1, l2, g = (np.broadcast_to(np.asarray(v, dtype=float), u1.shape) for v in (lambda1, lambda2, gamma))
    for i in range(1, n + 1):
        u1, u2 = _rk4(u1, u2, l1, l2, g, h)
        bad = (u1 < -SIMPLEX_TOL) | (u2 < -SIMPLEX_TOL) | (u1 + u2 > 1.0 + SIMPLEX_TOL)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise SimplexViolation(i * h, (u1[j], u2[j]))
    return np.column_stack([u1, u2])


def jacobian(point: MFState, params: MFParams) -> np.ndarray:
    l1, l2, g = params.lambda1, params.lambda2, params.gamma
    u1, u2 = point.u1, point.u2
    free = 1.0 - u1 - u2
    force = l1 * u1 + l2 * u2
    return np.array([[l1 * free - force - (g + 1.0), l2 * free - force], [g, -1.0]])


def jacobian_stability(point: MFState, params: MFParams) -> tuple[float, float]:
    """Real parts of the Jacobian eigenvalues at ``point``, ascending."""
    re = np.sort(np.linalg.eigvals(jacobian(point, params)).real)
    return float(re[0]), float(re[1])


def interior_fixed_point(params: MFParams, tol: float = 1e-12) -> FixedPointReport:
    """Bisect for the interior equilibrium along u2 = gamma u1.

    Dividing u1' = 0 by u1 leaves
    h(u) = (lambda1 + gamma lambda2)(1 - (1+gamma) u) - (1+gamma),
    decreasing on [0, 1/(1+gamma)] with h(1/(1+gamma)) < 0, so a root exists
    iff h(0) > 0.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    g = params.gamma
    force = params.lambda1 + g * params.lambda2

    def h(u):
        return force * (1.0 - (1.0 + g) * u) - (1.0 + g)

    if not h(0.0) > 0:
        origin = MFState(0.0, 0.0)
        re = jacobian_stability(origin, params)
        return FixedPointReport(None, re, re[1] < 0)
    lo, hi = 0.0, 1.0 / (1.0 + g)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    point = MFState(u, g * u)
    re = jacobian_stability(point, params)
    return FixedPointReport(point, re, re[1] < 0)


def predicted_attractor(params: MFParams) -> MFState:
    rep = interior_fixed_point(params)
    return rep.point if rep.point is not None else MFState(0.0, 0.0)
