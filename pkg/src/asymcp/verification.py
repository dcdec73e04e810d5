"""Acceptance checks shared by ``asymcp verify`` and the test suite.

Every check takes a master seed and a ``scale`` factor on its sample sizes
(1.0 is the full size) and returns a :class:`CheckResult` made of named
sub-checks. Check ``i`` draws from the stream ``derive_seed(seed, i)`` only, so
checks are independent of each other and of the order they run in.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import branching as br
from . import meanfield as mf
from . import percolation as perc
from .lattice_sim import (
    BlockGeometry,
    Boundary,
    SimParams,
    exact_small_lattice_oracle,
    run_block_batch,
    single_source_arrays,
)
from .rng import derive_seed, derive_seeds, make_rng
from .stats import dominance_check, fit_decay_slope, tail_curve, wilson_interval


@dataclass
class SubCheck:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class CheckResult:
    criterion: int
    name: str
    subchecks: list[SubCheck]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.subchecks)

    def add(self, name: str, passed: bool, **detail) -> None:
        self.subchecks.append(SubCheck(name, bool(passed), detail))

    def lines(self) -> list[str]:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion}. {self.name}"
        return [head] + [
            f"    [{'pass' if s.passed else 'FAIL'}] {s.name}: {json.dumps(s.detail, sort_keys=True)}"
            for s in self.subchecks
        ]


def _size(n: int, scale: float, floor: int = 200) -> int:
    return max(int(round(n * scale)), min(n, floor))


def _rng(seed: int, criterion: int, sub: int = 0) -> np.random.Generator:
    return make_rng(derive_seed(derive_seed(seed, criterion), sub))


def _seeds(seed: int, criterion: int, sub: int, count: int) -> np.ndarray:
    return derive_seeds(derive_seed(derive_seed(seed, criterion), sub), 0, count)


# --------------------------------------------------------------------------
# 1-3: branching


def check_offspring_law(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(1, "offspring law", [])
    n = _size(10**5, scale)
    for i, (d, g) in enumerate([(1, 0.1), (1, 0.3), (1, 1.0), (2, 0.1)]):
        p = br.GWParams(d, g)
        y = br.sample_offspring(p, _rng(seed, 1, i), size=n)
        se = y.std(ddof=1) / math.sqrt(n)
        mean = br.offspring_mean(p)
        res.add(f"mean d={d} gamma={g}", abs(y.mean() - mean) <= 3 * se,
                empirical=float(y.mean()), exact=mean, se=float(se))
        gaps = {s: abs(float(np.mean(np.power(s, y.astype(float)))) - br.pgf_offspring(s, p)) for s in (0.0, 0.25, 0.5, 0.75)}
        worst = max(gaps.values())
        res.add(f"pgf d={d} gamma={g}", worst <= 0.01, max_abs_gap=worst)
    return res


SUBCRITICAL = [(1, 0.1), (1, 0.2), (2, 0.1), (3, 0.05)]


def check_progeny_pgf(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(2, "progeny pgf", [])
    grid = [i / 20 for i in range(21)]
    worst_res, worst_one, worst_der = 0.0, 0.0, 0.0
    for d, g in SUBCRITICAL:
        p = br.GWParams(d, g)
        for s in grid:
            x = br.solve_progeny_pgf(s, p)
            worst_res = max(worst_res, abs(x - s * br.pgf_offspring(x, p)))
        worst_one = max(worst_one, abs(br.solve_progeny_pgf(1.0, p) - 1.0))
        h = 1e-5
        der = (br.solve_progeny_pgf(1 + h, p) - br.solve_progeny_pgf(1 - h, p)) / (2 * h)
        worst_der = max(worst_der, abs(der - br.progeny_mean(p)))
    res.add("fixed-point residual on s-grid", worst_res <= 1e-10, max_residual=worst_res)
    res.add("G(1) = 1", worst_one <= 1e-8, max_abs_error=worst_one)
    res.add("G'(1) = closed-form mean", worst_der <= 1e-3, max_abs_error=worst_der)

    n = _size(10**6, scale)
    p = br.GWParams(1, 0.1)
    prog, _, capped = br.simulate_progeny_batch(p, n, _rng(seed, 2))
    se = prog.std(ddof=1) / math.sqrt(n)
    res.add("E(progeny) d=1 gamma=0.1", abs(prog.mean() - 11 / 7) <= 3 * se and not capped.any(),
            empirical=float(prog.mean()), exact=11 / 7, se=float(se))
    return res


def check_exponential_tails(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(3, "exponential tails", [])
    n = _size(10**5, scale)
    ks = np.arange(1, 16)
    p = br.GWParams(1, 0.2)
    cert = br.tail_certificate(p)
    prog, _, _ = br.simulate_progeny_batch(p, n, _rng(seed, 3, 0))
    spatial = single_source_arrays(SimParams(d=1, half_width=100, gamma=0.2), _seeds(seed, 3, 1, n))
    for label, sample, bound in (
        ("progeny", prog, cert),
        ("spatial pi1", spatial["pi1"], br.infected_tail_certificate(p, cert)),
    ):
        tail = tail_curve(sample, ks)
        fit = fit_decay_slope(zip(ks, tail))
        res.add(f"{label} decay fit", fit.slope < 0 and fit.r2 >= 0.95, slope=fit.slope, r2=fit.r2)
        over = tail - bound.bound(ks)
        res.add(f"{label} under certificate", bool((over <= 0).all()),
                c=bound.c, s=bound.s, max_excess=float(over.max()))
    return res


# --------------------------------------------------------------------------
# 4, 5, 7, 8: spatial process


def check_domination(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(4, "stochastic domination", [])
    n = _size(10**4, scale)
    for i, (d, g) in enumerate([(1, 0.1), (1, 0.2), (2, 0.1), (2, 0.2)]):
        sp = SimParams(d=d, half_width=100 if d == 1 else 40, gamma=g)
        pi2 = single_source_arrays(sp, _seeds(seed, 4, 2 * i, n))["pi2"]
        prog, _, _ = br.simulate_progeny_batch(br.GWParams(d, g), n, _rng(seed, 4, 2 * i + 1))
        rep = dominance_check(pi2, prog)
        res.add(f"d={d} gamma={g}", rep["holds"], max_violation=rep["max_violation"], worst_k=rep["worst_k"])
    return res


def oracle_grid() -> list[tuple[int, float, float, float]]:
    vals = (0.0, 0.5, 1.0)
    return [(n, l1, l2, g) for n in (1, 2, 3, 4) for l1 in vals for l2 in vals for g in vals]


def check_oracle_equivalence(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(5, "exact oracle equivalence", [])
    n = _size(10**5, scale)
    worst_p = worst_t = 0.0
    fails = []
    for i, (sites, l1, l2, g) in enumerate(oracle_grid()):
        sp = SimParams(d=1, lambda1=l1, lambda2=l2, gamma=g, path_sites=sites)
        exact = exact_small_lattice_oracle(sp)
        a = single_source_arrays(sp, _seeds(seed, 5, i, n))
        p_hat = float(a["extinct"].mean())
        p = exact.extinction_prob_by_horizon
        se_p = math.sqrt(p * (1 - p) / n)
        z_p = abs(p_hat - p) / se_p if se_p > 0 else (0.0 if p_hat == p else math.inf)
        times = a["extinction_time"][a["extinct"]]
        se_t = times.std(ddof=1) / math.sqrt(times.size)
        z_t = abs(times.mean() - exact.mean_extinction_time) / se_t if se_t > 0 else math.inf
        worst_p, worst_t = max(worst_p, z_p), max(worst_t, z_t)
        if z_p > 3 or z_t > 3:
            fails.append({"sites": sites, "lambda1": l1, "lambda2": l2, "gamma": g, "z_prob": z_p, "z_time": z_t})
    res.add("extinction probability within 3 SE", worst_p <= 3, configs=len(oracle_grid()), max_z=worst_p)
    res.add("mean extinction time within 3 SE", worst_t <= 3, configs=len(oracle_grid()), max_z=worst_t,
            failures=fails)
    return res


def check_extinction_phase(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(7, "extinction phase", [])
    n = _size(10**4, scale)
    ks = np.arange(1, 13)
    for i, l1 in enumerate((0.0, 0.02)):
        sp = SimParams(d=1, half_width=100, lambda1=l1, gamma=0.2, horizon=1e3)
        a = single_source_arrays(sp, _seeds(seed, 7, i, n))
        res.add(f"all extinct lambda1={l1}", bool(a["extinct"].all() and not a["hit_boundary"].any()),
                extinct=int(a["extinct"].sum()), runs=n)
        fit = fit_decay_slope(zip(ks, tail_curve(a["max_space"], ks)))
        res.add(f"spatial extent tail lambda1={l1}", fit.slope < 0 and fit.r2 >= 0.9, slope=fit.slope, r2=fit.r2)
    return res


def check_block_events(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(8, "block events", [])
    n = _size(10**3, scale)
    sp = SimParams(d=1, lambda1=0.0, gamma=0.2, boundary=Boundary.SYMPTOMATIC_FROZEN)
    rows = []
    for i, k in enumerate((2, 4, 6, 8)):
        geom = BlockGeometry(k, 1)
        out = run_block_batch(geom, sp, _seeds(seed, 8, i, n), initial="all_symptomatic")
        h = sum(o.healthy_block for o in out)
        lo, hi = wilson_interval(h, n)
        minus_ok = all(o.card_lambda_minus <= geom.bottom_size for o in out)
        big = sum(o.card_union > 3 * geom.m_bound for o in out) / n
        rows.append((k, h / n, lo, hi, minus_ok, big))
    mono = all(b[1] >= a[1] or b[3] >= a[2] for a, b in zip(rows, rows[1:]))
    res.add("P(H) nondecreasing in K", mono, p_hat={str(r[0]): r[1] for r in rows})
    k8 = rows[-1]
    res.add("P(H) >= 0.9 at K=8", k8[1] >= 0.9, p_hat=k8[1], ci=[k8[2], k8[3]])
    res.add("card(lambda_minus) <= (4K+1)^d", all(r[4] for r in rows))
    res.add("P(card(union) > 3M) <= 0.01", all(r[5] <= 0.01 for r in rows), p_hat={str(r[0]): r[5] for r in rows})
    return res


# --------------------------------------------------------------------------
# 6: mean field


def check_mean_field(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(6, "mean-field threshold", [])
    lam = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0]
    gam = [0.0, 0.5, 1.0]
    grid = [(a, b, g) for a in lam for b in lam for g in gam]
    mismatch = 0
    targets = []
    for a, b, g in grid:
        p = mf.MFParams(a, b, g)
        rep = mf.interior_fixed_point(p)
        mismatch += (rep.point is not None) != mf.threshold_check(p)
        att = mf.predicted_attractor(p)
        targets.append((att.u1, att.u2))
    res.add("interior point iff threshold", mismatch == 0, grid_points=len(grid), mismatches=mismatch)

    starts = np.tile([0.1, 0.1], (len(grid), 1))
    arr = np.array(grid)
    final = mf.integrate_final(starts, arr[:, 0], arr[:, 1], arr[:, 2], 200.0, 0.01)
    dist = np.hypot(*(final - np.array(targets)).T)
    bad = [list(grid[j]) for j in np.flatnonzero(dist > 1e-6)]
    res.add("converges to attractor within 1e-6 by t=200", not bad,
            max_distance=float(dist.max()), failing_points=len(bad), examples=bad[:5])

    _, traj = mf.integrate(mf.MFState(0.1, 0.1), mf.MFParams(0.0, 3.0, 1.0), 200.0)
    err = float(np.abs(traj[-1] - 1 / 6).max())
    res.add("(0,3,1) -> (1/6,1/6)", err <= 1e-8, max_abs_error=err)
    return res


# --------------------------------------------------------------------------
# 9: percolation


def brute_force_path_count(n: int, d: int) -> int:
    """Count directed self-avoiding paths by trying every move sequence."""
    moves = []
    for axis in range(d):
        for step in (1, -1):
            moves.append(tuple(step if j == axis else 0 for j in range(d + 1)))
    moves.append((0,) * d + (1,))
    total = 0
    for seq in itertools.product(moves, repeat=n):
        here = (0,) * (d + 1)
        seen = {here}
        for mv in seq:
            here = tuple(a + b for a, b in zip(here, mv))
            if here in seen:
                break
            seen.add(here)
        else:
            total += 1
    return total


def check_percolation(seed: int, scale: float = 1.0) -> CheckResult:
    res = CheckResult(9, "percolation combinatorics", [])
    bad = [(n, d) for d in (1, 2) for n in range(7)
           if perc.count_directed_sa_paths(n, d).count != brute_force_path_count(n, d)]
    res.add("path counts match brute force (n<=6, d<=2)", not bad, mismatches=bad)

    worst_margin = math.inf
    ok = True
    for n in range(7):
        for path in perc.iter_directed_sa_paths(n, 1):
            kept = perc.extract_two_separated(path, 1)
            sep = all(perc.separation(a, b) > 2 for a, b in itertools.combinations(kept, 2))
            need = math.ceil((n + 1) / 25)
            ok &= sep and set(kept) <= set(path) and len(kept) >= need
            worst_margin = min(worst_margin, len(kept) - need)
    res.add("extraction guarantee for all d=1 paths (n<=6)", ok, min_size_margin=worst_margin)

    worst = 0.0
    for d in (1, 2, 3):
        for n in range(1, 101):
            got = perc.log_closed_path_bound(n, d, log_epsilon=perc.halving_log_epsilon(d))
            want = -n * math.log(2)
            worst = max(worst, abs(got - want) / abs(want))
    res.add("bound equals 2^-n in log space (n<=100, d<=3)", worst <= 1e-9, max_rel_error=worst)
    return res


# --------------------------------------------------------------------------


CHECKS = {
    1: check_offspring_law,
    2: check_progeny_pgf,
    3: check_exponential_tails,
    4: check_domination,
    5: check_oracle_equivalence,
    6: check_mean_field,
    7: check_extinction_phase,
    8: check_block_events,
    9: check_percolation,
}

REPRO_SCALE = 0.01


def report_text(results: list[CheckResult]) -> str:
    return "".join(line + "\n" for r in results for line in r.lines())


def run_checks(seed: int, scale: float = 1.0, criteria=None) -> list[CheckResult]:
    """Run the numbered checks; criterion 10 reruns 1-9 at a small scale twice."""
    wanted = sorted(criteria) if criteria else [*CHECKS, 10]
    out = []
    for c in wanted:
        if c == 10:
            out.append(check_reproducibility(seed))
        elif c in CHECKS:
            out.append(CHECKS[c](seed, scale))
        else:
            raise ValueError(f"unknown criterion {c}")
    return out


def check_reproducibility(seed: int, scale: float = REPRO_SCALE) -> CheckResult:
    res = CheckResult(10, "reproducibility", [])
    first = report_text(run_checks(seed, scale, list(CHECKS)))
    second = report_text(run_checks(seed, scale, list(CHECKS)))
    res.add("two in-process verify runs are byte-identical", first == second, scale=scale, bytes=len(first))
    return res
