"""Command-line front end.

    asymcp <mode> [--config FILE] [--seed N] [--replicas N] [--jobs N] [--out DIR]

``mode`` is one of simulate, branching, meanfield, percolation, block, verify.
The config file holds ``key=value`` lines (``#`` starts a comment); flags win
over the file. Each run writes ``<mode>.csv``, ``summary.json`` and
``timing.json`` into ``--out``. Only ``timing.json`` depends on the machine.

Exit codes: 0 success, 1 verification failure, 2 invalid config, 3 budget
exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import branching as br
from . import meanfield as mf
from . import percolation as perc
from . import verification
from .lattice_sim import BlockGeometry, Boundary, SimParams, run_block_batch, single_source_arrays
from .rng import MASK64, derive_seeds, make_rng
from .stats import wilson_interval

MODES = ("simulate", "branching", "meanfield", "percolation", "block", "verify")

CSV_HEADERS = {
    "simulate": ("replica", "pi1", "pi2", "t_cumulative", "extinction_time", "max_space", "max_time", "extinct"),
    "block": ("replica", "healthy_block", "card_lambda_minus", "card_lambda_plus"),
    "meanfield": ("t", "u1", "u2"),
    "branching": ("replica", "progeny", "generations", "capped"),
    "percolation_paths": ("n", "count", "bound"),
    "percolation_field": ("replica", "has_closed_path", "longest"),
    "verify": ("criterion", "name", "passed"),
}

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
CHUNK = 1000


class ConfigError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"invalid value for '{key}': {reason}")
        self.key = key


class BudgetError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# parameter schemas


def _int(lo=None):
    def conv(text):
        v = int(text)
        if lo is not None and v < lo:
            raise ValueError(f"must be an integer >= {lo}")
        return v
    return conv


def _real(lo=None, hi=None, strict=False, allow_inf=False):
    def conv(text):
        v = float(text)
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            raise ValueError("must be a finite number")
        if lo is not None and (v < lo or (strict and v == lo)):
            raise ValueError(f"must be {'>' if strict else '>='} {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return conv


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return conv


def _int_list(text):
    return sorted({int(t) for t in str(text).split(",") if t.strip()})


NONNEG = _real(0.0)
BOUNDARIES = tuple(b.value for b in Boundary)

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "simulate": {
        "d": (_int(1), 1), "half_width": (_int(1), 100), "lambda1": (NONNEG, 0.0),
        "lambda2": (_real(0.0, allow_inf=True), math.inf), "gamma": (NONNEG, 0.2),
        "boundary": (_choice(*BOUNDARIES), "healthy_frozen"), "horizon": (_real(0.0, strict=True), 1e3),
    },
    "branching": {"d": (_int(1), 1), "gamma": (NONNEG, 0.1), "cap": (_int(1), 10**6)},
    "meanfield": {
        "lambda1": (NONNEG, 0.0), "lambda2": (NONNEG, 3.0), "gamma": (NONNEG, 1.0),
        "u1": (_real(0.0, 1.0), 0.1), "u2": (_real(0.0, 1.0), 0.1),
        "t_end": (NONNEG, 200.0), "dt": (_real(0.0, strict=True), 0.01), "record_every": (_int(1), 1),
    },
    "percolation": {
        "kind": (_choice("paths", "field"), "paths"), "d": (_int(1), 1), "n_max": (_int(0), 6),
        "epsilon": (_real(0.0, 1.0), 0.1), "width": (_int(0), 20), "levels": (_int(1), 41),
    },
    "block": {
        "d": (_int(1), 1), "k": (_int(1), 4), "lambda1": (NONNEG, 0.0),
        "lambda2": (_real(0.0, allow_inf=True), math.inf), "gamma": (NONNEG, 0.2),
        "boundary": (_choice(*BOUNDARIES), "symptomatic_frozen"),
        "initial": (_choice("all_symptomatic", "all_healthy"), "all_symptomatic"),
    },
    "verify": {"scale": (_real(0.0, strict=True), 1.0), "criteria": (_int_list, "")},
}
COMMON = {
    "seed": (_int(0), 0), "replicas": (_int(1), 1000), "jobs": (_int(1), 1),
    "time_budget": (_real(0.0, strict=True), math.inf),
}


@dataclass
class ExperimentConfig:
    mode: str
    parameters: dict[str, Any]
    replicas: int = 1000
    seed: int = 0
    output_path: str = "."
    jobs: int = 1
    time_budget: float = math.inf


def read_config_file(path: str | Path) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return pairs


def build_config(mode: str, raw: dict[str, Any], output_path: str = ".") -> ExperimentConfig:
    """Validate every key against its schema; raises :class:`ConfigError`."""
    if mode not in SCHEMAS:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    schema = SCHEMAS[mode]
    values = {k: default for k, (_, default) in {**COMMON, **schema}.items()}
    for key, text in raw.items():
        if key not in schema and key not in COMMON:
            raise ConfigError(key, f"unknown key for mode {mode}")
        conv = (schema.get(key) or COMMON[key])[0]
        try:
            values[key] = conv(str(text).strip())
        except ValueError as exc:
            raise ConfigError(key, f"{exc} (got {text!r})") from None
    if values["seed"] > MASK64:
        raise ConfigError("seed", "must fit in 64 bits")
    params = {k: values[k] for k in schema}
    cfg = ExperimentConfig(mode, params, values["replicas"], values["seed"], output_path,
                           values["jobs"], values["time_budget"])
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ExperimentConfig) -> None:
    # module-level preconditions that involve more than one key
    p = cfg.parameters
    try:
        if cfg.mode == "simulate":
            sp = _sim_params(p)
            if sp.boundary is Boundary.SYMPTOMATIC_FROZEN:
                raise ConfigError("boundary", "single-source runs need healthy_frozen or periodic")
        elif cfg.mode == "block":
            BlockGeometry(p["k"], p["d"])
        elif cfg.mode == "meanfield":
            if not mf.MFState(p["u1"], p["u2"]).in_simplex():
                raise ConfigError("u2", "start must satisfy u1 + u2 <= 1")
        elif cfg.mode == "verify":
            bad = [c for c in p["criteria"] if c not in verification.CHECKS and c != 10]
            if bad:
                raise ConfigError("criteria", f"unknown criteria {bad}")
    except ConfigError:
        raise
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(key if key in p else "parameters", str(exc)) from None


def _sim_params(p) -> SimParams:
    return SimParams(d=p["d"], half_width=p.get("half_width", 100), lambda1=p["lambda1"], lambda2=p["lambda2"],
                     gamma=p["gamma"], boundary=p["boundary"], horizon=p.get("horizon", 1e3))


# --------------------------------------------------------------------------
# formatting


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


# --------------------------------------------------------------------------
# replica scheduling


def run_replicas(fn: Callable[[int, int], list], count: int, jobs: int, deadline: float) -> list:
    """Apply ``fn(start, stop)`` to chunks of ``range(count)``; rows come back in replica order."""
    chunks = [(a, min(a + CHUNK, count)) for a in range(0, count, CHUNK)]

    def work(chunk):
        if time.monotonic() > deadline:
            raise BudgetError("time budget exceeded")
        return fn(*chunk)

    if jobs == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, chunks))
    return [row for part in parts for row in part]


# --------------------------------------------------------------------------
# modes


def _mode_simulate(cfg: ExperimentConfig, deadline: float):
    sp = _sim_params(cfg.parameters)

    def chunk(a, b):
        arr = single_source_arrays(sp, derive_seeds(cfg.seed, a, b - a))
        ext = arr["extinct"]
        return [
            (a + i, arr["pi1"][i], arr["pi2"][i], arr["t_cumulative"][i],
             arr["extinction_time"][i] if ext[i] else None, arr["max_space"][i], arr["max_time"][i], ext[i])
            for i in range(b - a)
        ]

    rows = run_replicas(chunk, cfg.replicas, cfg.jobs, deadline)
    pi1 = np.array([r[1] for r in rows])
    pi2 = np.array([r[2] for r in rows])
    ext = np.array([r[7] for r in rows])
    times = np.array([r[4] for r in rows if r[7]], dtype=float)
    agg = {
        "mean_pi1": float(pi1.mean()),
        "mean_pi2": float(pi2.mean()),
        "extinct_fraction": float(ext.mean()),
        "mean_extinction_time": float(times.mean()) if times.size else None,
        "max_space": int(max(r[5] for r in rows)),
    }
    return CSV_HEADERS["simulate"], rows, agg


def _mode_branching(cfg: ExperimentConfig, deadline: float):
    p = cfg.parameters
    gw = br.GWParams(p["d"], p["gamma"])

    def chunk(a, b):
        out = []
        for r in range(a, b):
            res = br.simulate_progeny(gw, p["cap"], make_rng(cfg.seed, r))
            out.append((r, res.progeny, res.generations, res.capped))
        return out

    rows = run_replicas(chunk, cfg.replicas, cfg.jobs, deadline)
    prog = np.array([r[1] for r in rows])
    agg = {
        "mean_progeny": float(prog.mean()),
        "exact_mean_progeny": br.progeny_mean(gw),
        "capped": int(sum(r[3] for r in rows)),
        "subcritical": gw.subcritical(),
    }
    return CSV_HEADERS["branching"], rows, agg


def _mode_meanfield(cfg: ExperimentConfig, deadline: float):
    p = cfg.parameters
    params = mf.MFParams(p["lambda1"], p["lambda2"], p["gamma"])
    times, states = mf.integrate(mf.MFState(p["u1"], p["u2"]), params, p["t_end"], p["dt"])
    keep = list(range(0, len(times), p["record_every"]))
    if keep[-1] != len(times) - 1:
        keep.append(len(times) - 1)
    rows = [(times[i], states[i, 0], states[i, 1]) for i in keep]
    rep = mf.interior_fixed_point(params)
    att = mf.predicted_attractor(params)
    final = mf.MFState(float(states[-1, 0]), float(states[-1, 1]))
    agg = {
        "final": [final.u1, final.u2],
        "epidemic_threshold_exceeded": mf.threshold_check(params),
        "predicted_attractor": [att.u1, att.u2],
        "distance_to_attractor": final.distance(att),
        "eigen_real_parts": list(rep.eigen_real_parts),
        "stable": rep.stable,
    }
    return CSV_HEADERS["meanfield"], rows, agg


def _mode_percolation(cfg: ExperimentConfig, deadline: float):
    p = cfg.parameters
    if p["kind"] == "paths":
        rows = []
        for n in range(p["n_max"] + 1):
            if time.monotonic() > deadline:
                raise BudgetError("time budget exceeded")
            rep = perc.count_directed_sa_paths(n, p["d"])
            rows.append((n, rep.count, rep.bound))
        return CSV_HEADERS["percolation_paths"], rows, {"d": p["d"], "n_max": p["n_max"]}

    def chunk(a, b):
        out = []
        for r in range(a, b):
            res = perc.sample_field_and_search(p["epsilon"], p["d"], p["width"], p["levels"], make_rng(cfg.seed, r))
            out.append((r, res["has_closed_path"], res["longest"]))
        return out

    rows = run_replicas(chunk, cfg.replicas, cfg.jobs, deadline)
    hits = sum(r[1] for r in rows)
    lo, hi = wilson_interval(hits, len(rows))
    agg = {"p_closed_path": hits / len(rows), "ci95": [lo, hi], "max_longest": max(r[2] for r in rows)}
    return CSV_HEADERS["percolation_field"], rows, agg


def _mode_block(cfg: ExperimentConfig, deadline: float):
    p = cfg.parameters
    geom = BlockGeometry(p["k"], p["d"])
    sp = SimParams(d=p["d"], lambda1=p["lambda1"], lambda2=p["lambda2"], gamma=p["gamma"], boundary=p["boundary"])

    def chunk(a, b):
        outs = run_block_batch(geom, sp, derive_seeds(cfg.seed, a, b - a), initial=p["initial"])
        return [(a + i, o.healthy_block, o.card_lambda_minus, o.card_lambda_plus, o.card_union)
                for i, o in enumerate(outs)]

    full = run_replicas(chunk, cfg.replicas, cfg.jobs, deadline)
    h = sum(r[1] for r in full)
    lo, hi = wilson_interval(h, len(full))
    agg = {
        "p_healthy_block": h / len(full),
        "ci95": [lo, hi],
        "max_card_lambda_minus": max(r[2] for r in full),
        "bottom_size": geom.bottom_size,
        "m_bound": geom.m_bound,
        "p_union_above_3m": sum(r[4] > 3 * geom.m_bound for r in full) / len(full),
    }
    return CSV_HEADERS["block"], [r[:4] for r in full], agg


def _mode_verify(cfg: ExperimentConfig, deadline: float):
    p = cfg.parameters
    results = verification.run_checks(cfg.seed, p["scale"], p["criteria"] or None)
    if time.monotonic() > deadline:
        raise BudgetError("time budget exceeded")
    rows = [(r.criterion, r.name, r.passed) for r in results]
    agg = {
        "all_passed": all(r.passed for r in results),
        "checks": [
            {"criterion": r.criterion, "name": r.name, "passed": r.passed,
             "subchecks": [{"name": s.name, "passed": s.passed, "detail": s.detail} for s in r.subchecks]}
            for r in results
        ],
    }
    Path(cfg.output_path, "report.txt").write_text(verification.report_text(results))
    return CSV_HEADERS["verify"], rows, agg


DISPATCH = {
    "simulate": _mode_simulate,
    "branching": _mode_branching,
    "meanfield": _mode_meanfield,
    "percolation": _mode_percolation,
    "block": _mode_block,
    "verify": _mode_verify,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    deadline = start + cfg.time_budget
    header, rows, agg = DISPATCH[cfg.mode](cfg, deadline)
    wall = time.monotonic() - start
    if wall > cfg.time_budget:
        raise BudgetError(f"run took {wall:.3g}s, budget {cfg.time_budget:.3g}s")

    write_csv(out / f"{cfg.mode}.csv", header, rows)
    write_json(out / "summary.json", {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "parameters": cfg.parameters,
        "aggregates": agg,
    })
    write_json(out / "timing.json", {"wall_clock_seconds": wall, "jobs": cfg.jobs})
    if cfg.mode == "verify":
        sys.stdout.write(Path(out, "report.txt").read_text())
        return EXIT_OK if agg["all_passed"] else EXIT_VERIFY
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymcp", description="Asymptomatic contact process experiments.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="key=value file")
    ap.add_argument("--seed", type=str)
    ap.add_argument("--replicas", type=str)
    ap.add_argument("--jobs", type=str)
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        raw: dict[str, Any] = read_config_file(args.config) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(item, "expected KEY=VALUE")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        for key in ("seed", "replicas", "jobs"):
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
        cfg = build_config(args.mode, raw, args.out)
    except (ConfigError, OSError) as exc:
        print(f"asymcp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_experiment(cfg)
    except (BudgetError, perc.BudgetExceeded) as exc:
        print(f"asymcp: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
