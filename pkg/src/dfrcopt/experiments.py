"""Experiment harness: seeded runs, plot-ready CSV artifacts, manifests.

Every experiment writes one CSV with a documented header plus a JSON
manifest (config hash, seeds, package versions, wall time).  Rows are
sorted by (sweep key, seed) before writing and floats are printed with 17
significant digits, so reruns of the same spec are byte-identical; the
wall-time field of the manifest is the only nondeterministic output.
Failed runs keep their row with a status describing the failure.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .algorithm import run_alternating
from .arrays import ArrayGeometry, rx_beampattern
from .baseline import run_baseline
from .errors import ConfigError, SolverFailure
from .receive import build_fractional, dedicated_combiner
from .scenario import config_sha256, generate_channels, with_seed

KINDS = ("scnr_vs_gamma", "convergence", "i_sweep", "spread_sweep",
         "beampattern", "dedicated_compare", "baseline_audit", "sensitivity")

_DEG = 180.0 / math.pi

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment request: kind, base scenario, sweep values, seeds."""

    kind: str
    base_config: object
    output_dir: object
    n_seeds: int = 10
    seed_base: int = 1
    sweep: dict = field(default_factory=dict)
    grid_points: int = 721

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind '{self.kind}'")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")


def derive_seed(seed_base, index):
    """Per-trial seed: base XOR trial index, keeping trials order-independent."""
    return int(seed_base) ^ int(index)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _db(linear):
    return 10.0 * math.log10(linear) if linear > 0 else float("nan")


def _with_gamma(config, gamma_db):
    users = tuple(replace(u, sinr_threshold_db=float(gamma_db)) for u in config.users)
    return replace(config, users=users)


def _with_array(config, n):
    geom = ArrayGeometry(n_tx=int(n), n_rx=int(n), spacing=config.geometry.spacing)
    return replace(config, geometry=geom)


def _with_spread(config, lo_deg, hi_deg, i_count):
    if i_count == 1:
        angles = (math.radians(lo_deg),)
    else:
        angles = tuple(math.radians(lo_deg + j * (hi_deg - lo_deg) / (i_count - 1))
                       for j in range(int(i_count)))
    return replace(config, target_angles=angles)


def _try_solve(config):
    """Run one scenario, mapping solver failures to a status string."""
    try:
        sol = run_alternating(config)
        return sol, sol.status
    except SolverFailure as exc:
        return None, f"failed-{type(exc).__name__}"


def _final_scnr(sol):
    return float(sol.scnr_trace[-1]) if sol is not None else float("nan")


def run_experiment(spec):
    """Execute a spec; returns (exit_code, list of artifact paths)."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    runner = _RUNNERS[spec.kind]
    header, rows, summary = runner(spec)

    csv_path = out / f"{spec.kind}.csv"
    _write_csv(csv_path, header, rows)

    statuses = [str(r[header.index("status")]) for r in rows] if "status" in header else []
    failed = [s for s in statuses if s.startswith("failed")]
    if statuses and len(failed) == len(statuses):
        code = EXIT_SOLVER
    elif failed:
        code = EXIT_PARTIAL
    else:
        code = EXIT_OK

    manifest = {
        "kind": spec.kind,
        "config_sha256": config_sha256(spec.base_config),
        "seed_base": int(spec.seed_base),
        "n_seeds": int(spec.n_seeds),
        "seeds": [derive_seed(spec.seed_base, i) for i in range(spec.n_seeds)],
        "sweep": {k: list(v) if isinstance(v, (list, tuple)) else v
                  for k, v in spec.sweep.items()},
        "versions": _versions(),
        "rows": len(rows),
        "csv": csv_path.name,
        "summary": summary,
        "exit_code": code,
        "wall_time_s": time.time() - started,
    }
    manifest_path = out / f"{spec.kind}.manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code, [csv_path, manifest_path]


def _versions():
    import cvxpy
    import scipy

    return {"dfrcopt": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "cvxpy": cvxpy.__version__}


def _seeds(spec):
    return [derive_seed(spec.seed_base, i) for i in range(spec.n_seeds)]


def _run_scnr_vs_gamma(spec):
    gammas = spec.sweep.get("gamma_db", [0.0, 5.0, 10.0, 15.0, 20.0])
    ns = spec.sweep.get("n", [8, 12, 16])
    rows = []
    for gamma in gammas:
        for n in ns:
            for seed in _seeds(spec):
                config = with_seed(_with_array(_with_gamma(spec.base_config, gamma), n), seed)
                sol, status = _try_solve(config)
                iters = sol.outer_iters if sol is not None else 0
                rows.append((float(gamma), int(n), seed, _db(_final_scnr(sol)),
                             iters, status))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return ["gamma_db", "n", "seed", "scnr_db", "iters", "status"], rows, {}


def _run_convergence(spec):
    gammas = spec.sweep.get("gamma_db", [0.0, 10.0, 20.0])
    rows = []
    for gamma in gammas:
        for seed in _seeds(spec):
            config = with_seed(_with_gamma(spec.base_config, gamma), seed)
            sol, status = _try_solve(config)
            if sol is None:
                rows.append((float(gamma), seed, 0, float("nan"), float("nan"), status))
                continue
            for it, (obj, sc) in enumerate(zip(sol.objective_trace, sol.scnr_trace)):
                rows.append((float(gamma), seed, it, float(obj), _db(float(sc)), status))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return ["gamma_db", "seed", "iter", "objective", "scnr_db", "status"], rows, {}


def _run_i_sweep(spec):
    i_values = [int(v) for v in spec.sweep.get("i_values", [2, 3, 4])]
    lo = float(spec.sweep.get("lo_deg", 15.0))
    hi = float(spec.sweep.get("hi_deg", 50.0))
    rows = []
    means = {}
    for i_count in i_values:
        finals = []
        for seed in _seeds(spec):
            config = with_seed(_with_spread(spec.base_config, lo, hi, i_count), seed)
            sol, status = _try_solve(config)
            value = _final_scnr(sol)
            iters = sol.outer_iters if sol is not None else 0
            rows.append((i_count, seed, _db(value), value, iters, status))
            if sol is not None:
                finals.append(value)
        if finals:
            means[i_count] = float(np.mean(finals))
    rows.sort(key=lambda r: (r[0], r[1]))
    summary = {}
    if len(means) >= 2:
        values = list(means.values())
        summary["relative_scnr_spread"] = (max(values) - min(values)) / max(values)
        summary["mean_scnr_by_i"] = {str(k): v for k, v in sorted(means.items())}
    return ["i_count", "seed", "scnr_db", "scnr_linear", "iters", "status"], rows, summary


def _run_spread_sweep(spec):
    spreads = spec.sweep.get("spreads", {"G1": (15.0, 50.0), "G2": (15.0, 40.0)})
    i_count = int(spec.sweep.get("i_count", 2))
    rows = []
    for label in sorted(spreads):
        lo, hi = spreads[label]
        for seed in _seeds(spec):
            config = with_seed(_with_spread(spec.base_config, lo, hi, i_count), seed)
            sol, status = _try_solve(config)
            iters = sol.outer_iters if sol is not None else 0
            rows.append((label, float(lo), float(hi), i_count, seed,
                         _db(_final_scnr(sol)), iters, status))
    rows.sort(key=lambda r: (r[0], r[4]))
    return ["spread", "lo_deg", "hi_deg", "i_count", "seed", "scnr_db", "iters",
            "status"], rows, {}


def _pattern_rows(w, config, grid_points, source, seed, status):
    grid = np.linspace(-math.pi / 2.0, math.pi / 2.0, int(grid_points))
    gains = rx_beampattern(w, config.geometry, grid)
    return [(float(theta * _DEG), _db(float(g)), source, seed, status)
            for theta, g in zip(grid, gains)]


def _run_beampattern(spec):
    header = ["angle_deg", "gain_db", "source", "seed", "status"]
    source = str(spec.sweep.get("source", "proposed"))
    seed = derive_seed(spec.seed_base, 0)
    config = with_seed(spec.base_config, seed)
    sol, status = _try_solve(config)
    if sol is None:
        return header, [(float("nan"), float("nan"), source, seed, status)], {}
    if source == "proposed":
        w = sol.w_star
    elif source.startswith("dedicated:"):
        idx = int(source.split(":", 1)[1])
        channels = generate_channels(config)
        inst = build_fractional(sol.u_star, channels, config)
        w = dedicated_combiner(inst, idx)
    else:
        raise ConfigError(f"unknown beampattern source '{source}'")
    return (header, _pattern_rows(w, config, spec.grid_points, source, seed, status),
            {"status": status})


def _run_dedicated_compare(spec):
    margin_db = float(spec.sweep.get("margin_db", 3.0))
    seed = derive_seed(spec.seed_base, 0)
    config = with_seed(spec.base_config, seed)
    sol, status = _try_solve(config)
    rows = []
    if sol is not None:
        channels = generate_channels(config)
        inst = build_fractional(sol.u_star, channels, config)
        for i, theta in enumerate(config.target_angles):
            proposed = rx_beampattern(sol.w_star, config.geometry, [theta])[0]
            dedicated = rx_beampattern(dedicated_combiner(inst, i),
                                       config.geometry, [theta])[0]
            gap = _db(dedicated) - _db(proposed)
            rows.append((float(theta * _DEG), _db(proposed), _db(dedicated),
                         gap, gap <= margin_db, seed, status))
    rows.sort(key=lambda r: r[0])
    return (["target_deg", "proposed_gain_db", "dedicated_gain_db", "gap_db",
             "within_margin", "seed", "status"], rows, {"margin_db": margin_db})


def _run_baseline_audit(spec):
    iters = int(spec.sweep.get("iters", 8))
    known = float(spec.sweep.get("known_angle", spec.base_config.target_angles[0]))
    rows = []
    violating_seeds = 0
    attempted = 0
    for seed in _seeds(spec):
        config = with_seed(spec.base_config, seed)
        attempted += 1
        try:
            trace = run_baseline(config, known, iters)
        except SolverFailure as exc:
            rows.append((seed, 0, float("nan"), 0, float("nan"), 0,
                         f"failed-{type(exc).__name__}"))
            continue
        if not trace.monotone:
            violating_seeds += 1
        for m, value in enumerate(trace.f_values, start=1):
            rows.append((seed, m, float(value), int(m in trace.violations),
                         float(trace.rank_gaps[m - 1]), int(trace.repaired[m - 1]),
                         "ok"))
    rows.sort(key=lambda r: (r[0], r[1]))
    summary = {"violation_fraction": violating_seeds / attempted if attempted else 0.0}
    return (["seed", "iter", "f_value", "violation", "rank_gap", "repaired",
             "status"], rows, summary)


def _run_sensitivity(spec):
    sweeps = spec.sweep or {
        "penalty_eta": [1e1, 1e2, 1e3, 1e4],
        "penalty_nu": [1e4, 1e6, 1e8, 1e10],
        "inner_s": [1, 3, 5, 10],
        "epsilon": [1e-3, 1e-4, 1e-5],
    }
    rows = []
    for param in sorted(sweeps):
        for value in sweeps[param]:
            for seed in _seeds(spec):
                solver = replace(spec.base_config.solver, **{
                    param: int(value) if param in ("inner_s", "max_iter", "outer_d_max")
                    else float(value)})
                config = with_seed(replace(spec.base_config, solver=solver), seed)
                sol, status = _try_solve(config)
                iters = sol.outer_iters if sol is not None else 0
                objective = float(sol.objective_trace[-1]) if sol is not None else float("nan")
                rows.append((param, float(value), seed, _db(_final_scnr(sol)),
                             objective, iters, status))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return (["param", "value", "seed", "scnr_db", "objective", "iters", "status"],
            rows, {})


_RUNNERS = {
    "scnr_vs_gamma": _run_scnr_vs_gamma,
    "convergence": _run_convergence,
    "i_sweep": _run_i_sweep,
    "spread_sweep": _run_spread_sweep,
    "beampattern": _run_beampattern,
    "dedicated_compare": _run_dedicated_compare,
    "baseline_audit": _run_baseline_audit,
    "sensitivity": _run_sensitivity,
}
