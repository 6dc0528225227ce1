"""Experiment orchestration: grid search, seed fan-out, CSV/manifest output.

The orchestrator mirrors the benchmarking protocol of the package: for each
method it grid-searches a step-size multiplier gamma (with a = gamma / n) on
a pilot subset of seeds, reruns every seed at the winning gamma, and writes

* ``runs.csv``     one row per recorded epoch per final-phase run,
* ``summary.csv``  per (method, schedule, epoch) mean, std and 95% CI,
* ``manifest.json`` chosen gammas, grid diagnostics, divergences, timings,
  and the effective configuration needed to replay the experiment.

Everything is deterministic given the configuration: seeds for initial
points, schedule streams, and per-instance problem generation are derived
from the configured seeds with the documented splitmix64 mixer (see
``core.derive_seed``). Replaying a manifest reproduces the CSV files byte
for byte; wall-clock timings therefore live only in the manifest.

Fan-out across (instance, method, schedule, gamma, seed) cells uses a
process pool when the environment variable ``MINIMAX_WOR_WORKERS`` is set
above 1; results are merged in canonical order so the output does not
depend on scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ConfigurationError,
    DivergenceError,
    InputError,
    NumericalError,
    derive_seed,
)
from .metrics import (
    dist_sq_to_saddle_set_2pl,
    lyapunov_v,
    lyapunov_v_2pl,
    relative_sq_distance,
)
from .optimizers import RunConfig, run_agda, run_gda, run_ppm
from .problems import (
    GameGenConfig,
    bilinear_lower_bound_instance,
    generate_quadratic_game,
    unbounded_2pl_instance,
)
from .shuffling import parse_schedule

WORKERS_ENV = "MINIMAX_WOR_WORKERS"
MANIFEST_VERSION = 1

# seed-derivation roles (documented in the README)
ROLE_INSTANCE = 1
ROLE_INIT = 2
ROLE_SCHEDULE = 3

METHODS = ("gda", "ppm", "agda")
DEFAULT_GAMMA_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)

RUNS_HEADER = (
    "instance,method,schedule,gamma,seed,epoch,rel_sq_dist,v_lambda,diverged"
)
SUMMARY_HEADER = "method,schedule,epoch,runs,mean,std,ci_low,ci_high"


def _fmt(x: float) -> str:
    return f"{x:.16e}"


@dataclass(frozen=True)
class ProblemSpec:
    """Which problem instance the experiment runs on.

    kind is one of "quadratic_game", "bilinear", "two_pl". Quadratic games
    carry a generation recipe whose seed acts as the master instance seed;
    the other two are fixed analytic instances.
    """

    kind: str = "quadratic_game"
    game: GameGenConfig | None = None
    mu: float = 1.0
    ell: float = 2.0

    def __post_init__(self):
        if self.kind not in ("quadratic_game", "bilinear", "two_pl"):
            raise ConfigurationError(f"unknown problem kind '{self.kind}'")
        if self.kind == "quadratic_game" and self.game is None:
            raise ConfigurationError("quadratic_game problems need a game recipe")

    @property
    def master_seed(self) -> int:
        return self.game.seed if self.game is not None else 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; see the README for the JSON schema."""

    problem: ProblemSpec
    methods: tuple = ("gda",)
    schedules: tuple = ("rr", "so", "uniform")
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    epochs: int = 100
    seeds: tuple = (1,)
    record_every: int = 1
    instance_count: int = 1
    seeds_per_instance: int | None = None
    out_dir: str = "results"
    pilot_seed_count: int = 5
    agda_eta: float = 1.0
    lam: float = 0.1

    def __post_init__(self):
        if not self.methods or not self.schedules or not self.gamma_grid or not self.seeds:
            raise ConfigurationError(
                "need at least one method, schedule, gamma and seed"
            )
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method '{m}'")
        for s in self.schedules:
            parse_schedule(s)  # validates the label
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if any(g <= 0 for g in self.gamma_grid):
            raise ConfigurationError("gamma values must be positive")
        if self.instance_count < 1:
            raise ConfigurationError("instance_count must be >= 1")

    def seeds_for_instance(self) -> tuple:
        if self.seeds_per_instance is None:
            return tuple(self.seeds)
        return tuple(self.seeds[: self.seeds_per_instance])


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document."""
    doc = dict(doc)
    prob = dict(doc.pop("problem", {}))
    kind = prob.pop("kind", "quadratic_game")
    if kind == "quadratic_game":
        game = GameGenConfig(
            n=int(prob.get("n", 100)),
            dx=int(prob.get("dx", 25)),
            dy=int(prob.get("dy", 25)),
            mu_a=float(prob.get("mu_a", 0.5)),
            mu_b=float(prob.get("mu_b", 5.0)),
            mu_c=float(prob.get("mu_c", 0.5)),
            mu_delta=float(prob.get("mu_delta", 50.0)),
            nonconvex_count=int(prob.get("nonconvex_count", 20)),
            seed=int(prob.get("seed", 0)),
        )
        spec = ProblemSpec(kind="quadratic_game", game=game)
    elif kind == "bilinear":
        spec = ProblemSpec(
            kind="bilinear",
            mu=float(prob.get("mu", 1.0)),
            ell=float(prob.get("ell", 2.0)),
        )
    else:
        spec = ProblemSpec(kind=kind)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in ("methods", "schedules", "seeds"):
            kwargs[key] = tuple(value)
        elif key == "gamma_grid":
            kwargs[key] = tuple(float(g) for g in value)
        else:
            kwargs[key] = value
    return ExperimentConfig(problem=spec, **kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    prob: dict = {"kind": cfg.problem.kind}
    if cfg.problem.kind == "quadratic_game":
        prob.update(dataclasses.asdict(cfg.problem.game))
    elif cfg.problem.kind == "bilinear":
        prob.update({"mu": cfg.problem.mu, "ell": cfg.problem.ell})
    doc = {
        "problem": prob,
        "methods": list(cfg.methods),
        "schedules": list(cfg.schedules),
        "gamma_grid": list(cfg.gamma_grid),
        "epochs": cfg.epochs,
        "seeds": list(cfg.seeds),
        "record_every": cfg.record_every,
        "instance_count": cfg.instance_count,
        "seeds_per_instance": cfg.seeds_per_instance,
        "out_dir": cfg.out_dir,
        "pilot_seed_count": cfg.pilot_seed_count,
        "agda_eta": cfg.agda_eta,
        "lam": cfg.lam,
    }
    return doc


# ---------------------------------------------------------------------------
# cell execution

@dataclass(frozen=True)
class CellTask:
    problem: ProblemSpec
    instance: int
    method: str
    schedule: str
    gamma: float
    seed: int
    epochs: int
    record_every: int
    agda_eta: float
    lam: float


@dataclass
class CellResult:
    task: CellTask
    rows: list = field(default_factory=list)  # (epoch, rel, v_lambda or None)
    diverged_epoch: int | None = None
    rejected: str | None = None
    final_rel: float | None = None
    wall_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.diverged_epoch is None and self.rejected is None


_PROBLEM_CACHE: dict = {}


def _problem_bundle(spec: ProblemSpec, instance: int):
    """Operator plus metric closures for one instance; cached per process."""
    key = (spec, instance)
    if key in _PROBLEM_CACHE:
        return _PROBLEM_CACHE[key]
    if spec.kind == "quadratic_game":
        seed = derive_seed(spec.game.seed, ROLE_INSTANCE, instance)
        game = generate_quadratic_game(dataclasses.replace(spec.game, seed=seed))
        op = game.to_operator()
        z_star = op.constants.known_root

        def rel(z, z0):
            return relative_sq_distance(z, z0, z_star)

        def vlam(z, lam):
            return lyapunov_v(game, z, lam)

        bundle = (op, rel, vlam, seed)
    elif spec.kind == "bilinear":
        op = bilinear_lower_bound_instance(spec.mu, spec.ell)
        z_star = op.constants.known_root

        def rel(z, z0):
            return relative_sq_distance(z, z0, z_star)

        bundle = (op, rel, None, None)
    else:
        op = unbounded_2pl_instance()

        # no unique root: report squared distance to the saddle set,
        # normalized by its value at the start
        def rel(z, z0):
            d0 = dist_sq_to_saddle_set_2pl(z0)
            if d0 == 0.0:
                raise InputError("z0 lies on the saddle set")
            return dist_sq_to_saddle_set_2pl(z) / d0

        def vlam(z, lam):
            return lyapunov_v_2pl(z, lam)

        bundle = (op, rel, vlam, None)
    _PROBLEM_CACHE[key] = bundle
    return bundle


def _execute_cell(task: CellTask) -> CellResult:
    started = time.perf_counter()
    op, rel_metric, vlam_metric, _ = _problem_bundle(task.problem, task.instance)
    alpha = task.gamma / op.n
    rng0 = np.random.Generator(np.random.PCG64(derive_seed(task.seed, ROLE_INIT)))
    z0 = rng0.standard_normal(op.dim)
    sched_seed = derive_seed(task.seed, ROLE_SCHEDULE, 0)
    spec = parse_schedule(task.schedule, seed=sched_seed)
    cfg = RunConfig(
        epochs=task.epochs,
        step_size=alpha,
        z0=z0,
        schedule=spec,
        second_step_factor=task.agda_eta,
        record_every=task.record_every,
    )
    result = CellResult(task=task)
    try:
        if task.method == "gda":
            traj = run_gda(op, cfg)
        elif task.method == "ppm":
            traj = run_ppm(op, cfg)
        else:
            spec_y = parse_schedule(
                task.schedule, seed=derive_seed(task.seed, ROLE_SCHEDULE, 1)
            )
            traj = run_agda(op, cfg, schedule_x=spec, schedule_y=spec_y)
    except DivergenceError as exc:
        result.diverged_epoch = exc.epoch
        result.wall_ms = 1000.0 * (time.perf_counter() - started)
        return result
    except (ConfigurationError, NumericalError) as exc:
        result.rejected = str(exc)
        result.wall_ms = 1000.0 * (time.perf_counter() - started)
        return result
    want_vlam = task.method == "agda" and vlam_metric is not None
    for k, z in traj.epochs:
        rel = rel_metric(z, z0)
        vlam = vlam_metric(z, task.lam) if want_vlam else None
        result.rows.append((k, rel, vlam))
    result.final_rel = rel_metric(traj.final, z0)
    result.wall_ms = 1000.0 * (time.perf_counter() - started)
    return result


def _run_cells(tasks, workers: int | None = None):
    """Execute cells, in order, optionally on a process pool."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers <= 1 or len(tasks) <= 1:
        return [_execute_cell(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_cell, tasks, chunksize=4))


# ---------------------------------------------------------------------------
# experiment drivers

def _grid_search(cfg: ExperimentConfig, instance: int, method: str, workers=None):
    """Pick gamma for one (instance, method) pair.

    Evaluates each gamma on the pilot seeds across every configured
    schedule; a gamma is disqualified if any pilot cell diverges or is
    rejected. The winner minimizes the mean final error; ties go to the
    smaller gamma (the grid is scanned in ascending order with a strict
    improvement test).
    """
    seeds = cfg.seeds_for_instance()
    pilot = seeds[: cfg.pilot_seed_count]
    stats = {}
    best_gamma, best_score = None, None
    for gamma in sorted(cfg.gamma_grid):
        tasks = [
            CellTask(
                problem=cfg.problem,
                instance=instance,
                method=method,
                schedule=sched,
                gamma=gamma,
                seed=seed,
                epochs=cfg.epochs,
                record_every=cfg.epochs,  # pilots only need the final iterate
                agda_eta=cfg.agda_eta,
                lam=cfg.lam,
            )
            for sched in cfg.schedules
            for seed in pilot
        ]
        results = _run_cells(tasks, workers)
        failed = sum(0 if r.ok else 1 for r in results)
        finals = [r.final_rel for r in results if r.ok]
        mean_final = float(np.mean(finals)) if finals else None
        stats[repr(gamma)] = {"mean_final": mean_final, "failed_cells": failed}
        if failed or mean_final is None:
            continue
        if best_score is None or mean_final < best_score:
            best_gamma, best_score = gamma, mean_final
    return best_gamma, stats


def _execute_experiment(cfg: ExperimentConfig, kind: str, pinned_gammas=None,
                        workers=None) -> dict:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seeds_for_instance()
    started = time.perf_counter()

    instances_info = []
    all_results: list[CellResult] = []
    for instance in range(cfg.instance_count):
        info = {"index": instance, "chosen_gamma": {}, "grid": {},
                "divergences": [], "rejected": [], "skipped_methods": []}
        if cfg.problem.kind == "quadratic_game":
            info["game_seed"] = derive_seed(cfg.problem.game.seed, ROLE_INSTANCE, instance)
        for method in cfg.methods:
            if pinned_gammas is not None:
                gamma = pinned_gammas.get(str(instance), {}).get(method)
                grid_stats = {}
            else:
                gamma, grid_stats = _grid_search(cfg, instance, method, workers)
            info["grid"][method] = grid_stats
            if gamma is None:
                info["skipped_methods"].append(method)
                continue
            info["chosen_gamma"][method] = gamma
            tasks = [
                CellTask(
                    problem=cfg.problem,
                    instance=instance,
                    method=method,
                    schedule=sched,
                    gamma=gamma,
                    seed=seed,
                    epochs=cfg.epochs,
                    record_every=cfg.record_every,
                    agda_eta=cfg.agda_eta,
                    lam=cfg.lam,
                )
                for sched in cfg.schedules
                for seed in seeds
            ]
            results = _run_cells(tasks, workers)
            for res in results:
                if res.diverged_epoch is not None:
                    info["divergences"].append(_cell_key(res.task) + [res.diverged_epoch])
                elif res.rejected is not None:
                    info["rejected"].append(_cell_key(res.task) + [res.rejected])
            all_results.extend(results)
        instances_info.append(info)

    _write_runs_csv(out_dir / "runs.csv", all_results)
    _write_summary_csv(out_dir / "summary.csv", all_results)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "kind": kind,
        "config": config_to_dict(cfg),
        "instances": instances_info,
        "timing_ms": {
            "total": 1000.0 * (time.perf_counter() - started),
            "cells": {
                "/".join(str(x) for x in _cell_key(r.task)): round(r.wall_ms, 3)
                for r in all_results
            },
        },
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest


def _cell_key(task: CellTask) -> list:
    return [task.instance, task.method, task.schedule, task.gamma, task.seed]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Grid-search and run a single-instance experiment; returns the manifest."""
    cfg = dataclasses.replace(cfg, instance_count=1)
    return _execute_experiment(cfg, "run", workers=workers)


def multi_instance_experiment(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Run the multi-instance protocol: ``instance_count`` independently
    generated problems, ``seeds_per_instance`` runs each, aggregated in one
    summary. With instance_count=1 this reduces exactly to run_experiment."""
    return _execute_experiment(cfg, "multi", workers=workers)


def replay_manifest(manifest_path, out_dir=None, workers: int | None = None) -> dict:
    """Re-run the final phase recorded in a manifest.

    The chosen gammas are pinned, so no grid search happens; the produced
    runs.csv and summary.csv are byte-identical to the original ones.
    """
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = config_from_dict(manifest["config"])
    if out_dir is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(out_dir))
    pinned = {
        str(info["index"]): dict(info["chosen_gamma"])
        for info in manifest["instances"]
    }
    return _execute_experiment(cfg, manifest["kind"], pinned_gammas=pinned,
                               workers=workers)


# ---------------------------------------------------------------------------
# CSV and plot-data output

def _write_runs_csv(path: Path, results) -> None:
    lines = [RUNS_HEADER]
    for res in results:
        t = res.task
        prefix = f"{t.instance},{t.method},{t.schedule},{t.gamma!r},{t.seed}"
        if res.diverged_epoch is not None:
            lines.append(f"{prefix},{res.diverged_epoch},,,1")
        elif res.rejected is not None:
            continue  # rejected cells carry no iterates; listed in the manifest
        else:
            for epoch, rel, vlam in res.rows:
                v = "" if vlam is None else _fmt(vlam)
                lines.append(f"{prefix},{epoch},{_fmt(rel)},{v},0")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_summary_csv(path: Path, results) -> None:
    groups: dict = {}
    order: list = []
    for res in results:
        if not res.ok:
            continue
        t = res.task
        for epoch, rel, _ in res.rows:
            key = (t.method, t.schedule, epoch)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(rel)
    lines = [SUMMARY_HEADER]
    for key in order:
        method, sched, epoch = key
        vals = np.asarray(groups[key])
        mean = float(vals.mean())
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        half = 1.96 * std / np.sqrt(vals.size)
        lines.append(
            f"{method},{sched},{epoch},{vals.size},{_fmt(mean)},{_fmt(std)},"
            f"{_fmt(mean - half)},{_fmt(mean + half)}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def ci_halfwidth(values) -> float:
    """95% normal-approximation confidence half-width of the mean."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size < 2:
        return 0.0
    return float(1.96 * vals.std(ddof=1) / np.sqrt(vals.size))


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render convergence panels from the panel_*.dat files in this directory.

Each data file holds one panel: column 1 is the epoch, followed by triplets
(mean, ci_low, ci_high) per schedule, with names and the y-axis scale in the
header comments. Requires matplotlib.
\"\"\"
import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "panel_*.dat"))):
    with open(path) as fh:
        scale = fh.readline().split(":", 1)[1].strip()
        names = fh.readline().split(":", 1)[1].split()
    data = np.loadtxt(path)
    data = np.atleast_2d(data)
    epochs = data[:, 0]
    fig, ax = plt.subplots(figsize=(5, 4))
    for j, name in enumerate(names):
        mean = data[:, 1 + 3 * j]
        lo = data[:, 2 + 3 * j]
        hi = data[:, 3 + 3 * j]
        ax.plot(epochs, mean, label=name)
        ax.fill_between(epochs, lo, hi, alpha=0.25)
    ax.set_yscale(scale)
    ax.set_xlabel("epoch")
    ax.set_ylabel("relative squared distance")
    ax.set_title(os.path.basename(path)[6:-4].upper())
    ax.legend()
    out = path[:-4] + ".png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print("wrote", out)
"""

# per-panel y-axis scale: the simultaneous descent-ascent panel reads best on
# a linear axis, the others on a log axis
_PANEL_SCALE = {"gda": "linear", "ppm": "log", "agda": "log"}


def emit_plot_data(summary_dir) -> list:
    """Write per-method panel data files plus a plotting script.

    Reads ``summary.csv`` in ``summary_dir`` and writes one whitespace-
    delimited ``panel_<method>.dat`` per method (epoch, then mean/ci_low/
    ci_high per schedule) and ``plot_panels.py``. Raises InputError if the
    summary has no data rows.
    """
    summary_dir = Path(summary_dir)
    summary_path = summary_dir / "summary.csv"
    if not summary_path.exists():
        raise InputError(f"no summary.csv in {summary_dir}")
    lines = summary_path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SUMMARY_HEADER:
        raise InputError("summary.csv has an unexpected header")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        method, sched, epoch, count, mean, std, lo, hi = line.split(",")
        rows.append((method, sched, int(epoch), float(mean), float(lo), float(hi)))
    if not rows:
        raise InputError("summary.csv has no data rows")

    methods, schedules = [], []
    for method, sched, *_ in rows:
        if method not in methods:
            methods.append(method)
        if sched not in schedules:
            schedules.append(sched)
    written = []
    for method in methods:
        cells = {
            (sched, epoch): (mean, lo, hi)
            for m, sched, epoch, mean, lo, hi in rows
            if m == method
        }
        epochs = sorted({e for (s, e) in cells})
        scheds = [s for s in schedules if any((s, e) in cells for e in epochs)]
        out = [
            f"# yscale: {_PANEL_SCALE.get(method, 'log')}",
            "# schedules: " + " ".join(scheds),
        ]
        for epoch in epochs:
            parts = [str(epoch)]
            for sched in scheds:
                mean, lo, hi = cells.get((sched, epoch), (np.nan, np.nan, np.nan))
                parts += [_fmt(mean), _fmt(lo), _fmt(hi)]
            out.append(" ".join(parts))
        path = summary_dir / f"panel_{method}.dat"
        path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
        written.append(path)
    script = summary_dir / "plot_panels.py"
    script.write_text(_PLOT_SCRIPT, encoding="utf-8", newline="\n")
    written.append(script)
    return written
