"""Replicated-run experiment protocol with common random numbers.

All variants (convolution vs finite-difference estimator) consume the same
seed list, hence identical noise sequences, so their trajectories are
directly comparable.  Aggregates are means and standard deviations of the
coordinate errors x_k - x* across replications; divergent replications are
excluded from the aggregates but counted.  Outputs are deterministic
functions of (config, seeds): replications are reduced in seed-sorted
order and CSV bytes are stable across invocations.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, ValidationError
from .problem import ChanceConstrainedProblem
from .solver import RunConfig, Trajectory, run

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "AggregateSeries",
    "run_experiment",
    "emit_csv",
    "emit_plot_script",
    "coordinate_names",
    "load_config",
    "experiment_from_dict",
]


def coordinate_names(dim_u: int, n_dual: int) -> list[str]:
    """Primal coordinates u, v, w or u0.. followed by multipliers l1, l2, ..."""
    if dim_u <= 3:
        primal = ["u", "v", "w"][:dim_u]
    else:
        primal = [f"u{j}" for j in range(dim_u)]
    return primal + [f"l{i + 1}" for i in range(n_dual)]


@dataclass(frozen=True)
class AggregateSeries:
    """Mean and standard deviation of x_k - x* per coordinate, across
    replications, on the recorded index grid."""

    ks: np.ndarray
    mean: np.ndarray  # (m, dim)
    std: np.ndarray   # (m, dim)
    x_star: np.ndarray
    names: tuple[str, ...]
    label: str = ""

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.shape[0] != self.ks.size:
            raise ValidationError("aggregate arrays have inconsistent shapes")
        if self.mean.shape[1] != len(self.names):
            raise ValidationError("coordinate names do not match the aggregate width")


@dataclass
class ExperimentResult:
    variant: str
    series: AggregateSeries
    trajectories: list
    diverged_seeds: tuple[int, ...]
    mse: np.ndarray  # mean squared error norm over replications, per recorded k

    def mse_slope(self, window: tuple[int, int] = (500, 5000)) -> float:
        ks = self.series.ks
        mask = (ks >= window[0]) & (ks <= window[1]) & (self.mse > 0)
        if mask.sum() < 2:
            raise ValidationError("slope window contains fewer than two recorded points")
        return float(np.polyfit(np.log(ks[mask]), np.log(self.mse[mask]), 1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Replication protocol around a RunConfig template.

    The template's estimator kind is overridden by each entry of
    `variants`; every variant runs the same seeds (base_seed + i unless an
    explicit seed list is given).
    """

    run: RunConfig = field(default_factory=RunConfig)
    replications: int = 100
    base_seed: int = 20240
    seeds: Optional[tuple[int, ...]] = None
    variants: tuple[str, ...] = ("ac", "fd")
    output_dir: Optional[str] = None
    emit_plots: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("replication count must be >= 1")
        if self.workers < 1:
            raise ValidationError("worker count must be >= 1")
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            if len(self.seeds) != self.replications:
                raise ValidationError("seed list length must equal the replication count")
        for v in self.variants:
            if v not in ("ac", "fd"):
                raise ValidationError(f"unknown estimator variant {v!r}")

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + i for i in range(self.replications)]


def _run_one(args) -> tuple[int, object]:
    """Worker for one replication; returns (seed, Trajectory | DivergenceError)."""
    run_cfg_dict, seed = args
    cfg = RunConfig.from_dict(run_cfg_dict).replace(seed=seed)
    try:
        return seed, run(cfg)
    except DivergenceError as err:
        return seed, err


def _reference_point(problem: ChanceConstrainedProblem) -> np.ndarray:
    if problem.reference_saddle is None:
        raise ValidationError(
            f"problem {problem.name!r} has no reference optimum to aggregate against"
        )
    u_opt, lam_opt = problem.reference_saddle
    return np.concatenate([u_opt, lam_opt])


def run_experiment(
    config: ExperimentConfig,
    problem: Optional[ChanceConstrainedProblem] = None,
) -> dict[str, ExperimentResult]:
    """Execute every variant over the common seed list and aggregate."""
    if problem is None:
        problem = config.run.build_problem()
    x_star = _reference_point(problem)
    names = tuple(coordinate_names(problem.dim_u, problem.n_dual))
    seeds = config.seed_list()

    results: dict[str, ExperimentResult] = {}
    for variant in config.variants:
        run_cfg = config.run.replace(estimator_kind=variant, dual_estimate_mode=None)
        jobs = [(asdict(run_cfg), s) for s in seeds]
        if config.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
                outcomes = list(pool.map(_run_one, jobs))
        else:
            outcomes = [_run_one(j) for j in jobs]

        # seed-sorted reduction order keeps aggregation permutation-invariant
        outcomes.sort(key=lambda item: item[0])
        trajectories, diverged = [], []
        for seed, out in outcomes:
            if isinstance(out, DivergenceError):
                diverged.append(seed)
            else:
                trajectories.append(out)
        if not trajectories:
            raise DivergenceError(
                f"every replication of variant {variant!r} diverged",
            )

        ks = trajectories[0].ks
        errors = np.stack([tr.errors_vs(x_star) for tr in trajectories])
        series = AggregateSeries(
            ks=ks,
            mean=errors.mean(axis=0),
            std=errors.std(axis=0),
            x_star=x_star,
            names=names,
            label=variant,
        )
        mse = np.sum(errors**2, axis=2).mean(axis=0)
        results[variant] = ExperimentResult(
            variant=variant,
            series=series,
            trajectories=trajectories,
            diverged_seeds=tuple(diverged),
            mse=mse,
        )

    if config.output_dir:
        write_experiment_outputs(results, config.output_dir, emit_plots=config.emit_plots)
    return results


def write_experiment_outputs(
    results: dict[str, ExperimentResult], out_dir: str, emit_plots: bool = False
) -> list[str]:
    """CSV per variant, a gnuplot script, and (optionally) rendered figures."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    entries = []
    for variant, res in results.items():
        csv_path = os.path.join(out_dir, f"experiment_{variant}.csv")
        emit_csv(res.series, csv_path)
        written.append(csv_path)
        entries.append((variant, os.path.basename(csv_path), res.series))
    script_path = os.path.join(out_dir, "experiment.gp")
    emit_plot_script(entries, script_path)
    written.append(script_path)
    if emit_plots:
        from . import plots

        written.extend(plots.experiment_figure([res.series for res in results.values()], out_dir))
    return written


# ---------------------------------------------------------------------------
# flat-file outputs

def emit_csv(series: AggregateSeries, path: str) -> str:
    """UTF-8, LF-terminated CSV: k then mean/std per coordinate, 9
    significant digits."""
    header = "k," + ",".join(f"mean_{n},std_{n}" for n in series.names)
    lines = [header]
    for i, k in enumerate(series.ks):
        cells = [str(int(k))]
        for j in range(len(series.names)):
            cells.append(f"{series.mean[i, j]:.9g}")
            cells.append(f"{series.std[i, j]:.9g}")
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_plot_script(
    entries: Sequence[tuple[str, str, AggregateSeries]], path: str
) -> str:
    """Gnuplot script drawing mean +/- std bands per coordinate, one panel
    per coordinate; the first variant is drawn solid, later ones dashed."""
    if not entries:
        raise ValidationError("need at least one series to plot")
    names = entries[0][2].names
    ncols = 2 if len(names) > 1 else 1
    nrows = (len(names) + ncols - 1) // ncols
    lines = [
        "# gnuplot script: error trajectories (mean +/- standard deviation)",
        "set terminal pngcairo size 1200,900",
        "set output 'experiment.png'",
        f"set multiplot layout {nrows},{ncols}",
        "set datafile separator ','",
        "set logscale x",
        "set xlabel 'iteration k'",
    ]
    for j, name in enumerate(names):
        mean_col, std_col = 2 + 2 * j, 3 + 2 * j
        lines.append(f"set title '{name} error'")
        plot_parts = []
        for v_idx, (label, csv_name, _) in enumerate(entries):
            dt = 1 if v_idx == 0 else 2
            lt = v_idx + 1
            plot_parts.append(
                f"'{csv_name}' every ::1 using 1:{mean_col} with lines lt {lt} dt {dt} title '{label}'"
            )
            plot_parts.append(
                f"'{csv_name}' every ::1 using 1:(${mean_col}+${std_col}) with lines lt {lt} dt 3 notitle"
            )
            plot_parts.append(
                f"'{csv_name}' every ::1 using 1:(${mean_col}-${std_col}) with lines lt {lt} dt 3 notitle"
            )
        lines.append("plot " + ", \\\n     ".join(plot_parts))
    lines.append("unset multiplot")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# config documents

_EXPERIMENT_KEYS = {
    "replications",
    "base_seed",
    "seeds",
    "variants",
    "output_dir",
    "emit_plots",
    "workers",
}


def experiment_from_dict(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from {'run': {...}, 'experiment': {...}};
    unknown keys anywhere are rejected."""
    unknown = set(data) - {"run", "experiment"}
    if unknown:
        raise ValidationError(f"unknown top-level config key(s): {sorted(unknown)}")
    run_cfg = RunConfig.from_dict(data.get("run", {}))
    exp = dict(data.get("experiment", {}))
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ValidationError(f"unknown experiment config key(s): {sorted(unknown)}")
    if "variants" in exp:
        exp["variants"] = tuple(exp["variants"])
    if exp.get("seeds") is not None:
        exp["seeds"] = tuple(exp["seeds"])
    return ExperimentConfig(run=run_cfg, **exp)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValidationError("config document must be a JSON object")
    return experiment_from_dict(data)
