"""Command-line interface.

Subcommands:
  solve          one stochastic run
  experiment     replicated protocol with common random numbers
  tune           optimal exponents and the schedule constants in use
  bias-variance  exact moment sweep of a gradient estimator
  kt-check       optimality residual at a given primal-dual point
  field          mean-field drift grid and integrated paths
  kernels        smoothing-kernel catalog with moments and scores

Exit status: 0 success, 1 validation/usage error, 2 divergence.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np

from . import analysis, harness, schedules
from .errors import DivergenceError, OracleUnavailableError, ValidationError
from .estimators import EstimatorConfig
from .kernels import builtin_kernels, kernel_by_name, kernel_score
from .problem import analytic_probability, make_problem
from .solver import IterateState, RunConfig, kt_residual, run

DEFAULT_OUT = "ccopt_out"


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # accept values like "-2.05244,0.877913" after an option flag
        self._negative_number_matcher = re.compile(r"^-\d|^-\.\d")

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base random seed")
    common.add_argument("--config", default=None, help="JSON config document")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--problem", default=None, help="problem name (portfolio, toy)")

    parser = _Parser(prog="ccopt", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("solve", parents=[common], help="single stochastic run")
    p.add_argument("--estimator", choices=("ac", "fd"), default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--pi", type=float, default=None, help="probability level override")

    p = sub.add_parser("experiment", parents=[common], help="replicated protocol")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--variants", default=None, help="comma list, e.g. ac,fd")
    p.add_argument("--workers", type=int, default=None)
    plots = p.add_mutually_exclusive_group()
    plots.add_argument("--plots", dest="plots", action="store_true", default=True)
    plots.add_argument("--no-plots", dest="plots", action="store_false")

    p = sub.add_parser("tune", parents=[common], help="rate-optimal exponents")
    p.add_argument("--estimator", choices=("ac", "fd"), default="ac")
    p.add_argument("--hypothesis", choices=schedules.HYPOTHESES, default="H3")

    p = sub.add_parser("bias-variance", parents=[common], help="estimator moment sweep")
    p.add_argument("--estimator", choices=("ac", "fd"), default="ac")
    p.add_argument("--kernel", default="parabolic")
    p.add_argument("--smoothing", default="0.05,0.1,0.2,0.4", help="comma list of radii/steps")
    p.add_argument("--point", default=None, help="primal point, comma separated")
    p.add_argument("--samples", type=int, default=1, help="average size N in the MQE")
    plots = p.add_mutually_exclusive_group()
    plots.add_argument("--plots", dest="plots", action="store_true", default=True)
    plots.add_argument("--no-plots", dest="plots", action="store_false")

    p = sub.add_parser("kt-check", parents=[common], help="optimality residual")
    p.add_argument("--point", required=True, help="primal then dual coordinates, comma separated")
    p.add_argument("--pi", type=float, default=None, help="probability level override")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.1)

    p = sub.add_parser("field", parents=[common], help="mean-field drift study")
    p.add_argument("--pi", type=float, default=None)
    p.add_argument("--u-range", default=None, help="lo,hi for the primal axis")
    p.add_argument("--lam-range", default="0,3", help="lo,hi for the multiplier axis")
    p.add_argument("--grid-size", type=int, default=25)
    p.add_argument("--start", action="append", default=None, help="u,lam start for an integrated path")
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--dt", type=float, default=0.01)
    plots = p.add_mutually_exclusive_group()
    plots.add_argument("--plots", dest="plots", action="store_true", default=True)
    plots.add_argument("--no-plots", dest="plots", action="store_false")

    sub.add_parser("kernels", parents=[common], help="kernel catalog table")
    return parser


def _load_experiment(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.ExperimentConfig()
    run_over = {}
    if args.problem:
        run_over["problem_name"] = args.problem
    if getattr(args, "iterations", None) is not None:
        run_over["iterations"] = args.iterations
    if run_over:
        cfg = harness.ExperimentConfig(
            run=cfg.run.replace(**run_over),
            replications=cfg.replications,
            base_seed=cfg.base_seed,
            seeds=cfg.seeds,
            variants=cfg.variants,
            output_dir=cfg.output_dir,
            emit_plots=cfg.emit_plots,
            workers=cfg.workers,
        )
    return cfg


def _problem_from_args(args, default="portfolio", pi=None):
    name = args.problem or default
    overrides = {}
    if pi is not None:
        overrides["pi"] = pi
    return make_problem(name, **overrides)


def _cmd_solve(args) -> int:
    cfg = harness.load_config(args.config).run if args.config else RunConfig()
    changes = {}
    if args.problem:
        changes["problem_name"] = args.problem
    if args.pi is not None:
        changes["problem_overrides"] = {"pi": args.pi}
    if args.estimator:
        changes["estimator_kind"] = args.estimator
        changes["dual_estimate_mode"] = None
    if args.iterations is not None:
        changes["iterations"] = args.iterations
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = cfg.replace(**changes)
    problem = cfg.build_problem()
    trajectory = run(cfg, problem)
    term = trajectory.terminal
    print(f"terminal iterate after {term.k} steps (seed {cfg.seed}):")
    print("  u   =", np.array2string(term.u, precision=6))
    print("  lam =", np.array2string(term.lam, precision=6))
    try:
        resid = kt_residual(problem, term.u, term.lam)
        print(f"  kt residual = {resid:.6g}")
    except OracleUnavailableError:
        pass
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        names = harness.coordinate_names(problem.dim_u, problem.n_dual)
        path = os.path.join(args.out, "trajectory.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("k," + ",".join(names) + "\n")
            for i, k in enumerate(trajectory.ks):
                row = np.concatenate([trajectory.us[i], trajectory.lams[i]])
                fh.write(str(int(k)) + "," + ",".join(f"{x:.9g}" for x in row) + "\n")
        from . import plots

        plots.trajectory_figure(trajectory, args.out)
        print(f"wrote {path}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = _load_experiment(args)
    over = {}
    if args.replications is not None:
        over["replications"] = args.replications
    if args.seed is not None:
        over["base_seed"] = args.seed
        over["seeds"] = None
    if args.variants is not None:
        over["variants"] = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    if args.workers is not None:
        over["workers"] = args.workers
    out_dir = args.out or cfg.output_dir or DEFAULT_OUT
    cfg = harness.ExperimentConfig(
        run=cfg.run,
        replications=over.get("replications", cfg.replications),
        base_seed=over.get("base_seed", cfg.base_seed),
        seeds=over.get("seeds", cfg.seeds),
        variants=over.get("variants", cfg.variants),
        output_dir=out_dir,
        emit_plots=args.plots,
        workers=over.get("workers", cfg.workers),
    )
    results = harness.run_experiment(cfg)
    for variant, res in results.items():
        tail = res.series.mean[-1]
        labels = ", ".join(
            f"{n}={v:+.4f}" for n, v in zip(res.series.names, tail)
        )
        print(f"[{variant}] terminal mean error: {labels}")
        if res.diverged_seeds:
            print(f"[{variant}] diverged replications: {len(res.diverged_seeds)}")
        try:
            print(f"[{variant}] log-log MSE slope: {res.mse_slope():+.3f}")
        except ValidationError:
            pass
    print(f"outputs in {out_dir}")
    return 0


def _cmd_tune(args) -> int:
    tuning = schedules.optimal_tuning(args.estimator, args.hypothesis)
    g, b, d, k = tuning.as_floats()
    run_cfg = harness.load_config(args.config).run if args.config else RunConfig()
    print(f"estimator = {args.estimator}" + (f" ({args.hypothesis})" if args.estimator == "fd" else ""))
    print(f"gamma = {g:g}")
    print(f"beta  = {b:g}")
    print(f"delta = {d:g}")
    print(f"kappa = {k:g}")
    scale = run_cfg.a if args.estimator == "ac" else run_cfg.b
    letter = "a" if args.estimator == "ac" else "b"
    print(f"smoothing schedule: {letter} = {scale:g}, exponent = beta/2 = {b / 2:g}")
    print(
        "step schedules: eps_k = {d:g}/({e:g}+k), rho_k = {f:g}/({g:g}+k)".format(
            d=run_cfg.d, e=run_cfg.e, f=run_cfg.f, g=run_cfg.g
        )
    )
    return 0


def _cmd_bias_variance(args) -> int:
    problem = _problem_from_args(args)
    smoothings = _csv_floats(args.smoothing)
    if not smoothings:
        raise ValidationError("need at least one smoothing value")
    if args.point is not None:
        point = np.asarray(_csv_floats(args.point))
    elif problem.reference_saddle is not None:
        point = problem.reference_saddle[0]
    else:
        raise ValidationError("no reference point available; pass --point")
    cfg = EstimatorConfig(args.estimator, smoothings[0], kernel=kernel_by_name(args.kernel))
    reports = [
        analysis.bias_variance_oracle(problem, cfg, point, s, n_samples=args.samples)
        for s in sorted(smoothings)
    ]
    dim = problem.dim_u
    header = (
        "smoothing,"
        + ",".join(f"mean_{j}" for j in range(dim))
        + ","
        + ",".join(f"var_{j}" for j in range(dim))
        + ","
        + ",".join(f"bias_{j}" for j in range(dim))
        + ",mqe"
    )
    print(header)
    rows = []
    for rep in reports:
        cells = (
            [f"{rep.smoothing:.9g}"]
            + [f"{x:.9g}" for x in rep.mean]
            + [f"{x:.9g}" for x in rep.variance]
            + [f"{x:.9g}" for x in rep.bias]
            + [f"{rep.mqe:.9g}"]
        )
        rows.append(",".join(cells))
        print(rows[-1])
    if len(reports) >= 2:
        fit = analysis.fit_estimator_constants(problem, cfg, point, sorted(smoothings))
        s_star, mqe_star = analysis.optimal_smoothing(fit.A, fit.B, args.samples)
        print(f"# fitted A = {fit.A:.6g}, B = {fit.B:.6g}")
        print(f"# optimal smoothing s* = {s_star:.6g} (N={args.samples}), mqe* = {mqe_star:.6g}")
    out_dir = args.out or DEFAULT_OUT
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"bias_variance_{args.estimator}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n" + "\n".join(rows) + "\n")
    if args.plots:
        from . import plots

        plots.bias_variance_figure(reports, out_dir, stem=f"bias_variance_{args.estimator}")
    print(f"wrote {path}")
    return 0


def _cmd_kt_check(args) -> int:
    problem = _problem_from_args(args, default="toy", pi=args.pi)
    coords = _csv_floats(args.point)
    need = problem.dim_u + problem.n_dual
    if len(coords) != need:
        raise ValidationError(
            f"point needs {need} coordinates ({problem.dim_u} primal + {problem.n_dual} dual)"
        )
    u = np.asarray(coords[: problem.dim_u])
    lam = np.asarray(coords[problem.dim_u:])
    resid = kt_residual(problem, u, lam, eps=args.eps, rho=args.rho)
    prob = analytic_probability(problem, u)
    print(f"kt residual = {resid:.6g}")
    print(f"P(u) = {prob:.6g} (required level {problem.prob_level:g})")
    return 0


def _cmd_field(args) -> int:
    problem = _problem_from_args(args, default="toy", pi=args.pi)
    if problem.dim_u != 1:
        raise ValidationError("the drift grid is drawn for one-dimensional problems")
    if args.u_range:
        ulo, uhi = _csv_floats(args.u_range)
    else:
        u_opt = problem.reference_saddle[0][0]
        ulo, uhi = u_opt - 1.0, 1.5
    llo, lhi = _csv_floats(args.lam_range)
    n = args.grid_size
    us = np.linspace(ulo, uhi, n)
    lams = np.linspace(llo, lhi, n)
    ug, lg = np.meshgrid(us, lams)
    du = np.zeros_like(ug)
    dl = np.zeros_like(lg)
    for i in range(n):
        for j in range(n):
            drift = analysis.mean_field(problem, [ug[i, j]], [lg[i, j]])
            du[i, j], dl[i, j] = drift[0], drift[-1]

    out_dir = args.out or DEFAULT_OUT
    os.makedirs(out_dir, exist_ok=True)
    grid_path = os.path.join(out_dir, "field_grid.csv")
    with open(grid_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("u,lam,du,dlam\n")
        for i in range(n):
            for j in range(n):
                fh.write(
                    f"{ug[i, j]:.9g},{lg[i, j]:.9g},{du[i, j]:.9g},{dl[i, j]:.9g}\n"
                )

    starts = args.start or ["-2.5,1.0", "1.0,1.0"]
    paths = []
    for s_idx, start in enumerate(starts):
        u0, l0 = _csv_floats(start)
        path = analysis.ode_integrate(
            problem,
            IterateState([u0], [l0]),
            horizon=args.horizon,
            dt=args.dt,
            record_stride=max(1, int(round(1.0 / args.dt / 10))),
        )
        paths.append(path)
        uf, lf = path.final()
        print(f"path from ({u0:g}, {l0:g}) -> ({uf[0]:.6g}, {lf[-1]:.6g}) at t={args.horizon:g}")
        path_file = os.path.join(out_dir, f"field_path_{s_idx}.csv")
        with open(path_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,u,lam\n")
            for t, uu, ll in zip(path.ts, path.us, path.lams):
                fh.write(f"{t:.9g},{uu[0]:.9g},{ll[-1]:.9g}\n")
    if args.plots:
        from . import plots

        plots.field_figure(ug, lg, du, dl, paths, out_dir)
    print(f"wrote {grid_path}")
    return 0


def _cmd_kernels(args) -> int:
    print(f"{'name':<12}{'h(0)':>8}{'sigma2':>10}{'l2norm2':>10}{'score':>10}")
    for k in builtin_kernels():
        print(
            f"{k.name:<12}{k.peak():>8.4f}{k.sigma2:>10.4f}{k.l2norm2:>10.4f}"
            f"{kernel_score(k):>10.4f}"
        )
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "experiment": _cmd_experiment,
    "tune": _cmd_tune,
    "bias-variance": _cmd_bias_variance,
    "kt-check": _cmd_kt_check,
    "field": _cmd_field,
    "kernels": _cmd_kernels,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OracleUnavailableError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
