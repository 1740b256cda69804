"""Command line driver for batch experiments.

Subcommands: simulate-additive, simulate-multiplicative, generalized,
lambda-sweep, verify-all, mollify-demo. Each loads a JSON config (bundled
default when --config is omitted), applies dotted-path --set overrides plus
the --seed/--paths/--out shortcuts, runs the pipeline and writes CSV files
and a summary into the output directory.

Exit codes: 0 success / all checks passed, 1 a check or assertion failed,
2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, SolverError
from .grid import hminus1_norm_sq_rows, norm_hminus1
from .noise import (
    ConstantOperator,
    StepOperator,
    lipschitz_constant,
    rng_for,
    sample_path,
    stochastic_integral,
)
from .reporting import fmt_value, provenance_line, report_table, write_csv, write_summary
from .solver import (
    additive_path_solve,
    contraction_time_limit,
    generalized_solve,
    lambda_sweep,
    picard_solve,
    strong_identity_residual,
    trajectory_diagnostics,
)
from .verify import (
    check_apriori,
    check_contraction,
    check_doob,
    check_isometry,
    check_lipschitz_map,
    check_resta,
)

_COMMANDS = {}


def _command(name):
    def wrap(fn):
        _COMMANDS[name] = fn
        return fn
    return wrap


def _context(cfg: ExperimentConfig):
    L = cfg.laplacian()
    return {
        "L": L,
        "graph": cfg.graph(),
        "spec": cfg.noise_spec(),
        "scfg": cfg.solver_config(),
        "x0": cfg.initial_field(L),
        "B": cfg.diffusion(L),
        "prov": provenance_line(cfg.digest, cfg.master_seed),
    }


def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def _write_trajectory(path, traj, prov):
    rows = []
    for i, t in enumerate(traj.times):
        for node in range(traj.states.shape[1]):
            rows.append((t, node, traj.states[i, node], traj.selections[i, node]))
    write_csv(path, ["time", "node", "state", "selection"], rows, prov)


def _write_martingale(path_obj, out_path, prov):
    jump_set = {(int(i), int(k)) for i, k in zip(path_obj.jump_indices, path_obj.jump_modes)}
    rows = []
    for k in range(path_obj.spec.n_modes):
        for i, t in enumerate(path_obj.times):
            rows.append((t, k, path_obj.values[k, i], (i, k) in jump_set))
    write_csv(out_path, ["time", "mode", "value", "is_jump"], rows, prov)


@_command("simulate-additive")
def _cmd_simulate_additive(cfg: ExperimentConfig) -> int:
    ctx = _context(cfg)
    L, graph, spec, scfg = ctx["L"], ctx["graph"], ctx["spec"], ctx["scfg"]
    x0, prov = ctx["x0"], ctx["prov"]
    path = sample_path(spec, cfg.horizon, cfg.dt, rng_for(cfg.master_seed, 0))
    op = ConstantOperator(ctx["B"].mode_fields(x0, L))
    gm = stochastic_integral(op, path, L)
    traj = additive_path_solve(graph, scfg, L, x0, gm)

    _write_trajectory(_out(cfg, "trajectory.csv"), traj, prov)
    _write_martingale(path, _out(cfg, "martingale.csv"), prov)
    diag = trajectory_diagnostics(traj, graph, L)
    resid = strong_identity_residual(traj, gm, x0, L)
    lines = [
        "command: simulate-additive",
        f"horizon: {fmt_value(cfg.horizon)}",
        f"steps: {len(traj.times) - 1}",
        f"lambda: {fmt_value(scfg.lam)}",
        f"final_dual_norm: {fmt_value(float(diag['dual_norms'][-1]))}",
        f"potential_integral: {fmt_value(diag['potential_integral'])}",
        f"conjugate_integral: {fmt_value(diag['conjugate_integral'])}",
        f"max_identity_residual: {fmt_value(float(resid.max()))}",
    ]
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    print("\n".join(lines))
    return 0


@_command("simulate-multiplicative")
def _cmd_simulate_multiplicative(cfg: ExperimentConfig) -> int:
    ctx = _context(cfg)
    L, graph, spec, scfg = ctx["L"], ctx["graph"], ctx["spec"], ctx["scfg"]
    x0, B, prov = ctx["x0"], ctx["B"], ctx["prov"]
    paths = [sample_path(spec, cfg.horizon, cfg.dt, rng_for(cfg.master_seed, i))
             for i in range(cfg.n_paths)]
    res = picard_solve(graph, B, spec, scfg, L, x0, paths)

    rows = []
    for w, ((t0, t1), dists, factors) in enumerate(
            zip(res.windows, res.window_distances, res.window_factors)):
        for it, dist in enumerate(dists):
            factor = factors[it - 1] if 0 < it <= len(factors) else None
            rows.append((w, t0, t1, it + 1, dist, factor))
    write_csv(_out(cfg, "picard.csv"),
              ["window", "t_start", "t_end", "iteration", "distance_sq", "factor"],
              rows, prov)

    sums = np.zeros(len(res.base_times))
    for traj, p in zip(res.trajectories, paths):
        sums += hminus1_norm_sq_rows(L, traj.states[p.base_indices])
    write_csv(_out(cfg, "ensemble_norms.csv"), ["time", "mean_sq_dual_norm"],
              list(zip(res.base_times, sums / len(paths))), prov)
    _write_trajectory(_out(cfg, "trajectory0.csv"), res.trajectories[0], prov)

    lines = [
        "command: simulate-multiplicative",
        f"paths: {cfg.n_paths}",
        f"iterations: {res.iterations}",
        f"windows: {len(res.windows)}",
        f"window_length: {fmt_value(res.window_length)}",
        f"lipschitz_estimate: {fmt_value(res.lipschitz_estimate)}",
        f"converged: {fmt_value(res.converged)}",
    ]
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    print("\n".join(lines))
    return 0


@_command("lambda-sweep")
def _cmd_lambda_sweep(cfg: ExperimentConfig) -> int:
    ctx = _context(cfg)
    L, graph, spec, scfg = ctx["L"], ctx["graph"], ctx["spec"], ctx["scfg"]
    x0, prov = ctx["x0"], ctx["prov"]
    path = sample_path(spec, cfg.horizon, cfg.dt, rng_for(cfg.master_seed, 0))
    op = ConstantOperator(ctx["B"].mode_fields(x0, L))
    gm = stochastic_integral(op, path, L)
    report = lambda_sweep(graph, scfg, L, x0, gm, cfg.sweep_lambdas())

    rows = []
    for i, lam in enumerate(report.lambdas):
        sup_diff = report.sup_diffs[i - 1] if i > 0 else None
        rows.append((lam, sup_diff, report.gap_integrals[i], report.gap_ratios[i],
                     report.potential_integrals[i], report.conjugate_integrals[i]))
    write_csv(_out(cfg, "sweep.csv"),
              ["lambda", "sup_diff_prev", "gap_integral", "gap_ratio",
               "potential_integral", "conjugate_integral"],
              rows, prov)
    lines = [
        "command: lambda-sweep",
        f"lambdas: {len(report.lambdas)}",
        f"initial_norm_sq: {fmt_value(report.initial_norm_sq)}",
        f"max_gap_ratio: {fmt_value(float(report.gap_ratios.max()))}",
    ]
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    print("\n".join(lines))
    return 0


@_command("generalized")
def _cmd_generalized(cfg: ExperimentConfig) -> int:
    ctx = _context(cfg)
    L, graph, spec, scfg = ctx["L"], ctx["graph"], ctx["spec"], ctx["scfg"]
    x0, B, prov = ctx["x0"], ctx["B"], ctx["prov"]
    levels = cfg.generalized_levels()
    paths = [sample_path(spec, cfg.horizon, cfg.dt, rng_for(cfg.master_seed, i))
             for i in range(cfg.n_paths)]
    res = generalized_solve(graph, B, spec, scfg, L, x0, levels, paths)

    rows = []
    for i, level in enumerate(res.levels):
        sup_mean = res.sup_mean_distances[i - 1] if i > 0 else None
        mean_sup = res.mean_sup_distances[i - 1] if i > 0 else None
        rows.append((level, sup_mean, mean_sup))
    write_csv(_out(cfg, "levels.csv"),
              ["level", "sup_mean_dist_prev", "mean_sup_dist_prev"], rows, prov)
    lines = [
        "command: generalized",
        f"levels: {' '.join(str(n) for n in res.levels)}",
        f"cauchy_ok: {fmt_value(res.cauchy_ok)}",
    ]
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    print("\n".join(lines))
    return 0 if res.cauchy_ok else 1


@_command("mollify-demo")
def _cmd_mollify_demo(cfg: ExperimentConfig) -> int:
    from .grid import mollify

    ctx = _context(cfg)
    L, prov = ctx["L"], ctx["prov"]
    rng = np.random.default_rng(cfg.master_seed)
    rough = rng.standard_normal(L.n)
    base_norm = norm_hminus1(rough, L)
    rows = []
    ok = True
    prev_defect = None
    for level in (1, 2, 4, 8, 16, 32):
        smoothed = mollify(rough, level, L)
        defect = norm_hminus1(smoothed - rough, L)
        ratio = norm_hminus1(smoothed, L) / base_norm
        ok = ok and ratio <= 1.0 + 1e-12
        if prev_defect is not None:
            ok = ok and defect <= prev_defect
        prev_defect = defect
        rows.append((level, defect, ratio))
    write_csv(_out(cfg, "mollify.csv"), ["level", "defect_dual_norm", "norm_ratio"],
              rows, prov)
    lines = ["command: mollify-demo", f"contraction_and_decrease: {fmt_value(ok)}"]
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    print("\n".join(lines))
    return 0 if ok else 1


@_command("verify-all")
def _cmd_verify_all(cfg: ExperimentConfig) -> int:
    ctx = _context(cfg)
    L, graph, spec, scfg = ctx["L"], ctx["graph"], ctx["spec"], ctx["scfg"]
    x0, B, prov = ctx["x0"], ctx["B"], ctx["prov"]
    seed = cfg.master_seed
    horizon, n_paths = cfg.horizon, cfg.n_paths

    fields = B.mode_fields(x0, L)
    op_full = ConstantOperator(fields)
    op_half = ConstantOperator(0.5 * fields)
    op_pc = StepOperator([0.0, 0.5 * horizon, horizon],
                         np.stack([fields, 0.5 * fields]))

    reports = [
        check_doob(spec, op_full, horizon, cfg.dt, n_paths, seed, L),
        check_isometry(spec, op_full, horizon, cfg.dt, n_paths, seed + 1, L),
        check_isometry(spec, op_pc, horizon, cfg.dt, n_paths, seed + 2, L),
        check_resta(graph, scfg, L, spec, (x0, op_full),
                    (0.5 * x0, op_half), horizon, max(100, n_paths // 2), seed + 3),
        check_apriori(graph, scfg, L, x0,
                      stochastic_integral(op_full,
                                          sample_path(spec, horizon, cfg.dt,
                                                      rng_for(seed + 4, 0)), L),
                      cfg.sweep_lambdas()),
    ]
    k_est = lipschitz_constant(B, spec, L, seed=seed + 5)
    threshold = contraction_time_limit(k_est, scfg.epsilon)
    T0 = min(horizon, 0.5 * threshold) if np.isfinite(threshold) else horizon
    reports.extend(check_contraction(graph, B, spec, scfg, L, x0, [T0],
                                     max(50, n_paths // 2), seed + 5))
    reports.append(check_lipschitz_map(graph, B, spec, scfg, L, x0,
                                       x0 + 0.5 * np.roll(x0, 1) + 0.1,
                                       horizon, max(50, n_paths // 4), seed + 6))

    header, rows = report_table(reports)
    write_csv(_out(cfg, "reports.csv"), header, rows, prov)
    lines = []
    for r in reports:
        lines.append(
            f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: estimate={fmt_value(r.estimate)} "
            f"{'target' if r.kind == 'identity' else 'bound'}={fmt_value(r.bound_or_target)} "
            f"se={fmt_value(r.std_error)} paths={r.n_paths}"
        )
    n_failed = sum(not r.passed for r in reports)
    lines.append(f"checks: {len(reports)} failed: {n_failed}")
    write_summary(_out(cfg, "summary.txt"), lines, prov)
    for r, line in zip(reports, lines):
        print(f"{line} runtime={r.runtime_s:.2f}s")
    print(lines[-1])
    return 0 if n_failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmlab",
        description="Batch experiments for a jump-driven nonlinear diffusion solver.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate-additive", "single-path solve with the coefficient frozen at the datum"),
        ("simulate-multiplicative", "ensemble fixed-point solve with state-dependent noise"),
        ("generalized", "mollified solves of a rough coefficient with Cauchy distances"),
        ("lambda-sweep", "regularization sweep on one fixed path"),
        ("verify-all", "run every statistical check and report pass/fail"),
        ("mollify-demo", "mollifier contraction and convergence table"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="path to a JSON config (bundled default if omitted)")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="PATH=VALUE", help="dotted-path override, repeatable")
        sp.add_argument("--seed", type=int, help="override run.master_seed")
        sp.add_argument("--paths", type=int, help="override run.n_paths")
        sp.add_argument("--out", help="override run.output_dir")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default()
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.master_seed={args.seed}")
    if args.paths is not None:
        overrides.append(f"run.n_paths={args.paths}")
    if args.out is not None:
        overrides.append(f"run.output_dir={args.out}")
    if overrides:
        cfg = cfg.apply_overrides(overrides)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
