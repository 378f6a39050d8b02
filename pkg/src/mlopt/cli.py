"""Benchmark harness: build a problem, run solver variants, persist traces.

Subcommands::

    mlopt solve     --config exp.ini [--out DIR] [--seed N] [--levels N] [--side N]
    mlopt compare   --config exp.ini [...]
    mlopt lipschitz --config exp.ini [...]

Exit codes: 0 success, 1 solver non-convergence (stall/abort), 2 config
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import serialize
from .config import ConfigError, ExperimentConfig
from .hierarchy import DomainError
from .linesearch import LineSearchConfig
from .problems import ProblemBundle, build_problem
from .solver import (STATUS_STALLED, SolveResult, SolverConfig,
                     solve_multilevel)
from .tomography import HuberParams, lipschitz_estimate

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_bundle(cfg: ExperimentConfig) -> ProblemBundle:
    kind = cfg.problem_kind
    common = dict(side=cfg.problem_side, levels=cfg.problem_levels,
                  phantom_kind=cfg.problem_phantom, seed=cfg.problem_seed)
    if kind == "huber_tv":
        return build_problem(kind, undersampling=cfg.problem_undersampling,
                             lam=cfg.lam, rho=cfg.problem_rho, **common)
    if kind == "kl_box":
        return build_problem(kind, undersampling=cfg.problem_undersampling,
                             beta_dom=cfg.problem_beta_domain,
                             background=cfg.problem_kl_background, **common)
    return build_problem(kind, mu=cfg.problem_mu, gamma=cfg.problem_gamma,
                         **common)


def _solver_config(cfg: ExperimentConfig, solver_name: str,
                   constrained: bool) -> SolverConfig:
    multilevel = solver_name.startswith("ml_")
    if constrained:
        fine_method = "lbfgs" if solver_name == "lbfgs" else "projected_gd"
    else:
        fine_method = "lbfgs" if solver_name == "lbfgs" else "gradient_descent"
    if multilevel and cfg.solver_fine_method != "auto":
        fine_method = cfg.solver_fine_method
    return SolverConfig(
        levels=cfg.problem_levels if multilevel else 1,
        kappa=cfg.solver_kappa,
        epsilon=cfg.solver_epsilon,
        max_outer=cfg.solver_max_outer,
        grad_tol=cfg.solver_grad_tol,
        grad_tol_rel=cfg.solver_grad_tol_rel,
        fine_method=fine_method,
        lbfgs_pairs=cfg.solver_lbfgs_pairs,
        coarse_model="algebraic" if solver_name == "ml_algebraic" else "geometric",
        coarse_solver=cfg.solver_coarse_solver,
        coarse_iters_per_level=cfg.solver_coarse_iters or None,
        fine_steps_per_level=cfg.solver_fine_steps or None,
        constrained=constrained,
        line_search_method=cfg.solver_line_search,
        line_search=LineSearchConfig(
            rho1=cfg.solver_ls_rho1, c2=cfg.solver_ls_c2,
            beta=cfg.solver_ls_beta, alpha0=cfg.solver_ls_alpha0,
            max_trials=cfg.solver_ls_max_trials),
        arc_search=LineSearchConfig(
            rho1=cfg.solver_arc_rho1, c2=0.9, beta=cfg.solver_arc_beta,
            alpha0=cfg.solver_arc_alpha0,
            max_trials=cfg.solver_arc_max_trials),
    )


def _run_one(cfg: ExperimentConfig, solver_name: str, out_dir: str
             ) -> SolveResult:
    """Build a fresh problem (independent counters), solve, persist."""
    bundle = _build_bundle(cfg)
    solver_cfg = _solver_config(cfg, solver_name,
                                constrained=bundle.box is not None)
    serialize.ensure_dir(out_dir)

    snapshots = set(cfg.output_snapshots)
    side = bundle.side

    def on_step(k_done, y, f):
        if k_done in snapshots and cfg.output_save_images:
            snap_dir = serialize.ensure_dir(os.path.join(out_dir, "snapshots"))
            serialize.write_pgm(os.path.join(snap_dir, f"snap_k{k_done:04d}.pgm"),
                                y, side)

    result = solve_multilevel(bundle.hierarchy, bundle.y0, solver_cfg,
                              box=bundle.box,
                              on_step=on_step if snapshots else None)

    serialize.write_trace_csv(os.path.join(out_dir, "trace.csv"),
                              result.trace.rows)
    summary = dict(result.summary)
    summary["solver"] = solver_name
    summary["problem"] = cfg.problem_kind
    summary["side"] = side
    summary["levels"] = cfg.problem_levels
    summary["seed"] = cfg.problem_seed
    serialize.write_summary_json(os.path.join(out_dir, "summary.json"), summary)

    if cfg.output_save_images:
        serialize.write_pgm(os.path.join(out_dir, "final.pgm"), result.y, side)
        serialize.write_image_csv(os.path.join(out_dir, "final_image.csv"),
                                  result.y)
    if cfg.output_save_operators:
        op_dir = serialize.ensure_dir(os.path.join(out_dir, "operators"))
        for ell, pair in enumerate(bundle.transfer_pairs()):
            serialize.write_matrix_market(
                os.path.join(op_dir, f"restriction_{ell}.mtx"), pair.restriction)
            serialize.write_matrix_market(
                os.path.join(op_dir, f"prolongation_{ell}.mtx"), pair.prolongation)
        for ell, proj in enumerate(bundle.projectors):
            serialize.write_matrix_market(
                os.path.join(op_dir, f"projector_{ell}.mtx"), proj.matrix)
    return result


def cmd_solve(cfg: ExperimentConfig) -> int:
    out_dir = cfg.output_dir
    result = _run_one(cfg, cfg.solver_name, out_dir)
    print(f"[mlopt solve] {cfg.solver_name} on {cfg.problem_kind} "
          f"side={cfg.problem_side}: status={result.status} "
          f"f={result.f_final:.6e} grad={result.grad_norm_final:.3e} "
          f"-> {out_dir}")
    return EXIT_SOLVER if result.status == STATUS_STALLED else EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    names = []
    for name in cfg.solver_solvers:
        if name not in names:
            names.append(name)
    results = {}
    worst = EXIT_OK
    for name in names:
        out_dir = os.path.join(cfg.output_dir, name)
        try:
            results[name] = _run_one(cfg, name, out_dir)
        except DomainError as exc:
            print(f"[mlopt compare] {name} aborted: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_SOLVER)
            continue
        if results[name].status == STATUS_STALLED:
            worst = max(worst, EXIT_SOLVER)

    if results:
        f0 = {name: res.trace.column("f")[0] if len(res.trace.finest())
              else res.f_final for name, res in results.items()}
        f_best = min(res.f_final for res in results.values())
        lines = ["solver,k,rel,grad_evals"]
        for name, res in results.items():
            fs = res.trace.column("f")
            ks = res.trace.column("k")
            evals = res.trace.column("grad_evals")
            denom = max(f0[name] - f_best, 1e-300)
            for k, f, ev in zip(ks, fs, evals):
                rel = max(f - f_best, 0.0) / denom
                lines.append(f"{name},{int(k)},{rel:.17g},{int(ev)}")
        serialize.ensure_dir(cfg.output_dir)
        with open(os.path.join(cfg.output_dir, "compare_rel.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        for name, res in results.items():
            print(f"[mlopt compare] {name}: status={res.status} "
                  f"f={res.f_final:.6e} grad_evals="
                  f"{res.summary['eval_counters'][0]['gradients']}")
    return worst


def cmd_lipschitz(cfg: ExperimentConfig) -> int:
    if cfg.problem_kind != "huber_tv":
        raise ConfigError("lipschitz tables are defined for problem.kind = "
                          "huber_tv")
    bundle = _build_bundle(cfg)
    params = bundle.huber_params or HuberParams(lam=cfg.lam, rho=cfg.problem_rho)
    rows = ["side,l_grad_psi,l_grad_phi_bound"]
    estimates = []
    for ell, (grid, proj, diff) in enumerate(zip(bundle.grids,
                                                 bundle.projectors,
                                                 bundle.diff_ops)):
        pair = bundle.transfer_pairs()[ell] if ell < len(bundle.grids) - 1 else None
        l_psi, _ = lipschitz_estimate(proj, diff, params)
        estimates.append((grid.side, l_psi, pair))
    for ell, (side, l_psi, _) in enumerate(estimates):
        if ell == 0:
            l_phi = float("nan")
        else:
            # surrogate at this grid built from the next finer level
            finer_l_psi = estimates[ell - 1][1]
            pair_above = estimates[ell - 1][2]
            l_phi = pair_above.omega ** 2 * finer_l_psi
        rows.append(f"{side},{l_psi:.17g},{l_phi:.17g}")
    serialize.ensure_dir(cfg.output_dir)
    path = os.path.join(cfg.output_dir, "lipschitz.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"[mlopt lipschitz] wrote {path}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlopt",
        description="Multilevel optimization benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("solve", "run one experiment"),
                            ("compare", "run the configured solver set"),
                            ("lipschitz", "emit the per-level Lipschitz table")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI experiment file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="override problem.seed")
        p.add_argument("--levels", type=int, help="override problem.levels")
        p.add_argument("--side", type=int, help="override problem.side")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_ini(args.config)
        cfg = cfg.override(seed=args.seed, levels=args.levels, side=args.side,
                           out=args.out)
    except ConfigError as exc:
        print(f"[mlopt] config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"[mlopt] cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_lipschitz(cfg)
    except ConfigError as exc:
        print(f"[mlopt] config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"[mlopt] solver aborted on domain violation: {exc}",
              file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"[mlopt] I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
