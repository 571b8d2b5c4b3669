"""Command line entry point ``qcl``."""

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .dynamics import ControlField
from .errors import QclError
from .fields import synthesize_with_log
from .flow import FlowOptions
from .harness import SweepConfig, master_seed_from_env, run_single, run_sweep, run_tolerance_grid
from .hessian import hessian_at
from .problems import catalog, get_problem

FULL_RUNS = 100


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(args):
    return args.seed if args.seed is not None else master_seed_from_env()


def _flow_options(args, tau=None):
    kw = {"tau": args.tau if tau is None else tau}
    if getattr(args, "eta", None) is not None:
        kw["eta_override"] = args.eta
    if getattr(args, "max_iter", None) is not None:
        kw["max_iterations"] = args.max_iter
    if getattr(args, "monotone_atol", None) is not None:
        kw["monotone_atol"] = args.monotone_atol
    return FlowOptions(**kw)


def cmd_catalog(args):
    print(json.dumps(catalog(), indent=1))


def cmd_run(args):
    seed = _seed(args)
    res, meta = run_single(args.problem, args.sigma0, seed, _flow_options(args), args.T, args.L)
    if args.trace:
        res.write_trace(args.trace)
    if args.save_field:
        res.final_field.save(args.save_field)
    out = {"status": res.status.value, "iterations": res.iterations, "rejected": res.rejected,
           "j_initial": res.j_initial, "j_final": res.j_final, "eta": res.eta,
           "sigma_opt": None if np.isnan(res.sigma_opt) else res.sigma_opt,
           "max_unitarity_error": res.max_unitarity_error, "meta": meta}
    print(json.dumps(out, indent=1, default=str))


def _print_points(points):
    print("point  value        runs  conv  failed  maxiter  mse        sigma_opt   success")
    for p in points:
        mse = "-" if p.mse is None else f"{p.mse:.1f}"
        sig = "-" if p.mean_sigma_opt is None else f"{p.mean_sigma_opt:.3e}"
        print(f"{p.point:<6d} {p.value:<12.4g} {p.n_runs:<5d} {p.n_converged:<5d} {p.n_failed:<7d} "
              f"{p.n_maxiter:<8d} {mse:<10s} {sig:<11s} {p.success_fraction:.3f}")


def cmd_sweep(args):
    if args.config:
        cfg = SweepConfig.from_json(args.config)
        over = {}
        if args.out:
            over["output_dir"] = args.out
        if args.workers:
            over["workers"] = args.workers
        if over:
            cfg = replace(cfg, **over)
    else:
        runs = FULL_RUNS if args.full else args.runs
        cfg = SweepConfig(
            problem=args.problem, runs_per_point=runs, sigma0_list=args.sigma0 or (),
            tau_list=args.tau_list or (), t_list=args.T or (), sigma0=args.fixed_sigma0,
            tau=args.fixed_tau, l_slices=args.L, options=_flow_options(args),
            master_seed=_seed(args), workers=args.workers or 1, output_dir=args.out,
            record_timing=args.timing)
    stats = run_sweep(cfg)
    print(f"problem {cfg.problem}, axis {cfg.axis}, master seed {cfg.master_seed}")
    _print_points(stats.points)


def cmd_taugrid(args):
    runs = FULL_RUNS if args.full else args.runs
    grid = run_tolerance_grid(args.problem, args.sigma0, args.tau, runs, master_seed=_seed(args),
                              workers=args.workers, options=_flow_options(args, tau=args.tau[0]),
                              output_dir=args.out)
    print("sigma0 \\ tau " + " ".join(f"{t:>8.0e}" for t in grid.tau_list))
    for s, row in zip(grid.sigma0_list, grid.failed):
        print(f"{s:<13.0e}" + " ".join(f"{c:>8d}" for c in row))
    bad = grid.violations()
    print("failures non-increasing as tau decreases: " + ("yes" if not bad else f"no {bad}"))


def cmd_hessian(args):
    seed = _seed(args) if args.problem.upper() == "F" or args.field == "random" else 0
    prob = get_problem(args.problem, seed=seed, l_slices=args.L)
    if args.field == "zero":
        fld = prob.zero_field()
    elif args.field == "random":
        spec = prob.init_spec(seed, args.sigma0 if prob.uses_rfs else None)
        fld, draws = synthesize_with_log(spec, prob.system, prob.t_final, prob.l_slices)
    else:
        fld = ControlField.load(args.field)
    rep = hessian_at(prob, fld, step=args.step, force=args.force)
    if args.out:
        rep.save(args.out)
    print(json.dumps({"problem": prob.label, "classification": rep.classification.value,
                      "tolerance": rep.tolerance, "step": rep.step,
                      "min_eigenvalue": float(rep.eigenvalues[0]),
                      "max_eigenvalue": float(rep.eigenvalues[-1])}, indent=1))


def build_parser():
    ap = argparse.ArgumentParser(prog="qcl", description="Gradient-flow quantum control landscapes.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", help="list the built-in control problems as JSON")

    def flow_args(p, tau=True):
        if tau:
            p.add_argument("--tau", type=float, default=1e-8, help="absolute error tolerance")
        p.add_argument("--eta", type=float, help="override the convergence threshold")
        p.add_argument("--max-iter", type=int, help="cap on accepted steps")
        p.add_argument("--monotone-atol", type=float, help="slack in the monotonicity check")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (fallback: $QCL_SEED)")

    p = sub.add_parser("run", help="one optimization")
    p.add_argument("--problem", required=True)
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--T", type=float)
    p.add_argument("--L", type=int)
    p.add_argument("--trace", help="write the per-step trace CSV here")
    p.add_argument("--save-field", help="write the optimized field CSV here")
    flow_args(p)

    p = sub.add_parser("sweep", help="seeded campaign over sigma0, tau or T")
    p.add_argument("--problem")
    axis = p.add_mutually_exclusive_group()
    axis.add_argument("--sigma0", type=_floats)
    axis.add_argument("--tau-list", type=_floats)
    axis.add_argument("--T", type=_floats)
    p.add_argument("--fixed-sigma0", type=float, default=1.0, help="sigma0 for tau or T sweeps")
    p.add_argument("--fixed-tau", type=float, default=1e-8, help="tau for sigma0 or T sweeps")
    p.add_argument("--L", type=int)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--full", action="store_true", help=f"{FULL_RUNS} runs per point")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="JSON document with SweepConfig fields")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    flow_args(p, tau=False)
    p.set_defaults(tau=1e-8)

    p = sub.add_parser("taugrid", help="failure counts over a sigma0 x tau grid")
    p.add_argument("--problem", required=True)
    p.add_argument("--sigma0", type=_floats, required=True)
    p.add_argument("--tau", type=_floats, required=True)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--full", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    flow_args(p, tau=False)

    p = sub.add_parser("hessian", help="finite-difference Hessian and its classification")
    p.add_argument("--problem", required=True)
    p.add_argument("--field", default="zero", help="'zero', 'random', or a saved field CSV")
    p.add_argument("--sigma0", type=float, default=0.5, help="RFS of a random field")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--L", type=int, help="override the number of time slices")
    p.add_argument("--force", action="store_true", help="allow more than 1024 variables")
    p.add_argument("--out", help="eigenvalue CSV path (summary goes to PATH.json)")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and not args.config:
        if not args.problem:
            print("qcl sweep: --problem is required without --config", file=sys.stderr)
            return 2
        if not (args.sigma0 or args.tau_list or args.T):
            print("qcl sweep: give one of --sigma0, --tau-list, --T", file=sys.stderr)
            return 2
    handlers = {"catalog": cmd_catalog, "run": cmd_run, "sweep": cmd_sweep,
                "taugrid": cmd_taugrid, "hessian": cmd_hessian}
    try:
        handlers[args.command](args)
    except (QclError, ValueError) as exc:
        print(f"qcl {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
