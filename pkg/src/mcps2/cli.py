"""Command line interface: gen, certify, solve, experiment {cond-rate, recovery}."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness
from .conditions import Hyperparams, candidate_minimizer, certify, re_estimate
from .io import load_instance, save_instance, write_json
from .problem import GeneratorConfig, generate_instance
from .solvers import admm_lasso, admm_mcps2, global_minimize_bruteforce, warm_start


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    if ":" in text:
        lo, hi, step = (int(v) for v in text.split(":"))
        return tuple(range(lo, hi + 1, step))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _lambdas(text):
    out = {}
    for item in text.split(","):
        if item.strip():
            key, val = item.split("=")
            out[key.strip()] = float(val)
    return out


def _add_generator_args(p, m_required=True):
    p.add_argument("--n", type=int, default=100)
    if m_required:
        p.add_argument("--m", type=int, default=40)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--lo", type=float, default=0.5, help="smallest nonzero magnitude")
    p.add_argument("--hi", type=float, default=1.0, help="largest nonzero magnitude")
    p.add_argument("--noise", type=float, default=0.0, help="exact inf-norm of the noise")


def _cmd_gen(args):
    cfg = GeneratorConfig(
        n=args.n, m=args.m, k=args.k, d=args.d, magnitude_range=(args.lo, args.hi),
        noise_inf_bound=args.noise, rng_seed=args.seed,
    )
    inst = generate_instance(cfg)
    save_instance(inst, args.output)
    print(f"wrote {args.output}: m={inst.m} n={inst.n} k={inst.k} mu={inst.mu:.4g} seed={args.seed}")


def _print_table(report):
    rows = [(k, v) for k, v in report.to_dict().items() if k not in ("verdicts", "notes")]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v:.6g}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    print()
    for k, v in report.verdicts.items():
        print(f"{k:<{width}}  {'PASS' if v else 'fail'}")
    for note in report.notes:
        print(f"note: {note}")


def _cmd_certify(args):
    inst = load_instance(args.instance)
    phi, source = args.phi, "user"
    if phi is None and args.re_samples > 0:
        phi = re_estimate(inst.A, inst.support, args.alpha, args.re_samples, args.re_seed)
        source = f"re_estimate(samples={args.re_samples}, seed={args.re_seed}) [heuristic upper bound]"
    report = certify(inst, args.lam, epsilon=args.epsilon, alpha=args.alpha, phi=phi, phi_source=source)
    _print_table(report)
    if args.output:
        write_json(report.to_dict(), args.output)


def _cmd_solve(args):
    inst = load_instance(args.instance)
    if args.method == "oracle":
        res = global_minimize_bruteforce(inst, args.lam, args.grid_step)
    else:
        hp = Hyperparams(lam=args.lam, rho=args.rho, max_iters=args.max_iters,
                         tol_primal=args.tol_primal, tol_dual=args.tol_dual)
        init = None
        if args.init == "candidate":
            init = warm_start(inst, candidate_minimizer(inst, args.lam).x_star, args.lam)
        solver = admm_mcps2 if args.method == "mcps2" else admm_lasso
        res = solver(inst, hp, init=init)
    out = res.to_dict()
    print(
        f"{res.solver_id}: objective={res.objective:.10g} iterations={res.iterations} "
        f"converged={res.converged} runtime={res.runtime_seconds:.3g}s"
    )
    print("support:", np.flatnonzero(np.abs(res.x_hat) > 1e-3 * inst.d).tolist())
    if args.output:
        write_json(out, args.output)


def _experiment_config(args, methods):
    base = GeneratorConfig(
        n=args.n, m=max(args.m_grid), k=args.k, d=args.d, magnitude_range=(args.lo, args.hi),
        noise_inf_bound=args.noise,
    )
    return harness.ExperimentConfig(
        base=base,
        m_grid=args.m_grid,
        trials_per_m=args.trials,
        methods=methods,
        lambda_grid=args.lambda_grid or (),
        master_seed=args.seed,
        output_dir=args.out,
        emit_charts=args.charts,
        workers=args.workers,
        **args.extra,
    )


def _cmd_experiment(args):
    if args.kind == "cond-rate":
        args.extra = dict(noise_levels=args.noise_levels, epsilon=args.epsilon,
                          alpha=args.alpha, strict_c3=args.strict)
        cfg = _experiment_config(args, args.methods or harness.CONDITION_METHODS)
        report = harness.run_condition_rate_experiment(cfg)
    else:
        args.extra = dict(lambdas=args.lambdas, pilot_trials=args.pilot_trials, rho=args.rho,
                          max_iters=args.max_iters, tau=args.tau)
        cfg = _experiment_config(args, args.methods or ("lasso_admm", "mcps2_admm"))
        report = harness.run_recovery_experiment(cfg)
    for s in report.summary:
        print(f"{s['method']:<24} m={s['m']:<4} rate={s['rate']:.3f} "
              f"fp={s['fp_rate']:.4f} fn={s['fn_rate']:.4f} runtime={s['mean_runtime']:.3g}s")
    if args.out:
        harness.emit_report(report, args.out, args.charts)
        print(f"wrote report to {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="mcps2", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    _add_generator_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_gen)

    c = sub.add_parser("certify", help="print every certificate quantity for an instance")
    c.add_argument("instance")
    c.add_argument("--lam", type=float, required=True)
    c.add_argument("--epsilon", type=float, default=1e-3)
    c.add_argument("--alpha", type=float, default=3.0)
    c.add_argument("--phi", type=float, default=None, help="override the RE constant")
    c.add_argument("--re-samples", type=int, default=10_000)
    c.add_argument("--re-seed", type=int, default=0)
    c.add_argument("-o", "--output")
    c.set_defaults(func=_cmd_certify)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=("mcps2", "lasso", "oracle"), default="mcps2")
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--rho", type=float, default=None)
    s.add_argument("--max-iters", type=int, default=10_000)
    s.add_argument("--tol-primal", type=float, default=None)
    s.add_argument("--tol-dual", type=float, default=None)
    s.add_argument("--init", choices=("zero", "candidate"), default="zero")
    s.add_argument("--grid-step", type=float, default=None)
    s.add_argument("-o", "--output")
    s.set_defaults(func=_cmd_solve)

    e = sub.add_parser("experiment", help="Monte Carlo experiments")
    esub = e.add_subparsers(dest="kind", required=True)
    for kind in ("cond-rate", "recovery"):
        x = esub.add_parser(kind)
        _add_generator_args(x, m_required=False)
        x.add_argument("--m-grid", type=_ints, default=tuple(range(10, 101, 10)),
                       help="comma list or lo:hi:step")
        x.add_argument("--trials", type=int, default=200)
        x.add_argument("--methods", type=lambda t: tuple(t.split(",")), default=None)
        x.add_argument("--lambda-grid", type=_floats, default=None)
        x.add_argument("--seed", type=int, default=0, help="master seed")
        x.add_argument("--out", default=None, help="output directory")
        x.add_argument("--charts", action="store_true")
        x.add_argument("--workers", type=int, default=1)
        if kind == "cond-rate":
            x.add_argument("--noise-levels", type=_floats, default=None,
                           help="comma list of noise inf-norms, e.g. 0,1e-3")
            x.add_argument("--epsilon", type=float, default=1e-3)
            x.add_argument("--alpha", type=float, default=3.0)
            x.add_argument("--strict", action="store_true", help="use the strict-epsilon C3 verdict")
        else:
            x.add_argument("--lambdas", type=_lambdas, default=None,
                           help="fixed lambdas, e.g. lasso_admm=0.002,mcps2_admm=0.01")
            x.add_argument("--pilot-trials", type=int, default=20)
            x.add_argument("--rho", type=float, default=None)
            x.add_argument("--max-iters", type=int, default=10_000)
            x.add_argument("--tau", type=float, default=None)
    e.set_defaults(func=_cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
