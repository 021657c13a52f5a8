"""Command-line harness.

Subcommands: simulate (write an instance file), recover (run one method on
an instance), experiment (full grid from a JSON config), bound (error-bound
constants), denoise-demo (closed-form denoisers with Monte-Carlo checks).
"""

import argparse
import math
import sys

import numpy as np

from . import harness, theory
from .compression import PiecewiseConstantCode
from .likelihood import ObjectiveContext, denoise_constant_ml, denoise_ml, nll_limit
from .measurement import load_instance, make_instance, save_instance, stream
from .solvers import MultilevelConfig, PgdConfig, multilevel, pgd, pgd_multi_init, pgd_then_multilevel


def _add_code_args(parser):
    parser.add_argument("--jumps", type=int, default=2, help="max jumps J of the code")
    parser.add_argument("--bits", type=int, default=8, help="quantizer bits b")
    parser.add_argument("--x-min", type=float, default=0.5)
    parser.add_argument("--x-max", type=float, default=2.0)


def cmd_simulate(args):
    code = PiecewiseConstantCode(n=args.n, max_jumps=args.jumps, bits=args.bits, bounds=(args.x_min, args.x_max))
    signal = harness.preset_signal(args.n, args.pieces, code)
    instance = make_instance(signal, args.m, args.sigma_w, args.sigma_z, args.seed)
    save_instance(instance, args.out, signal=signal)
    print(f"wrote instance m={instance.m} n={instance.n} seed={instance.seed} -> {args.out}")
    return 0


def cmd_recover(args):
    instance, signal = load_instance(args.instance)
    if signal is not None:
        bounds = signal.bounds
    else:
        bounds = (args.x_min, args.x_max)
    code = PiecewiseConstantCode(
        n=instance.n, max_jumps=args.jumps, bits=args.bits, bounds=bounds
    )
    ctx = ObjectiveContext.from_instance(instance)
    pgd_cfg = PgdConfig(projection=args.projection)
    pieces = args.pieces if args.pieces else args.jumps + 1
    ml_cfg = MultilevelConfig(pieces=pieces, bounds=code.signal_bounds, seed=args.seed)
    if args.method == "pgd":
        report = pgd(ctx, code, pgd_cfg)
    elif args.method == "pgd+init":
        report = pgd_multi_init(ctx, code, pgd_cfg)
    elif args.method == "multilevel":
        report = multilevel(ctx, ml_cfg)
    else:
        report = pgd_then_multilevel(ctx, code, pgd_cfg, ml_cfg)
    for line in report.to_lines():
        print(line)
    if signal is not None:
        print("psnr_db %.6f" % harness.psnr(signal, report.estimate.values))
        print("nll_truth %r" % nll_limit(signal.values, ctx))
    return 0


def cmd_experiment(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed

    def progress(row):
        if not args.quiet:
            print(
                f"{row.method:<15} m={row.m:<4} trial={row.trial:<3} "
                f"psnr={row.psnr_db:7.2f} dB  evals={row.evals:<6} time={row.time_s:.2f}s"
            )

    rows, summary = harness.run_experiment(cfg, progress=progress)
    paths = harness.emit_outputs(rows, summary, cfg.out_dir, render=not args.no_figures)
    for s in summary:
        print(
            f"{s.method:<15} m={s.m:<4} psnr={s.psnr_mean_db:7.2f} +- {s.psnr_ci90_db:.2f} dB "
            f"nll_est={s.nll_estimate_mean:11.2f} nll_truth={s.nll_truth_mean:11.2f}"
        )
    for path in paths:
        print("wrote", path)
    return 0


def cmd_bound(args):
    inputs = theory.BoundInputs(
        m=args.m,
        n=args.n,
        x_min=args.x_min,
        x_max=args.x_max,
        rate=args.rate,
        distortion=args.distortion,
        epsilon=args.epsilon,
    )
    out = theory.recovery_bound(inputs)
    sparse = theory.sparse_recovery_bound(args.k, args.n, args.m, args.epsilon, args.x_min, args.x_max)
    records = [
        ("gamma", out.gamma),
        ("alpha", out.alpha),
        ("rho1", out.rho1),
        ("rho2", out.rho2),
        ("mse_bound", out.mse_bound),
        ("failure_probability_bound", out.failure_probability_bound),
        ("success_probability_raw", out.success_probability_raw),
        ("success_probability", out.success_probability),
        (f"sparse_mse_bound_k{args.k}", sparse.mse_bound),
        (f"sparse_success_probability_raw_k{args.k}", sparse.success_probability_raw),
    ]
    width = max(len(name) for name, _ in records)
    for name, value in records:
        print(f"{name:<{width}}  {value:.6e}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("quantity,value\n")
            for name, value in records:
                fh.write(f"{name},{value!r}\n")
        print("wrote", args.csv)
    return 0


def cmd_denoise_demo(args):
    rng = stream(args.seed)
    n, trials = args.n, args.trials

    x = rng.uniform(0.5, 2.0, size=n)
    ratios = []
    for _ in range(trials):
        w = rng.standard_normal(n)
        estimate = denoise_ml(x * w)
        ratios.append(float(np.sum((estimate - x) ** 2) / np.sum(x * x)))
    law = 2.0 * (1.0 - math.sqrt(2.0 / math.pi))
    print(f"unstructured |y| denoiser: mean MSE/||x||^2 = {np.mean(ratios):.5f}  (law {law:.5f})")

    a = 1.0
    scaled = []
    for _ in range(trials):
        w = rng.standard_normal(n)
        alpha_hat = denoise_constant_ml(a * w)
        scaled.append(n * (alpha_hat - a) ** 2)
    print(f"constant-signal denoiser:  mean n*(alpha-a)^2 = {np.mean(scaled):.5f}  (law {a * a / 2:.5f})")

    for size in (10, 100, 1000):
        w = rng.standard_normal((20000, size))
        mc = float(np.mean(np.sqrt(np.mean(w * w, axis=1))))
        print(f"E[(W/n)^(1/2)] at n={size:<5} = {mc:.6f}  (asymptote {1 - 1 / (4 * size):.6f})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="specklecs",
        description="Recovery of piecewise-constant signals from undersampled speckled measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample an instance and write it to a file")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--m", type=int, default=96)
    p.add_argument("--pieces", type=int, default=3)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--sigma-z", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_code_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="run one method on a stored instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=harness.METHODS, default="pgd")
    p.add_argument("--pieces", type=int, default=0, help="piece count for multilevel methods")
    p.add_argument("--seed", type=int, default=0)
    group = p.add_mutually_exclusive_group()
    group.add_argument(
        "--exact-projection", dest="projection", action="store_const", const="exact", default="exact"
    )
    group.add_argument("--approx-projection", dest="projection", action="store_const", const="approx")
    _add_code_args(p)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("experiment", help="run a full grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config's output directory")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bound", help="evaluate the recovery error bound")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x-min", type=float, default=0.5)
    p.add_argument("--x-max", type=float, default=2.0)
    p.add_argument("--rate", type=float, required=True, help="bits per sample")
    p.add_argument("--distortion", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--k", type=int, default=4, help="jump count for the sparse form")
    p.add_argument("--csv", default=None, help="also write the table as CSV")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("denoise-demo", help="closed-form denoisers with Monte-Carlo laws")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_denoise_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
