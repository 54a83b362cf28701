"""Command-line front end.

Every subcommand only parses arguments, calls the library and prints or
writes the result. Exit codes: 0 success, 1 failed validation, 2 usage or
input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .evolving import SplitConfig, err_lambda, splitting_scheduler
from .experiments import (
    BenchConfig,
    WalkParams,
    bucket_days,
    gen_random_walk,
    lower_bound_fixture,
    make_predictor,
    periodic_days,
    periodic_events,
    read_events,
    run_benchmark,
)
from .general import choose_quantum, las_general
from .las import LASConfig, las, las_trust
from .model import GeneralInstance, UniformInstance, err, validate_schedule
from .noise import NRAConfig, err_eta, noise_robust_wrap
from .offline import opt_energy, yds_optimal
from .online import avr, bkp, oa

log = logging.getLogger("voltsched")


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--alpha", type=float, default=3.0, help="energy exponent (> 1)")
    p.add_argument("--epsilon", type=float, default=None, help="LAS robustness slack (> 0)")
    p.add_argument("--eta", type=float, default=None, help="shift tolerance, 0 < eta < 1/2")
    p.add_argument("--zeta", type=float, default=None, help="capacity slack of the noise wrapper")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="discount for evolving predictions")
    p.add_argument("--k", type=int, default=8, help="block multiplier of the splitting scheduler")
    p.add_argument("--delta", type=float, default=None, help="slack for general deadlines")
    p.add_argument("--Delta", type=float, default=None, metavar="QUANTUM", help="time quantum for general deadlines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="voltsched", description="Speed scaling with predicted workloads.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate instances")
    p.add_argument("--kind", choices=("walk", "periodic", "events"), default="walk")
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--M", type=int, default=80)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--T", type=int, default=220)
    p.add_argument("--D", type=int, default=20)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--seeds", type=str, default=None, help="comma list or a:b range")
    p.add_argument("--predictor", choices=("accurate", "random", "misleading"), default=None)
    p.add_argument("--pred-out", type=Path, default=None)

    p = sub.add_parser("opt", parents=[common], help="optimal energy of an instance")
    p.add_argument("instance", type=Path)
    p.add_argument("--schedule", action="store_true", help="also write the optimal schedule to --out")

    p = sub.add_parser("run", parents=[common], help="run one algorithm on one instance")
    p.add_argument("instance", type=Path)
    p.add_argument(
        "--algo",
        choices=("avr", "oa", "bkp", "yds", "las", "las_trust", "nra_las", "split", "general"),
        default="las",
    )
    p.add_argument("--pred", type=Path, default=None, help="prediction file (array, evolving map or instance)")

    p = sub.add_parser("bench", parents=[common], help="run a benchmark config")
    p.add_argument("config", type=Path)
    p.add_argument("--seeds", type=str, default=None)
    p.add_argument("--format", choices=("csv", "json", "svg", "png"), default="csv")
    p.add_argument("--plot", type=Path, default=None, help="also write a ratio chart (.svg or .png)")

    p = sub.add_parser("ingest", parents=[common], help="event log to daily instances")
    p.add_argument("events", type=Path)
    p.add_argument("--bucket-seconds", type=int, default=600)
    p.add_argument("--day-seconds", type=int, default=86_400)
    p.add_argument("--D", type=int, default=20)
    p.add_argument("--column", type=int, default=None)

    p = sub.add_parser("validate", parents=[common], help="check a schedule against an instance")
    p.add_argument("instance", type=Path)
    p.add_argument("schedule", type=Path)

    p = sub.add_parser("fixtures", parents=[common], help="lower-bound instances")
    p.add_argument("--kind", choices=("online", "avr", "tradeoff", "norm"), default="online")
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--eps", type=float, default=0.1)
    return parser


def _check_ranges(args) -> None:
    if args.alpha <= 1:
        raise UsageError("--alpha must exceed 1")
    if args.epsilon is not None and args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")
    if args.eta is not None and not 0 < args.eta < 0.5:
        raise UsageError("--eta must lie in (0, 1/2)")
    if args.zeta is not None and args.zeta < 0:
        raise UsageError("--zeta must be non-negative")
    if args.lam is not None and not 0 < args.lam < 1:
        raise UsageError("--lambda must lie in (0, 1)")
    if args.k < 1:
        raise UsageError("--k must be positive")
    if args.delta is not None and not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    if args.Delta is not None and args.Delta <= 0:
        raise UsageError("--Delta must be positive")


def _seeds(text: str | None, default: list[int]) -> list[int]:
    if text is None:
        return default
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",") if s.strip()]


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        args.out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# subcommands ------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "events":
        times = periodic_events(args.days, args.seed)
        _emit(args, "\n".join(str(int(t)) for t in times))
        return 0
    if args.kind == "periodic":
        days = periodic_days(args.days, args.seed, duration=args.D)
        text = json.dumps({"instances": [io.instance_to_dict(d) for d in days]}, indent=1)
        _emit(args, text)
        return 0
    seeds = _seeds(args.seeds, [args.seed])
    insts, preds = [], []
    for seed in seeds:
        params = WalkParams(args.m, args.M, args.s, args.T, args.D, seed)
        inst = gen_random_walk(params)
        insts.append(inst)
        if args.predictor:
            preds.append(make_predictor(args.predictor, inst.workloads, params).tolist())
    data = io.instance_to_dict(insts[0]) if len(insts) == 1 else {"instances": [io.instance_to_dict(i) for i in insts]}
    _emit(args, json.dumps(data, indent=1))
    if args.predictor:
        target = args.pred_out
        if target is None:
            raise UsageError("--predictor needs --pred-out")
        target.write_text(json.dumps(preds[0] if len(preds) == 1 else preds) + "\n", encoding="utf-8")
    return 0


def cmd_opt(args) -> int:
    inst = io.load_instance(args.instance)
    print(f"{opt_energy(inst, args.alpha):.12g}")
    if args.schedule:
        if args.out is None:
            raise UsageError("--schedule needs --out")
        io.save_schedule(args.out, yds_optimal(inst))
    return 0


def _uniform(inst, algo: str) -> UniformInstance:
    if not isinstance(inst, UniformInstance):
        raise UsageError(f"--algo {algo} needs a uniform-deadline instance")
    return inst


def cmd_run(args) -> int:
    inst = io.load_instance(args.instance)
    algo = args.algo
    alpha = args.alpha
    report: dict = {"algorithm": algo, "alpha": alpha}
    needs_pred = algo in ("las", "las_trust", "nra_las", "split", "general")
    if needs_pred and args.pred is None:
        raise UsageError(f"--algo {algo} needs --pred")
    eps = args.epsilon if args.epsilon is not None else 0.2
    if algo == "avr":
        sched = avr(inst)
    elif algo == "oa":
        sched = oa(inst)
    elif algo == "bkp":
        sched = bkp(inst)
    elif algo == "yds":
        sched = yds_optimal(inst)
    elif algo == "split":
        u = _uniform(inst, algo)
        pred = io.load_evolving(args.pred)
        sched = splitting_scheduler(pred, u, SplitConfig(args.k, eps, alpha, seed=args.seed))
        if args.lam is not None:
            report["err_lambda"] = err_lambda(pred, u.workloads, args.lam, alpha)
    elif algo == "general":
        real = inst if isinstance(inst, GeneralInstance) else inst.to_general()
        pred_inst = io.load_instance(args.pred)
        pred_inst = pred_inst if isinstance(pred_inst, GeneralInstance) else pred_inst.to_general()
        delta = args.delta if args.delta is not None else 0.1
        Delta = args.Delta if args.Delta is not None else choose_quantum(real, delta)
        sched = las_general(pred_inst, real, delta, Delta)
        report.update(delta=delta, Delta=Delta)
    else:
        u = _uniform(inst, algo)
        pred = io.load_prediction(args.pred)
        if algo == "las_trust":
            sched = las_trust(pred, u)
        else:
            cfg = LASConfig.from_epsilon(eps, alpha)
            report["epsilon"] = eps
            if algo == "las":
                sched = las(pred, u, cfg)
            else:
                nra = NRAConfig(args.eta if args.eta is not None else 0.05, args.zeta if args.zeta is not None else 0.1)
                sched = noise_robust_wrap(lambda p, i: las(p, i, cfg), pred, nra, u)
                report["err_eta"] = err_eta(u.workloads, pred, nra.eta, u.duration, alpha)
        report["err"] = err(u.workloads, pred, alpha).value
    result = validate_schedule(sched, inst, args.tol)
    energy = sched.energy(alpha)
    opt = opt_energy(inst, alpha)
    report.update(energy=energy, opt_energy=opt, ratio=energy / opt if opt > 0 else None, feasible=result.ok)
    if args.out is not None:
        io.save_schedule(args.out, sched, meta=report)
    print(json.dumps(report))
    if not result.ok:
        print(result.describe(), file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    data = json.loads(args.config.read_text(encoding="utf-8"))
    if args.seeds is not None:
        data["seeds"] = _seeds(args.seeds, [])
    config = BenchConfig.from_dict(data)
    report = run_benchmark(config)
    if args.format == "json":
        _emit(args, json.dumps(report.aggregate(), indent=1))
    elif args.format in ("svg", "png"):
        from .plotting import plot_ratios

        if args.out is None:
            raise UsageError(f"--format {args.format} needs --out")
        plot_ratios(report, args.out)
    else:
        _emit(args, report.to_csv())
    if args.plot is not None:
        from .plotting import plot_ratios

        plot_ratios(report, args.plot)
    for g in report.aggregate():
        eps = "" if g["epsilon"] is None else f" eps={g['epsilon']:g}"
        print(
            f"{g['algorithm']}{eps} alpha={g['alpha']:g}: mean {g['mean']:.4f} max {g['max']:.4f}"
            f" ({g['runs']} runs, {g['failures']} failed)",
            file=sys.stderr,
        )
    return 1 if any(r.failed for r in report.rows) else 0


def cmd_ingest(args) -> int:
    times, skipped = read_events(args.events, args.column)
    days = bucket_days(times, args.bucket_seconds, args.day_seconds, args.D)
    print(f"{times.size} events, {skipped} skipped, {len(days)} day(s)", file=sys.stderr)
    _emit(args, json.dumps({"instances": [io.instance_to_dict(d) for d in days]}, indent=1))
    return 0


def cmd_validate(args) -> int:
    inst = io.load_instance(args.instance)
    sched = io.load_schedule(args.schedule)
    result = validate_schedule(sched, inst, args.tol)
    print(result.describe())
    return 0 if result.ok else 1


def cmd_fixtures(args) -> int:
    D = args.D if args.D is not None else (100.0 if args.kind == "tradeoff" else 1.0)
    fx = lower_bound_fixture(args.kind, args.alpha, D, args.eps)
    out = {
        "kind": fx.kind,
        "alpha": fx.alpha,
        "instances": {k: io.instance_to_dict(v) for k, v in fx.instances.items()},
        "expected_opt": fx.expected_opt,
        "extra": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in fx.extra.items()},
    }
    _emit(args, json.dumps(out, indent=1))
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "opt": cmd_opt,
    "run": cmd_run,
    "bench": cmd_bench,
    "ingest": cmd_ingest,
    "validate": cmd_validate,
    "fixtures": cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _check_ranges(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"voltsched: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"voltsched: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
