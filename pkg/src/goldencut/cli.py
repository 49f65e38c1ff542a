"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit import CircuitParseError, CutStructureError
from .cutting import IncompleteFragmentData, Observable
from .detector import UsageError, detect_and_reconstruct, savings_summary
from .harness import (
    SweepConfig,
    bench_runtime,
    emit_outputs,
    run_sweep,
    sweep_metadata,
    write_bench,
)
from .stats import plan_shots

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


def _parse_obs(text: str):
    if "|" in text:
        left, right = text.split("|", 1)
        return Observable.parse(left), Observable.parse(right)
    return Observable.parse(text)


def _report_dict(report, normalize: bool) -> dict:
    out = {
        "mode": report.mode,
        "k": report.k,
        "alpha": report.alpha,
        "shots": report.shots,
        "optimized": report.optimized,
        "bases": [
            {
                "basis": "".join(o.basis),
                "tau_hat": o.estimate.tau_hat,
                "std_err": o.estimate.std_err,
                "rejected": o.rejected,
            }
            for o in report.outcomes
        ],
        **savings_summary(report),
    }
    if report.mode == "expectation":
        out["expectation"] = float(report.result)
    else:
        n = int(np.log2(report.result.size))
        # bitstrings printed most-significant qubit first
        out["distribution"] = {format(i, f"0{n}b"): float(p) for i, p in enumerate(report.result)}
        if normalize and report.normalized is not None:
            out["distribution_normalized"] = {
                format(i, f"0{n}b"): float(p) for i, p in enumerate(report.normalized)
            }
    return out


def _print_report(d: dict) -> None:
    print(f"mode: {d['mode']}  K={d['k']}  alpha={d['alpha']:g}  shots={d['shots']}  optimized={d['optimized']}")
    for b in d["bases"]:
        verdict = "run downstream" if b["rejected"] else "golden, skipped"
        print(f"  basis {b['basis']:<4} tau_hat={b['tau_hat']:+.6f}  std_err={b['std_err']:.6f}  {verdict}")
    print(
        f"downstream variants: {d['downstream_executed']} executed, {d['downstream_skipped']} skipped "
        f"(skip fraction {d['skip_fraction']:.3f})"
    )
    print(f"wall time: {d['wall_time_s']:.6f} s")
    if "expectation" in d:
        print(f"expectation: {d['expectation']:.10g}")
    else:
        key = "distribution_normalized" if "distribution_normalized" in d else "distribution"
        print(f"{key} (qubit N-1 ... qubit 0):")
        for bits, p in d[key].items():
            print(f"  {bits}  {p:+.6f}")


def cmd_run(args) -> int:
    text = Path(args.circuit).read_text()
    observable = None if args.distribution else _parse_obs(args.obs)
    report = detect_and_reconstruct(
        text,
        observable,
        alpha=args.alpha,
        shots=args.shots,
        seed=args.seed,
        optimize=not args.no_golden_opt,
        merge_iz=args.merge_iz,
        two_sided=not args.one_sided,
        normalize=args.normalize,
    )
    d = _report_dict(report, args.normalize)
    if args.json:
        print(json.dumps(d, indent=2))
    else:
        _print_report(d)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = SweepConfig.from_file(args.config)
    records, aggregates = run_sweep(config)
    paths = emit_outputs(records, aggregates, args.out, plots=args.plots, metadata=sweep_metadata(config))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_bench(args) -> int:
    text = Path(args.circuit).read_text()
    rows = bench_runtime(text, args.alpha, args.shots, args.trials, args.seed)
    path = write_bench(rows, args.out)
    for r in rows:
        print(f"{r.path:<12} {r.mean_s:.6f} +- {r.stderr_s:.6f} s  ({r.mean_downstream_executed:.2f} downstream variants)")
    opt, noopt = rows
    print(f"relative saving: {1 - opt.mean_s / noopt.mean_s:.1%}")
    print(path)
    return EXIT_OK


def cmd_plan(args) -> int:
    if args.b is None and args.upstream_qubits is None:
        raise UsageError("give --b or --upstream-qubits")
    plan = plan_shots(args.epsilon, args.delta, b=args.b, n_upstream_qubits=args.upstream_qubits)
    print(plan.required_shots)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goldencut", description="circuit cutting with golden-cut detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="detect golden bases and reconstruct")
    run.add_argument("circuit")
    target = run.add_mutually_exclusive_group(required=True)
    target.add_argument("--obs", help='Pauli observable "O_f1|O_f2" or a full-width string')
    target.add_argument("--distribution", action="store_true")
    run.add_argument("--alpha", type=float, required=True)
    run.add_argument("--shots", type=int, required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--no-golden-opt", action="store_true")
    run.add_argument("--merge-iz", action="store_true")
    run.add_argument("--normalize", action="store_true")
    run.add_argument("--one-sided", action="store_true", help="compare |tau| to Phi^-1(1-alpha) verbatim")
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="parameter sweep over shots and alpha")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--plots", action="store_true")
    sweep.set_defaults(func=cmd_sweep)

    bench = sub.add_parser("bench", help="wall time with and without the optimization")
    bench.add_argument("circuit")
    bench.add_argument("--alpha", type=float, required=True)
    bench.add_argument("--shots", type=int, required=True)
    bench.add_argument("--trials", type=int, required=True)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_bench)

    plan = sub.add_parser("plan", help="shots needed for an epsilon/delta guarantee")
    plan.add_argument("--epsilon", type=float, required=True)
    plan.add_argument("--delta", type=float, required=True)
    group = plan.add_mutually_exclusive_group()
    group.add_argument("--upstream-qubits", type=int)
    group.add_argument("--b", type=float)
    plan.set_defaults(func=cmd_plan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CircuitParseError, CutStructureError, UsageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, IncompleteFragmentData, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, TypeError) as err:
        # bad option values (alpha, shots, epsilon, config fields)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
