"""Classification rates and reconstruction error versus shots, per alpha.

    python3 scripts/sweep.py --config configs/smoke_sweep.json --out results/sweep --plots
"""
import argparse
import logging
import time

from goldencut.harness import SweepConfig, emit_outputs, run_sweep, sweep_metadata


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", default="configs/smoke_sweep.json")
    parser.add_argument("--out", default="results/sweep")
    parser.add_argument("--trials", type=int, help="override the trial count from the config")
    parser.add_argument("--workers", type=int, help="process pool size")
    parser.add_argument("--plots", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    config = SweepConfig.from_file(args.config)
    if args.trials is not None:
        config.trials = args.trials
    if args.workers is not None:
        config.workers = args.workers

    start = time.perf_counter()
    records, aggregates = run_sweep(config)
    emit_outputs(records, aggregates, args.out, plots=args.plots, metadata=sweep_metadata(config))

    print(f"{'shots':>6} {'alpha':>6} {'kind':>10} {'golden':>7} {'reject':>7} {'l2 med':>8}")
    for row in aggregates:
        print(f"{row['shots']:>6} {row['alpha']:>6g} {row['circuit_kind']:>10} "
              f"{row['golden_rate']:>7.3f} {row['reject_rate']:>7.3f} {row['l2_median']:>8.4f}")
    print(f"{len(records)} trials in {time.perf_counter() - start:.1f} s -> {args.out}")


if __name__ == "__main__":
    main()
