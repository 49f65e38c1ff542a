"""Wall time with and without golden-cut skipping, for each alpha.

    python3 scripts/runtime_table.py --trials 1000 --shots 10000 --out results/bench
"""
import argparse
import csv
from pathlib import Path

from goldencut.harness import bench_runtime, golden_circuit, nongolden_circuit


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--shots", type=int, default=10_000)
    parser.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.01, 0.001])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/bench")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for kind, make in (("golden", golden_circuit), ("nongolden", nongolden_circuit)):
        text = make(0.5, downstream_seed=args.seed)
        for alpha in args.alphas:
            on, off = bench_runtime(text, alpha, args.shots, args.trials, seed=args.seed)
            saving = 1 - on.mean_s / off.mean_s
            rows.append([kind, alpha, on.mean_s, on.stderr_s, off.mean_s, off.stderr_s, saving,
                         on.mean_downstream_executed])
            print(f"{kind:>9} alpha={alpha:<6g} with {on.mean_s * 1e3:7.3f}±{on.stderr_s * 1e3:.3f} ms  "
                  f"without {off.mean_s * 1e3:7.3f}±{off.stderr_s * 1e3:.3f} ms  saving {saving:6.1%}")
    with open(out / "runtime_table.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["circuit_kind", "alpha", "time_opt_mean_s", "time_opt_stderr_s",
                         "time_noopt_mean_s", "time_noopt_stderr_s", "relative_saving", "downstream_executed_mean"])
        writer.writerows(rows)


if __name__ == "__main__":
    main()
