"""Experiment harness: circuit generators, sweeps, runtime benchmarks and CSV output.

Per-trial randomness comes from ``trial_seed``, a ``SeedSequence`` keyed by
(master seed, shots, alpha, trial, circuit kind), so trials never share
streams and can run in any order.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import mean, median
from typing import Sequence

import numpy as np

from .circuit import Circuit, CutSpec, bipartition, parse_circuit, serialize_circuit
from .cutting import clamp_normalize
from .detector import detect
from .sim import Gate, exact_probabilities, run_circuit

log = logging.getLogger(__name__)

CIRCUIT_KINDS = ("golden", "nongolden")
KIND_CODES = {"golden": 0, "nongolden": 1}

TRIALS_HEADER = [
    "shots", "alpha", "trial", "circuit_kind", "basis", "tau_hat", "std_err",
    "rejected", "l2_error", "time_opt_s", "time_noopt_s",
]
AGGREGATE_HEADER = [
    "shots", "alpha", "circuit_kind", "golden_rate", "reject_rate",
    "l2_median", "l2_mean", "time_opt_mean_s", "time_noopt_mean_s",
]


def random_downstream(rng: np.random.Generator, qubits: Sequence[int] = (1, 2), layers: int = 4) -> list[Gate]:
    """Seeded random layers: one of rx/ry/rz/h/s on a random qubit, then cx with probability 1/2."""
    gates = []
    for _ in range(layers):
        kind = ("rx", "ry", "rz", "h", "s")[rng.integers(5)]
        q = int(qubits[rng.integers(len(qubits))])
        angle = float(rng.uniform(0.0, 2 * math.pi)) if kind in ("rx", "ry", "rz") else None
        gates.append(Gate(kind, (q,), angle))
        if rng.random() < 0.5:
            control, target = (qubits[0], qubits[1]) if rng.random() < 0.5 else (qubits[1], qubits[0])
            gates.append(Gate("cx", (int(control), int(target))))
    return gates


def _cut_circuit_text(upstream: list[Gate], downstream_seed) -> str:
    rng = np.random.default_rng(downstream_seed)
    gates = upstream + random_downstream(rng)
    return serialize_circuit(Circuit(3, tuple(gates)), CutSpec((1,), len(upstream)))


def golden_circuit(theta: float = 0.5, downstream_seed=None) -> str:
    """Three qubits cut on qubit 1; the cut qubit has no X Bloch component."""
    upstream = [Gate("rx", (0,), theta), Gate("rx", (1,), theta), Gate("ry", (0,), theta)]
    return _cut_circuit_text(upstream, downstream_seed)


def nongolden_circuit(theta: float = 0.5, downstream_seed=None) -> str:
    """As :func:`golden_circuit` plus ``ry(theta)`` on the cut qubit before the cut."""
    upstream = [
        Gate("rx", (0,), theta), Gate("rx", (1,), theta), Gate("ry", (0,), theta), Gate("ry", (1,), theta),
    ]
    return _cut_circuit_text(upstream, downstream_seed)


GENERATORS = {"golden": golden_circuit, "nongolden": nongolden_circuit}


def l2_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distribution sizes differ: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


def reference_distribution(circuit_text: str) -> np.ndarray:
    """Exact output distribution of the uncut circuit (the cut marker is ignored)."""
    circuit, _ = parse_circuit(circuit_text)
    return exact_probabilities(run_circuit(circuit))


def _alpha_bits(alpha: float) -> int:
    return int.from_bytes(struct.pack("<d", float(alpha)), "little")


def trial_seed(master_seed: int, shots: int, alpha: float, trial: int, kind: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(shots), _alpha_bits(alpha), int(trial), KIND_CODES[kind]])


@dataclass
class SweepConfig:
    shots_grid: list[int] = field(default_factory=lambda: [2**7, 2**9, 2**11, 2**13])
    alpha_grid: list[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    trials: int = 100
    master_seed: int = 0
    mode: str = "distribution"
    circuit_kinds: list[str] = field(default_factory=lambda: list(CIRCUIT_KINDS))
    theta: float = 0.5
    # None draws a fresh random downstream per trial; an int pins one circuit
    downstream_seed: int | None = None
    probe_basis: str = "X"
    normalize: bool = False
    two_sided: bool = True
    timing: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.shots_grid or not self.alpha_grid:
            raise ValueError("shots_grid and alpha_grid must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode != "distribution":
            raise ValueError("sweeps compare bitstring distributions; mode must be 'distribution'")
        unknown = set(self.circuit_kinds) - set(CIRCUIT_KINDS)
        if unknown:
            raise ValueError(f"unknown circuit kinds {sorted(unknown)}")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "SweepConfig":
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass
class TrialRecord:
    shots: int
    alpha: float
    trial: int
    circuit_kind: str
    bases: tuple[str, ...]
    tau_hat: tuple[float, ...]
    std_err: tuple[float, ...]
    rejected: tuple[bool, ...]
    l2_error: float
    l2_error_noopt: float
    time_opt_s: float = math.nan
    time_noopt_s: float = math.nan

    def decision(self, basis: str) -> bool:
        return self.rejected[self.bases.index(basis)]

    def tau(self, basis: str) -> tuple[float, float]:
        i = self.bases.index(basis)
        return self.tau_hat[i], self.std_err[i]


def run_trial(config: SweepConfig, shots: int, alpha: float, trial: int, kind: str) -> TrialRecord:
    ss = trial_seed(config.master_seed, shots, alpha, trial, kind)
    circuit_ss, detect_ss = ss.spawn(2)
    down_seed = config.downstream_seed
    if down_seed is None:
        down_seed = int(circuit_ss.generate_state(1)[0])
    text = GENERATORS[kind](config.theta, down_seed)
    circuit, cut = parse_circuit(text)
    fragments = bipartition(circuit, cut)
    reference = exact_probabilities(run_circuit(circuit))

    common = dict(alpha=alpha, shots=shots, seed=detect_ss, two_sided=config.two_sided, normalize=config.normalize)
    on = detect(fragments, **common)
    off = detect(fragments, optimize=False, **common)

    def error(report):
        dist = report.normalized if config.normalize else report.result
        return l2_distance(dist, reference)

    return TrialRecord(
        shots=shots,
        alpha=alpha,
        trial=trial,
        circuit_kind=kind,
        bases=tuple("".join(o.basis) for o in on.outcomes),
        tau_hat=tuple(o.estimate.tau_hat for o in on.outcomes),
        std_err=tuple(o.estimate.std_err for o in on.outcomes),
        rejected=tuple(bool(o.rejected) for o in on.outcomes),
        l2_error=error(on),
        l2_error_noopt=error(off),
        time_opt_s=on.wall_time if config.timing else math.nan,
        time_noopt_s=off.wall_time if config.timing else math.nan,
    )


def sweep_tasks(config: SweepConfig) -> list[tuple[int, float, int, str]]:
    return [
        (shots, alpha, trial, kind)
        for shots in config.shots_grid
        for alpha in config.alpha_grid
        for trial in range(config.trials)
        for kind in config.circuit_kinds
    ]


def _run_task(args):
    config, task = args
    return run_trial(config, *task)


def aggregate(records: Sequence[TrialRecord], probe_basis: str = "X") -> list[dict]:
    cells: dict = {}
    for r in records:
        cells.setdefault((r.shots, r.alpha, r.circuit_kind), []).append(r)
    rows = []
    for (shots, alpha, kind), group in sorted(cells.items(), key=lambda kv: (kv[0][0], -kv[0][1], kv[0][2])):
        rejected = [int(r.decision(probe_basis)) for r in group]
        l2 = [r.l2_error for r in group]
        rows.append({
            "shots": shots,
            "alpha": alpha,
            "circuit_kind": kind,
            "golden_rate": float(mean([1 - x for x in rejected])),
            "reject_rate": float(mean(rejected)),
            "l2_median": median(l2),
            "l2_mean": mean(l2),
            "time_opt_mean_s": mean(r.time_opt_s for r in group),
            "time_noopt_mean_s": mean(r.time_noopt_s for r in group),
        })
    return rows


def run_sweep(config: SweepConfig) -> tuple[list[TrialRecord], list[dict]]:
    tasks = sweep_tasks(config)
    log.info("sweep: %d trials", len(tasks))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_task, [(config, t) for t in tasks], chunksize=32))
    else:
        records = [run_trial(config, *t) for t in tasks]
    records.sort(key=lambda r: (r.shots, -r.alpha, r.trial, KIND_CODES[r.circuit_kind]))
    return records, aggregate(records, config.probe_basis)


@dataclass
class BenchRow:
    path: str
    trials: int
    mean_s: float
    stderr_s: float
    mean_downstream_executed: float


def bench_runtime(
    circuit_text: str,
    alpha: float,
    shots: int,
    trials: int,
    seed: int = 0,
    two_sided: bool = True,
) -> list[BenchRow]:
    """Wall time of the optimized and unoptimized paths, interleaved trial by trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    circuit, cut = parse_circuit(circuit_text)
    if cut is None:
        raise ValueError("benchmark circuit needs a cut")
    fragments = bipartition(circuit, cut)
    times = {"optimized": [], "unoptimized": []}
    executed = {"optimized": [], "unoptimized": []}
    for t in range(trials):
        ss = np.random.SeedSequence([int(seed), t])
        for path, optimize in (("optimized", True), ("unoptimized", False)):
            report = detect(fragments, alpha=alpha, shots=shots, seed=ss, optimize=optimize, two_sided=two_sided)
            times[path].append(report.wall_time)
            executed[path].append(report.downstream_runs_executed)
    rows = []
    for path in ("optimized", "unoptimized"):
        x = np.array(times[path])
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        rows.append(BenchRow(path, trials, float(x.mean()), se, float(np.mean(executed[path]))))
    return rows


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trial_rows(records: Sequence[TrialRecord]):
    for r in records:
        for basis, tau, se, rej in zip(r.bases, r.tau_hat, r.std_err, r.rejected):
            yield [r.shots, r.alpha, r.trial, r.circuit_kind, basis, tau, se, rej,
                   r.l2_error, r.time_opt_s, r.time_noopt_s]


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror}") from err


def emit_outputs(
    records: Sequence[TrialRecord],
    aggregates: Sequence[dict],
    out_dir: str | os.PathLike,
    *,
    plots: bool = False,
    metadata: dict | None = None,
) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {out}: {err.strerror}") from err
    written = [out / "trials.csv", out / "aggregate.csv"]
    _write_csv(written[0], TRIALS_HEADER, trial_rows(records))
    _write_csv(written[1], AGGREGATE_HEADER, ([row[h] for h in AGGREGATE_HEADER] for row in aggregates))
    if metadata is not None:
        meta_path = out / "metadata.json"
        meta_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
        written.append(meta_path)
    if plots:
        written += plot_aggregates(aggregates, out)
    return written


def write_bench(rows: Sequence[BenchRow], out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bench.csv"
    header = list(asdict(rows[0]).keys()) if rows else [f for f in BenchRow.__dataclass_fields__]
    _write_csv(path, header, ([getattr(r, h) for h in header] for r in rows))
    return path


def plot_aggregates(aggregates: Sequence[dict], out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "goldencut"
    paths = []
    panels = [("golden_rate", "golden", "golden classified as golden"),
              ("reject_rate", "nongolden", "non-golden classified as non-golden"),
              ("l2_median", "golden", "median l2 error (golden)"),
              ("l2_median", "nongolden", "median l2 error (non-golden)")]
    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for ax, (column, kind, title) in zip(axes.ravel(), panels):
        alphas = sorted({row["alpha"] for row in aggregates}, reverse=True)
        for alpha in alphas:
            rows = sorted((r for r in aggregates if r["alpha"] == alpha and r["circuit_kind"] == kind),
                          key=lambda r: r["shots"])
            if rows:
                ax.plot([r["shots"] for r in rows], [r[column] for r in rows], marker="o", label=f"alpha={alpha:g}")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("shots")
        ax.set_title(title)
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = out_dir / "sweep.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    paths.append(path)
    return paths


def sweep_metadata(config: SweepConfig) -> dict:
    return {
        "config": asdict(config),
        "reference": "exact statevector probabilities of the uncut circuit",
        "timing": "time.perf_counter around fragment simulation, sampling, testing and reconstruction; "
                  "no warm-up discarded",
        "rates": "golden_rate / reject_rate are over the probe basis decision of the optimized run",
        "l2": "normalized (clamped) reconstruction" if config.normalize else "raw signed reconstruction",
    }
