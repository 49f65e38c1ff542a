"""End-to-end acceptance checks at full scale (1000 trials per cell).

Each test records one PASS/FAIL line; the lines are printed in the terminal
summary. The shared sweep takes a few minutes on one core.
"""
import math

import numpy as np
import pytest

from goldencut.circuit import Circuit, CircuitParseError, bipartition, parse_circuit, serialize_circuit
from goldencut.cutting import (
    Observable,
    execute_fragments,
    frame_of,
    pauli_split,
    reconstruct_distribution,
    reconstruct_expectation,
)
from goldencut.detector import detect
from goldencut.harness import SweepConfig, bench_runtime, golden_circuit, run_sweep
from goldencut.sim import exact_expectation, exact_probabilities, run_circuit
from goldencut.stats import required_shots

from conftest import ACCEPTANCE_LINES, MALFORMED, random_cut_circuit, random_gates

pytestmark = pytest.mark.slow

TRIALS = 1000
SHOTS_GRID = [2**7, 2**9, 2**11, 2**13]
ALPHAS = [0.1, 0.01, 0.001]


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sweep():
    config = SweepConfig(shots_grid=SHOTS_GRID, alpha_grid=ALPHAS, trials=TRIALS, master_seed=2024, timing=False)
    return run_sweep(config)


def cell(records, shots, alpha, kind):
    return [r for r in records if r.shots == shots and r.alpha == alpha and r.circuit_kind == kind]


def test_criterion_1_exact_reconstruction():
    rng = np.random.default_rng(1)
    worst_dist = worst_exp = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 6))
        k = int(rng.integers(1, 3))
        circuit, cut = random_cut_circuit(rng, n, k)
        frags = bipartition(circuit, cut)
        state = run_circuit(circuit)

        ups, downs = execute_fragments(frags, None)
        q = reconstruct_distribution(ups, downs, frags)
        worst_dist = max(worst_dist, float(np.abs(q - exact_probabilities(state)).max()))

        pauli = "".join(rng.choice(list("IXYZ"), size=n))
        (coeff, s1, s2), = pauli_split(Observable.pauli(pauli), frags)
        ups, downs = execute_fragments(frags, None, upstream_frames=[frame_of(s1)], downstream_frames=[frame_of(s2)])
        got = reconstruct_expectation(ups, downs, Observable.pauli(s1), Observable.pauli(s2, coeff))
        worst_exp = max(worst_exp, abs(got - exact_expectation(state, Observable.pauli(pauli))))
    record(1, worst_dist <= 1e-10 and worst_exp <= 1e-10,
           f"max distribution error {worst_dist:.2e}, max expectation error {worst_exp:.2e} (tol 1e-10)")


@pytest.fixture(scope="module")
def calibration_reports():
    frags = bipartition(*parse_circuit(golden_circuit(0.5, downstream_seed=7)))
    return {
        alpha: [detect(frags, alpha=alpha, shots=10**4, seed=np.random.SeedSequence([77, t, int(alpha * 1000)]))
                for t in range(TRIALS)]
        for alpha in (0.1, 0.01)
    }


def test_criterion_2_type_one_calibration(calibration_reports):
    parts, ok = [], True
    for alpha, reports in calibration_reports.items():
        rate = np.mean([r.outcome_for("X").rejected for r in reports])
        band = 3 * math.sqrt(alpha * (1 - alpha) / TRIALS)
        ok &= abs(rate - alpha) <= band
        parts.append(f"alpha={alpha}: reject rate {rate:.3f} (band {alpha}±{band:.4f})")
    record(2, bool(ok), "; ".join(parts))


def test_criterion_3_power(sweep):
    records, _ = sweep
    rates = [np.mean([r.decision("X") for r in cell(records, s, 0.1, "nongolden")]) for s in SHOTS_GRID]
    monotone = all(b >= a - 0.02 for a, b in zip(rates, rates[1:]))
    record(3, rates[-1] >= 0.99 and monotone,
           "non-golden reject rates " + ", ".join(f"{s}:{r:.3f}" for s, r in zip(SHOTS_GRID, rates)))


def test_criterion_4_error_decay(sweep):
    records, _ = sweep
    ok, worst_final, parts = True, 0.0, []
    for kind in ("golden", "nongolden"):
        for alpha in ALPHAS:
            medians = [float(np.median([r.l2_error for r in cell(records, s, alpha, kind)])) for s in SHOTS_GRID]
            ok &= all(b < a for a, b in zip(medians, medians[1:]))
            worst_final = max(worst_final, medians[-1])
            parts.append(f"{kind}/{alpha}: " + ">".join(f"{m:.4f}" for m in medians))
    ok &= worst_final <= 0.05
    record(4, bool(ok), f"largest median at 2^13 {worst_final:.4f}; " + "; ".join(parts))


def test_criterion_5_std_error(sweep):
    records, _ = sweep
    parts, ok = [], True
    for shots in (2**9, 2**13):
        for kind in ("golden", "nongolden"):
            pairs = [r.tau("X") for r in cell(records, shots, 0.1, kind)]
            taus, ses = np.array(pairs).T
            ratio = np.std(taus, ddof=1) / np.mean(ses)
            ok &= abs(ratio - 1) <= 0.1
            parts.append(f"{kind}@{shots}: empirical/reported {ratio:.3f}")
    record(5, bool(ok), "; ".join(parts))


def test_criterion_6_runtime_savings(calibration_reports):
    skipped_counts = {r.downstream_runs_executed for r in calibration_reports[0.1] if ("X",) in r.skipped_bases}
    rows = bench_runtime(golden_circuit(0.5, downstream_seed=7), alpha=0.1, shots=10**4, trials=TRIALS, seed=6)
    on, off = rows
    gap = 1 - on.mean_s / off.mean_s
    record(6, gap >= 0.05 and skipped_counts == {6},
           f"optimized {on.mean_s * 1e3:.3f}±{on.stderr_s * 1e3:.3f} ms vs unoptimized "
           f"{off.mean_s * 1e3:.3f}±{off.stderr_s * 1e3:.3f} ms, gap {gap:.1%}; "
           f"downstream variants when X golden: {sorted(skipped_counts)} of 8")


def test_criterion_7_shot_planner():
    m = required_shots(0.1, 0.05, 1.5)
    rng = np.random.default_rng(7)
    draws = rng.normal(0.0, 1.5 / math.sqrt(m), size=10**5)
    freq = float(np.mean(np.abs(draws) > 0.1))
    record(7, m == 1660 and freq <= 0.05, f"required_shots={m}, violation frequency {freq:.5f} (<= 0.05)")


def test_criterion_8_parser():
    rng = np.random.default_rng(8)
    round_trips = 0
    for i in range(200):
        n = int(rng.integers(2, 6))
        if i % 2:
            circuit, cut = random_cut_circuit(rng, n, int(rng.integers(1, n)))
        else:
            circuit, cut = Circuit(n, tuple(random_gates(rng, range(n), 12))), None
        text = serialize_circuit(circuit, cut)
        round_trips += parse_circuit(text) == (circuit, cut) and serialize_circuit(*parse_circuit(text)) == text
    rejected = 0
    for text, line in MALFORMED:
        try:
            parse_circuit(text)
        except CircuitParseError as err:
            rejected += err.line == line
    record(8, round_trips == 200 and rejected == len(MALFORMED),
           f"{round_trips}/200 round trips, {rejected}/{len(MALFORMED)} malformed inputs rejected at the right line")
