import math

import numpy as np
import pytest

from goldencut.circuit import bipartition, parse_circuit
from goldencut.cutting import Observable, execute_fragments, reconstruct_distribution
from goldencut.detector import UsageError, detect, detect_and_reconstruct, savings_summary
from goldencut.harness import golden_circuit, l2_distance, nongolden_circuit
from goldencut.sim import exact_expectation, exact_probabilities, run_circuit

from conftest import BELL_TEXT

GOLDEN = golden_circuit(0.5, downstream_seed=7)
NONGOLDEN = nongolden_circuit(0.5, downstream_seed=7)


def fragments_of(text):
    circuit, cut = parse_circuit(text)
    return bipartition(circuit, cut)


def test_golden_circuit_skips_x_with_calibrated_frequency():
    frags = fragments_of(GOLDEN)
    hits = 0
    for t in range(200):
        report = detect(frags, alpha=0.1, shots=10**4, seed=t)
        if ("X",) in report.skipped_bases:
            hits += 1
            assert report.downstream_runs_executed == 6
            assert report.downstream_runs_skipped == 2
    assert abs(hits / 200 - 0.9) <= 3 * math.sqrt(0.09 / 200)


def test_optimization_off_runs_everything():
    report = detect(fragments_of(GOLDEN), alpha=0.1, shots=10**4, seed=1, optimize=False)
    assert report.skipped_bases == frozenset()
    assert report.downstream_runs_executed == 8
    assert report.outcomes == []


def test_bell_expectation():
    text = "qubits 2\nh 0\ncut 0\ncx 0 1\n"
    report = detect_and_reconstruct(text, Observable.pauli("ZZ"), alpha=0.01, shots=10**5, seed=3)
    assert report.mode == "expectation"
    assert abs(report.result - 1.0) <= 0.05


def test_no_cut_is_usage_error():
    with pytest.raises(UsageError):
        detect_and_reconstruct(BELL_TEXT, alpha=0.1, shots=100, seed=0)


@pytest.mark.parametrize("alpha,shots", [(0.0, 10), (1.0, 10), (0.1, 0)])
def test_argument_domain(alpha, shots):
    with pytest.raises(UsageError):
        detect(fragments_of(GOLDEN), alpha=alpha, shots=shots, seed=0)


def test_observable_width_checked():
    frags = fragments_of(GOLDEN)
    with pytest.raises(UsageError):
        detect(frags, (Observable.pauli("ZZ"), Observable.pauli("ZZ")), alpha=0.1, shots=10, seed=0)
    with pytest.raises(UsageError):
        detect(frags, Observable.parse("ZZZ + XXX"), alpha=0.1, shots=10, seed=0)


def test_report_invariants():
    for text in (GOLDEN, NONGOLDEN):
        for seed in range(5):
            report = detect(fragments_of(text), alpha=0.3, shots=500, seed=seed)
            k = report.k
            assert report.downstream_runs_executed + report.downstream_runs_skipped == 4**k * 2**k
            assert report.downstream_runs_skipped == 2**k * len(report.skipped_bases)
            assert report.wall_time > 0


def test_no_skip_matches_engine_bit_for_bit():
    frags = fragments_of(NONGOLDEN)
    ss = np.random.SeedSequence(99)
    report = detect(frags, alpha=0.1, shots=2048, seed=ss, optimize=False)
    ups, downs = execute_fragments(frags, 2048, ss)
    np.testing.assert_array_equal(report.result, reconstruct_distribution(ups, downs, frags))


def test_determinism():
    frags = fragments_of(NONGOLDEN)
    a = detect(frags, alpha=0.1, shots=300, seed=5)
    b = detect(frags, alpha=0.1, shots=300, seed=5)
    np.testing.assert_array_equal(a.result, b.result)
    assert a.skipped_bases == b.skipped_bases


def test_savings_fractions():
    frags = fragments_of(GOLDEN)
    skipped = next(
        r for r in (detect(frags, alpha=0.1, shots=10**4, seed=s) for s in range(20))
        if r.skipped_bases == {("X",)}
    )
    assert savings_summary(skipped)["skip_fraction"] == 0.25
    assert savings_summary(skipped)["skipped_bases"] == ["X"]

    off = detect(frags, alpha=0.1, shots=10**4, seed=0, optimize=False)
    assert savings_summary(off)["skip_fraction"] == 0.0

    # exact data on |+> cut in isolation: tau vanishes for X and Y only
    idle = fragments_of("qubits 2\nh 1\ncut 0\n")
    report = detect(idle, alpha=1e-12, shots=None, seed=0)
    assert report.skipped_bases == {("X",), ("Y",)}
    summary = savings_summary(report)
    assert summary["downstream_total"] == 8
    assert summary["skip_fraction"] == 0.25 * len(report.skipped_bases)


def test_all_bases_skipped_gives_zero_result():
    # product upstream state with <X> = 0 on the output qubit: every tau vanishes
    text = "qubits 3\nz 0\nh 1\ncut 1\nh 2\n"
    frags = fragments_of(text)
    obs = (Observable.pauli("X"), Observable.pauli("II"))
    report = detect(frags, obs, alpha=0.05, shots=None, seed=0)
    assert report.skipped_bases == {("I",), ("X",), ("Y",), ("Z",)}
    assert report.result == 0.0
    assert savings_summary(report)["skip_fraction"] == 1.0


def test_expectation_mode_with_multi_term_pair():
    frags = fragments_of(NONGOLDEN)
    o1 = Observable(((1.0, "Z"), (0.5, "X")))
    o2 = Observable(((1.0, "ZZ"), (-0.7, "IX")))
    report = detect(frags, (o1, o2), alpha=0.01, shots=None, seed=0, optimize=False)
    state = run_circuit(frags.original)
    expected = sum(
        a * b * exact_expectation(state, Observable.pauli(s1 + s2)) for a, s1 in o1.terms for b, s2 in o2.terms
    )
    assert report.result == pytest.approx(expected, abs=1e-10)


def test_merge_iz_shares_identity_and_z_runs():
    frags = fragments_of(GOLDEN)
    plain = detect(frags, alpha=0.1, shots=1000, seed=4, optimize=False)
    merged = detect(frags, alpha=0.1, shots=1000, seed=4, optimize=False, merge_iz=True)
    # one upstream run (I with Z) and two downstream preparations (|0>, |1>) are shared
    assert plain.executions == 12
    assert merged.executions == 9
    exact = exact_probabilities(run_circuit(frags.original))
    assert l2_distance(merged.result, exact) < 0.2


def test_normalize_produces_distribution():
    report = detect(fragments_of(NONGOLDEN), alpha=0.1, shots=128, seed=2, normalize=True)
    assert report.normalized.min() >= 0
    assert report.normalized.sum() == pytest.approx(1.0)


def test_robust_reconstruction_on_golden_circuit():
    frags = fragments_of(GOLDEN)
    for shots in (2**9, 2**13):
        gaps = []
        for t in range(100):
            ss = np.random.SeedSequence([shots, t])
            on = detect(frags, alpha=0.1, shots=shots, seed=ss)
            off = detect(frags, alpha=0.1, shots=shots, seed=ss, optimize=False)
            gaps.append(l2_distance(on.result, off.result))
        assert np.median(gaps) <= 3 / math.sqrt(shots)
