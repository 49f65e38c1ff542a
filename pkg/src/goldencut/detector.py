"""Online golden-cut detection wrapped around the cutting pipeline.

For every basis element the upstream fragment always runs; its samples feed
both the hypothesis test and the reconstruction weights. Downstream variants
run only for bases whose test rejects "tau = 0".
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import FragmentPair, bipartition, parse_circuit
from .cutting import (
    Observable,
    clamp_normalize,
    downstream_result,
    eigen_weights,
    enumerate_bases,
    enumerate_eigenstrings,
    frame_of,
    pauli_parity_vector,
    pauli_split,
    reconstruct_distribution,
    reconstruct_expectation,
    upstream_result,
)
from .stats import (
    HypothesisOutcome,
    component_estimates,
    estimate_tau,
    identity_estimate,
    test_golden,
    test_golden_components,
)


class UsageError(ValueError):
    pass


@dataclass
class DetectionReport:
    mode: str
    k: int
    alpha: float
    shots: int | None
    optimized: bool
    outcomes: list[HypothesisOutcome]
    skipped_bases: frozenset
    downstream_runs_executed: int
    downstream_runs_skipped: int
    executions: int
    result: float | np.ndarray = field(repr=False)
    normalized: np.ndarray | None = field(default=None, repr=False)
    wall_time: float = 0.0

    def outcome_for(self, basis) -> HypothesisOutcome | None:
        basis = tuple(basis)
        for o in self.outcomes:
            if o.basis == basis:
                return o
        return None


def _resolve_observable(observable, fragments: FragmentPair):
    if observable is None:
        return None
    if isinstance(observable, Observable):
        split = pauli_split(observable, fragments)
        if len(split) != 1:
            raise UsageError("multi-term observables must be given as an (O_f1, O_f2) pair")
        coeff, s1, s2 = split[0]
        return Observable.pauli(s1), Observable.pauli(s2, coeff)
    o_f1, o_f2 = observable
    if o_f1.n_qubits != fragments.n_upstream_outputs:
        raise UsageError(
            f"O_f1 acts on {o_f1.n_qubits} qubits, upstream fragment has {fragments.n_upstream_outputs} outputs"
        )
    if o_f2.n_qubits != fragments.downstream.n_qubits:
        raise UsageError(
            f"O_f2 acts on {o_f2.n_qubits} qubits, downstream fragment has {fragments.downstream.n_qubits} wires"
        )
    return o_f1, o_f2


def detect(
    fragments: FragmentPair,
    observable=None,
    *,
    alpha: float,
    shots: int | None,
    seed=None,
    optimize: bool = True,
    merge_iz: bool = False,
    two_sided: bool = True,
    normalize: bool = False,
) -> DetectionReport:
    """Run the detection loop on already-bipartitioned fragments.

    ``observable`` is ``None`` for distribution mode, an ``(O_f1, O_f2)`` pair,
    or a single-term full-width :class:`Observable`. ``shots=None`` uses exact
    fragment probabilities.
    """
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")
    if shots is not None and shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    pair = _resolve_observable(observable, fragments)
    if seed is None:
        seed = np.random.SeedSequence()

    start = time.perf_counter()
    k = fragments.k
    eigenstrings = enumerate_eigenstrings(k)
    n_out = fragments.n_upstream_outputs
    if pair is None:
        up_terms = [(1.0, "Z" * n_out)]
        down_frames = [("Z",) * fragments.downstream.n_qubits]
    else:
        up_terms = list(pair[0].terms)
        down_frames = [frame_of(s) for _, s in pair[1].terms]

    up_cache: dict = {}
    down_cache: dict = {}
    ups, downs, outcomes, skipped = [], [], [], set()
    for basis in enumerate_bases(k):
        results = [
            upstream_result(fragments, basis, shots, seed, frame_of(s), i, merge_iz, up_cache)
            for i, (_, s) in enumerate(up_terms)
        ]
        ups.extend(results)
        run_down = True
        if optimize:
            outcome = _test_basis(basis, results, up_terms, pair is None, alpha, two_sided)
            outcomes.append(outcome)
            run_down = outcome.rejected
        if not run_down:
            skipped.add(basis)
            continue
        for signs in eigenstrings:
            for fi, frame in enumerate(down_frames):
                downs.append(
                    downstream_result(fragments, basis, signs, shots, seed, frame, fi, merge_iz, down_cache)
                )

    norm = None
    if pair is None:
        result = reconstruct_distribution(ups, downs, fragments, skipped)
        if normalize:
            norm = clamp_normalize(result)
    else:
        result = reconstruct_expectation(ups, downs, pair[0], pair[1], skipped, k=k)
    wall = time.perf_counter() - start

    per_basis = 2**k
    return DetectionReport(
        mode="distribution" if pair is None else "expectation",
        k=k,
        alpha=alpha,
        shots=shots,
        optimized=optimize,
        outcomes=outcomes,
        skipped_bases=frozenset(skipped),
        downstream_runs_executed=per_basis * (4**k - len(skipped)),
        downstream_runs_skipped=per_basis * len(skipped),
        executions=len(up_cache) + len(down_cache),
        result=result,
        normalized=norm,
        wall_time=wall,
    )


def _test_basis(basis, results, up_terms, distribution_mode, alpha, two_sided) -> HypothesisOutcome:
    w = eigen_weights(basis)
    if distribution_mode:
        res = results[0]
        joint, counts = res.joint(), res.joint_counts()
        agg = identity_estimate(joint, w, res.shots, counts, basis)
        comp_tau, comp_se = component_estimates(joint, w, res.shots, counts)
        return test_golden_components(agg, comp_tau, comp_se, alpha, two_sided)
    chis = [np.outer(w, pauli_parity_vector(s)).ravel() for _, s in up_terms]
    est = estimate_tau(
        [r.distribution for r in results], chis, [a for a, _ in up_terms], basis=basis
    )
    return test_golden(est, alpha, two_sided)


def detect_and_reconstruct(
    circuit_text: str,
    observable=None,
    *,
    alpha: float,
    shots: int | None,
    seed=None,
    optimize: bool = True,
    merge_iz: bool = False,
    two_sided: bool = True,
    normalize: bool = False,
) -> DetectionReport:
    circuit, cut = parse_circuit(circuit_text)
    if cut is None:
        raise UsageError("circuit has no 'cut' statement")
    fragments = bipartition(circuit, cut)
    return detect(
        fragments,
        observable,
        alpha=alpha,
        shots=shots,
        seed=seed,
        optimize=optimize,
        merge_iz=merge_iz,
        two_sided=two_sided,
        normalize=normalize,
    )


def savings_summary(report: DetectionReport) -> dict:
    total = report.downstream_runs_executed + report.downstream_runs_skipped
    return {
        "downstream_total": total,
        "downstream_executed": report.downstream_runs_executed,
        "downstream_skipped": report.downstream_runs_skipped,
        "skip_fraction": report.downstream_runs_skipped / total if total else 0.0,
        "skipped_bases": sorted("".join(b) for b in report.skipped_bases),
        "executions": report.executions,
        "wall_time_s": report.wall_time,
    }
