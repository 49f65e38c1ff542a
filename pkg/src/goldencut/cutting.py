"""Measure-and-prepare cutting: fragment variants, execution and reconstruction.

Eigenstrings are indexed by integers whose bit ``k`` is set when cut ``k``
carries eigenvalue -1. Positions labelled ``I`` always count as +1 in parity
weights: upstream ``I`` measurements are forced to +1, and downstream ``I``
preparations of ``|0>`` and ``|1>`` both carry weight +1.
"""
from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import FragmentPair
from .sim import (
    StateVector,
    apply_gates,
    exact_probabilities,
    measurement_rotation,
    prepare_eigenstate,
    sample_counts,
)

PAULIS = ("I", "X", "Y", "Z")

Basis = tuple[str, ...]
Eigenstring = tuple[int, ...]


class IncompleteFragmentData(ValueError):
    def __init__(self, missing: list[str]):
        super().__init__("missing fragment data: " + ", ".join(missing))
        self.missing = missing


def enumerate_bases(k: int) -> list[Basis]:
    if k < 1:
        raise ValueError(f"need at least one cut, got K={k}")
    return list(itertools.product(PAULIS, repeat=k))


def enumerate_eigenstrings(k: int) -> list[Eigenstring]:
    return [index_to_signs(i, k) for i in range(2**k)]


def index_to_signs(index: int, k: int) -> Eigenstring:
    return tuple(-1 if (index >> j) & 1 else 1 for j in range(k))


def signs_to_index(signs: Sequence[int]) -> int:
    return sum(1 << j for j, s in enumerate(signs) if s == -1)


def parity(signs: Iterable[int]) -> int:
    out = 1
    for s in signs:
        out *= s
    return out


def eigen_weights(basis: Sequence[str]) -> np.ndarray:
    """Parity weight of every eigenstring index, treating ``I`` positions as +1.

    The returned array is shared and read-only.
    """
    return _eigen_weights(tuple(basis))


@functools.lru_cache(maxsize=None)
def _eigen_weights(basis: Basis) -> np.ndarray:
    k = len(basis)
    idx = np.arange(2**k)
    w = np.ones(2**k)
    for j, label in enumerate(basis):
        if label != "I":
            w *= 1 - 2 * ((idx >> j) & 1)
    w.flags.writeable = False
    return w


def pauli_parity_vector(paulis: str) -> np.ndarray:
    """Eigenvalue of a Pauli string on each computational outcome of its own frame."""
    idx = np.arange(2 ** len(paulis))
    chi = np.ones(idx.size)
    for j, p in enumerate(paulis):
        if p != "I":
            chi *= 1 - 2 * ((idx >> j) & 1)
    return chi


_TERM = re.compile(
    r"\s*([+-])?\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*([IXYZ]+)\s*"
)


@dataclass(frozen=True)
class Observable:
    """Real linear combination of Pauli strings; character ``i`` acts on qubit ``i``."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(a), str(s).upper()) for a, s in self.terms)
        if not terms:
            raise ValueError("an observable needs at least one term")
        widths = {len(s) for _, s in terms}
        if len(widths) != 1:
            raise ValueError(f"Pauli strings of mixed widths {sorted(widths)}")
        for a, s in terms:
            if not np.isfinite(a):
                raise ValueError(f"non-finite coefficient {a}")
            if set(s) - set(PAULIS):
                raise ValueError(f"bad Pauli string {s!r}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def pauli(cls, paulis: str, coeff: float = 1.0) -> "Observable":
        return cls(((coeff, paulis),))

    @classmethod
    def identity(cls, n_qubits: int) -> "Observable":
        return cls.pauli("I" * n_qubits)

    @classmethod
    def parse(cls, text: str) -> "Observable":
        """Parse ``"0.5*XZ - ZZ + 2 IY"``-style sums; a bare string has coefficient 1."""
        text = text.strip()
        if not text:
            return cls.pauli("")
        terms, pos = [], 0
        while pos < len(text):
            m = _TERM.match(text, pos)
            if not m or m.end() == pos or (terms and not m.group(1)):
                raise ValueError(f"cannot parse observable {text!r} at offset {pos}")
            coeff = float(m.group(2)) if m.group(2) else 1.0
            terms.append((-coeff if m.group(1) == "-" else coeff, m.group(3)))
            pos = m.end()
        return cls(tuple(terms))

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms])

    def __str__(self) -> str:
        return " + ".join(f"{a:g}*{s}" for a, s in self.terms)


def frame_of(paulis: str) -> tuple[str, ...]:
    """Measurement frame for a Pauli string: its own labels, ``I`` read out in Z."""
    return tuple("Z" if p == "I" else p for p in paulis)


def compatible(paulis: str, frame: Sequence[str]) -> bool:
    return len(paulis) == len(frame) and all(p in ("I", f) for p, f in zip(paulis, frame))


@dataclass(frozen=True)
class EigenstringDistribution:
    """Outcome probabilities over ``width`` two-valued positions.

    Index bit ``j`` set means position ``j`` read eigenvalue -1 (bitstring
    value 1). ``shots`` is None for exact (infinite-shot) distributions.
    """

    probs: np.ndarray = field(repr=False)
    shots: int | None = None
    counts: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        width = int(np.log2(probs.size)) if probs.size else -1
        if probs.size == 0 or 2**width != probs.size:
            raise ValueError("distribution length must be a positive power of two")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "EigenstringDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        shots = int(counts.sum())
        if shots < 1:
            raise ValueError("empty distribution: no shots recorded")
        return cls(counts / shots, shots, counts)

    @classmethod
    def exact(cls, probs: np.ndarray) -> "EigenstringDistribution":
        return cls(np.asarray(probs, dtype=float), None, None)

    @property
    def width(self) -> int:
        return int(np.log2(self.probs.size))

    @property
    def outcomes(self) -> dict[Eigenstring, float]:
        return {
            index_to_signs(i, self.width): float(p) for i, p in enumerate(self.probs) if p
        }


@dataclass(frozen=True)
class UpstreamResult:
    """Joint distribution over (upstream output bits ``b1``, cut eigenstring ``r``).

    Flat index is ``b1 + 2**n_out * r``.
    """

    basis: Basis
    distribution: EigenstringDistribution
    n_outputs: int
    frame: tuple[str, ...] = ()

    @property
    def shots(self) -> int | None:
        return self.distribution.shots

    def joint(self) -> np.ndarray:
        """Probabilities as an array indexed ``[b1, r]``."""
        k = len(self.basis)
        return self.distribution.probs.reshape(2**k, 2**self.n_outputs).T

    def joint_counts(self) -> np.ndarray | None:
        if self.distribution.counts is None:
            return None
        k = len(self.basis)
        return self.distribution.counts.reshape(2**k, 2**self.n_outputs).T


@dataclass(frozen=True)
class DownstreamResult:
    basis: Basis
    eigenstring: Eigenstring
    distribution: EigenstringDistribution
    frame: tuple[str, ...] = ()

    @property
    def shots(self) -> int | None:
        return self.distribution.shots


def _measure(n: int, gates, shots: int | None, seed) -> EigenstringDistribution:
    state = apply_gates(StateVector.zero(n), gates)
    probs = exact_probabilities(state)
    if shots is None:
        return EigenstringDistribution.exact(probs)
    return EigenstringDistribution.from_counts(sample_counts(probs, shots, seed))


def _check_basis(basis: Sequence[str], k: int) -> Basis:
    basis = tuple(basis)
    if len(basis) != k:
        raise ValueError(f"basis {basis} has length {len(basis)}, expected K={k}")
    if set(basis) - set(PAULIS):
        raise ValueError(f"bad basis labels {basis}")
    return basis


def _check_frame(frame: Sequence[str] | None, width: int) -> tuple[str, ...]:
    if frame is None:
        return ("Z",) * width
    frame = tuple(frame)
    if len(frame) != width or set(frame) - {"X", "Y", "Z"}:
        raise ValueError(f"frame {frame} must be {width} labels from X, Y, Z")
    return frame


def _joint_index(fragments: FragmentPair, basis: Basis) -> np.ndarray:
    """Map raw upstream wire outcomes to joint (b1, r) indices."""
    n = fragments.upstream.n_qubits
    raw = np.arange(2**n)
    b1 = np.zeros_like(raw)
    for j, w in enumerate(fragments.upstream_output_wires):
        b1 |= ((raw >> w) & 1) << j
    r = np.zeros_like(raw)
    for k, w in enumerate(fragments.upstream_cut_wires):
        if basis[k] != "I":
            r |= ((raw >> w) & 1) << k
    return b1 + (r << fragments.n_upstream_outputs)


def upstream_setting(basis: Sequence[str], merge_iz: bool = False) -> Basis:
    """Basis actually measured; with ``merge_iz`` an ``I`` cut reuses the Z circuit."""
    return tuple("Z" if merge_iz and b == "I" else b for b in basis)


def measure_upstream(
    fragments: FragmentPair,
    setting: Sequence[str],
    shots: int | None,
    seed=None,
    frame: Sequence[str] | None = None,
) -> EigenstringDistribution:
    """Raw outcome distribution over upstream wires for one measurement setting."""
    frame = _check_frame(frame, fragments.n_upstream_outputs)
    gates = list(fragments.upstream.gates)
    for label, wire in zip(setting, fragments.upstream_cut_wires):
        gates += measurement_rotation(label, wire)
    for label, wire in zip(frame, fragments.upstream_output_wires):
        gates += measurement_rotation(label, wire)
    return _measure(fragments.upstream.n_qubits, gates, shots, seed)


def upstream_from_raw(
    fragments: FragmentPair,
    basis: Sequence[str],
    raw: EigenstringDistribution,
    frame: Sequence[str] | None = None,
) -> UpstreamResult:
    basis = _check_basis(basis, fragments.k)
    frame = _check_frame(frame, fragments.n_upstream_outputs)
    index = _joint_index(fragments, basis)
    size = raw.probs.size
    if raw.counts is not None:
        counts = np.bincount(index, weights=raw.counts, minlength=size).astype(np.int64)
        dist = EigenstringDistribution.from_counts(counts)
    else:
        dist = EigenstringDistribution.exact(np.bincount(index, weights=raw.probs, minlength=size))
    return UpstreamResult(basis, dist, fragments.n_upstream_outputs, frame)


def run_upstream(
    fragments: FragmentPair,
    basis: Sequence[str],
    shots: int | None,
    seed=None,
    frame: Sequence[str] | None = None,
) -> UpstreamResult:
    """Measure the cut wires in ``basis`` and the outputs in ``frame``.

    ``shots=None`` returns exact probabilities instead of a sample.
    """
    basis = _check_basis(basis, fragments.k)
    raw = measure_upstream(fragments, basis, shots, seed, frame)
    return upstream_from_raw(fragments, basis, raw, frame)


def run_downstream(
    fragments: FragmentPair,
    basis: Sequence[str],
    eigenstring: Sequence[int],
    shots: int | None,
    seed=None,
    frame: Sequence[str] | None = None,
) -> DownstreamResult:
    basis = _check_basis(basis, fragments.k)
    eigenstring = tuple(int(s) for s in eigenstring)
    if len(eigenstring) != fragments.k:
        raise ValueError(f"eigenstring {eigenstring} has length {len(eigenstring)}, expected K={fragments.k}")
    frame = _check_frame(frame, fragments.downstream.n_qubits)
    gates = []
    for wire, (label, sign) in enumerate(zip(basis, eigenstring)):
        gates += prepare_eigenstate(label, sign, wire)
    gates += fragments.downstream.gates
    for wire, label in enumerate(frame):
        gates += measurement_rotation(label, wire)
    dist = _measure(fragments.downstream.n_qubits, gates, shots, seed)
    return DownstreamResult(basis, eigenstring, dist, frame)


def variant_seed(seed, role: int, labels: Sequence[str], signs: Sequence[int] = (), frame_index: int = 0):
    """Independent stream per fragment execution, derived from the master seed.

    ``role`` is 0 for upstream and 1 for downstream executions.
    """
    if seed is None:
        return None
    key = (role, frame_index, *("IXYZ".index(l) for l in labels), *(0 if s == 1 else 1 for s in signs))
    entropy = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    base = tuple(seed.spawn_key) if isinstance(seed, np.random.SeedSequence) else ()
    return np.random.SeedSequence(entropy, spawn_key=base + key)


def execute_fragments(
    fragments: FragmentPair,
    shots: int | None,
    seed=None,
    *,
    upstream_frames: Sequence[Sequence[str]] | None = None,
    downstream_frames: Sequence[Sequence[str]] | None = None,
    merge_iz: bool = False,
    bases: Iterable[Basis] | None = None,
) -> tuple[list[UpstreamResult], list[DownstreamResult]]:
    """Run every upstream setting and every downstream (basis, eigenstring) variant."""
    up_frames = [tuple(f) for f in upstream_frames] if upstream_frames else [None]
    down_frames = [tuple(f) for f in downstream_frames] if downstream_frames else [None]
    bases = list(bases) if bases is not None else enumerate_bases(fragments.k)
    ups, downs = [], []
    for basis in bases:
        for fi, frame in enumerate(up_frames):
            ups.append(upstream_result(fragments, basis, shots, seed, frame, fi, merge_iz))
        for signs in enumerate_eigenstrings(fragments.k):
            for fi, frame in enumerate(down_frames):
                downs.append(downstream_result(fragments, basis, signs, shots, seed, frame, fi, merge_iz))
    return ups, downs


def upstream_result(fragments, basis, shots, seed, frame=None, frame_index=0, merge_iz=False, cache=None):
    """Seeded upstream execution; ``cache`` (a dict) shares runs between merged settings."""
    setting = upstream_setting(basis, merge_iz)
    key = (setting, frame_index)
    raw = cache.get(key) if cache is not None else None
    if raw is None:
        raw = measure_upstream(fragments, setting, shots, variant_seed(seed, 0, setting, (), frame_index), frame)
        if cache is not None:
            cache[key] = raw
    return upstream_from_raw(fragments, basis, raw, frame)


def downstream_result(fragments, basis, signs, shots, seed, frame=None, frame_index=0, merge_iz=False, cache=None):
    # I and Z preparations coincide (|0>, |1>), so merged settings share a run
    setting = upstream_setting(basis, merge_iz)
    key = (setting, tuple(signs), frame_index)
    res = cache.get(key) if cache is not None else None
    if res is None:
        res = run_downstream(
            fragments, setting, signs, shots, variant_seed(seed, 1, setting, signs, frame_index), frame
        )
        if cache is not None:
            cache[key] = res
    return DownstreamResult(tuple(basis), tuple(signs), res.distribution, res.frame)


def _infer_k(upstream, downstream, skipped, k):
    if k is not None:
        return k
    for item in (*upstream, *downstream):
        return len(item.basis)
    for basis in skipped:
        return len(basis)
    return None


def _find_upstream(table, basis, paulis):
    for res in table.get(basis, ()):
        if compatible(paulis, res.frame):
            return res
    return None


def _find_downstream(table, basis, signs, paulis):
    for res in table.get((basis, signs), ()):
        if compatible(paulis, res.frame):
            return res
    return None


def _tables(upstream, downstream):
    up: dict = {}
    for res in upstream:
        up.setdefault(tuple(res.basis), []).append(res)
    down: dict = {}
    for res in downstream:
        down.setdefault((tuple(res.basis), tuple(res.eigenstring)), []).append(res)
    return up, down


def upstream_contraction(result: UpstreamResult, paulis: str) -> float:
    """``sum_r Par(r) <paulis>_{M,r}`` using the joint (not conditional) weights."""
    w = eigen_weights(result.basis)
    return float(pauli_parity_vector(paulis) @ result.joint() @ w)


def reconstruct_expectation(
    upstream: Sequence[UpstreamResult],
    downstream: Sequence[DownstreamResult],
    o_f1: Observable,
    o_f2: Observable,
    skipped: Iterable[Basis] = (),
    *,
    k: int | None = None,
) -> float:
    """Parity-weighted recombination of fragment expectations; skipped bases add 0."""
    skipped = {tuple(b) for b in skipped}
    k = _infer_k(upstream, downstream, skipped, k)
    if k is None:
        return 0.0
    up, down = _tables(upstream, downstream)
    missing: list[str] = []
    total = 0.0
    for basis in enumerate_bases(k):
        if basis in skipped:
            continue
        w = eigen_weights(basis)
        a = 0.0
        for coeff, paulis in o_f1.terms:
            res = _find_upstream(up, basis, paulis)
            if res is None:
                missing.append(f"upstream {''.join(basis)} [{paulis}]")
                continue
            a += coeff * upstream_contraction(res, paulis)
        b = 0.0
        for s_index, signs in enumerate(enumerate_eigenstrings(k)):
            for coeff, paulis in o_f2.terms:
                res = _find_downstream(down, basis, signs, paulis)
                if res is None:
                    missing.append(f"downstream {''.join(basis)} s={signs} [{paulis}]")
                    continue
                b += w[s_index] * coeff * float(pauli_parity_vector(paulis) @ res.distribution.probs)
        total += a * b
    if missing:
        raise IncompleteFragmentData(missing)
    return total / 2**k


def output_index_map(fragments: FragmentPair) -> np.ndarray:
    """Full-circuit bitstring index for every (b1, b2) pair, shape ``[2**n_out, 2**N_f2]``."""
    n_out = fragments.n_upstream_outputs
    b1 = np.arange(2**n_out)
    b2 = np.arange(2**fragments.downstream.n_qubits)
    full1 = np.zeros_like(b1)
    for j, q in enumerate(fragments.upstream_output_qubits):
        full1 |= ((b1 >> j) & 1) << q
    full2 = np.zeros_like(b2)
    for w, q in enumerate(fragments.downstream_qubits):
        full2 |= ((b2 >> w) & 1) << q
    return full1[:, None] | full2[None, :]


def reconstruct_distribution(
    upstream: Sequence[UpstreamResult],
    downstream: Sequence[DownstreamResult],
    fragments: FragmentPair,
    skipped: Iterable[Basis] = (),
) -> np.ndarray:
    """Signed quasi-distribution over the full circuit's bitstrings.

    Entries may dip below zero under shot noise; see :func:`clamp_normalize`.
    """
    skipped = {tuple(b) for b in skipped}
    k = fragments.k
    n_out = fragments.n_upstream_outputs
    z_up = "Z" * n_out
    z_down = "Z" * fragments.downstream.n_qubits
    up, down = _tables(upstream, downstream)
    q = np.zeros((2**n_out, 2**fragments.downstream.n_qubits))
    missing: list[str] = []
    for basis in enumerate_bases(k):
        if basis in skipped:
            continue
        w = eigen_weights(basis)
        res = _find_upstream(up, basis, z_up)
        if res is None:
            missing.append(f"upstream {''.join(basis)}")
            continue
        a = res.joint() @ w
        b = np.zeros(q.shape[1])
        for s_index, signs in enumerate(enumerate_eigenstrings(k)):
            dres = _find_downstream(down, basis, signs, z_down)
            if dres is None:
                missing.append(f"downstream {''.join(basis)} s={signs}")
                continue
            b += w[s_index] * dres.distribution.probs
        q += np.outer(a, b)
    if missing:
        raise IncompleteFragmentData(missing)
    out = np.zeros(2**fragments.original.n_qubits)
    out[output_index_map(fragments)] = q / 2**k
    return out


def clamp_normalize(dist: np.ndarray) -> np.ndarray:
    """Zero out negative entries and rescale to unit mass (all-zero input stays zero)."""
    out = np.clip(dist, 0.0, None)
    total = out.sum()
    return out / total if total > 0 else out


def pauli_split(observable: Observable, fragments: FragmentPair) -> list[tuple[float, str, str]]:
    n = fragments.original.n_qubits
    if observable.n_qubits != n:
        raise ValueError(f"observable acts on {observable.n_qubits} qubits, circuit has {n}")
    out = []
    for coeff, s in observable.terms:
        s1 = "".join(s[q] for q in fragments.upstream_output_qubits)
        s2 = "".join(s[q] for q in fragments.downstream_qubits)
        out.append((coeff, s1, s2))
    return out
