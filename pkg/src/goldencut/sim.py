"""Dense statevector simulation.

Amplitudes live in a flat array indexed by bitstring, qubit 0 being the
lowest-order bit. Gates are small value objects; every operation returns
a new state and never mutates its input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ROTATIONS = frozenset({"rx", "ry", "rz"})
ONE_QUBIT = frozenset({"h", "x", "y", "z", "s", "sdg"}) | ROTATIONS
TWO_QUBIT = frozenset({"cx"})
GATE_KINDS = ONE_QUBIT | TWO_QUBIT

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_FIXED = {
    "h": np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
}
PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": _FIXED["x"],
    "Y": _FIXED["y"],
    "Z": _FIXED["z"],
}


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} takes {arity} qubit(s), got {len(self.targets)}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise IndexError(f"negative qubit index in {self.targets}")
        if self.kind in ROTATIONS:
            if self.angle is None:
                raise ValueError(f"{self.kind} requires an angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    def matrix(self) -> np.ndarray:
        """Unitary in the gate's own target order (first target = high bit for cx)."""
        if self.kind == "cx":
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
            )
        if self.kind in ROTATIONS:
            c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
            if self.kind == "rx":
                return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
            if self.kind == "ry":
                return np.array([[c, -s], [s, c]], dtype=complex)
            phase = complex(math.cos(self.angle / 2), math.sin(self.angle / 2))
            return np.array([[phase.conjugate(), 0], [0, phase]], dtype=complex)
        return _FIXED[self.kind]


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n_qubits < 0:
            raise ValueError("n_qubits must be nonnegative")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis_state(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def _apply_1q(amps: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    psi = amps.reshape(2 ** (n - q - 1), 2, 2**q)
    out = np.empty_like(psi)
    a0, a1 = psi[:, 0, :], psi[:, 1, :]
    out[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
    out[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
    return out.reshape(-1)


def _apply_cx(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    out = amps.copy()
    idx = np.arange(amps.size)
    sel = ((idx >> control) & 1).astype(bool) & ~((idx >> target) & 1).astype(bool)
    a = idx[sel]
    b = a | (1 << target)
    out[a], out[b] = amps[b], amps[a]
    return out


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    n = state.n_qubits
    for t in gate.targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n}-qubit state")
    if gate.kind == "cx":
        amps = _apply_cx(state.amplitudes, n, *gate.targets)
    else:
        amps = _apply_1q(state.amplitudes, n, gate.targets[0], gate.matrix())
    return StateVector(n, amps)


def apply_gates(state: StateVector, gates: Iterable[Gate]) -> StateVector:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def run_circuit(circuit, initial: StateVector | None = None) -> StateVector:
    """Apply ``circuit.gates`` in order, starting from ``initial`` (default ``|0...0>``)."""
    if initial is None:
        initial = StateVector.zero(circuit.n_qubits)
    if initial.n_qubits != circuit.n_qubits:
        raise ValueError(
            f"circuit acts on {circuit.n_qubits} qubits but state has {initial.n_qubits}"
        )
    return apply_gates(initial, circuit.gates)


def measurement_rotation(pauli: str, qubit: int = 0) -> list[Gate]:
    """Gates rotating the eigenbasis of ``pauli`` onto the computational basis.

    ``+1`` eigenvectors land on ``|0>``. ``I`` is read out in the Z frame.
    """
    if pauli == "X":
        return [Gate("h", (qubit,))]
    if pauli == "Y":
        return [Gate("sdg", (qubit,)), Gate("h", (qubit,))]
    if pauli in ("Z", "I"):
        return []
    raise ValueError(f"unknown Pauli label {pauli!r}")


def prepare_eigenstate(pauli: str, sign: int, qubit: int = 0) -> list[Gate]:
    """Gates taking ``|0>`` to the ``sign`` eigenvector of ``pauli``.

    For ``I`` both eigenvalues are +1; by convention sign +1 gives ``|0>`` and
    sign -1 gives ``|1>``.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    flip = [Gate("x", (qubit,))] if sign == -1 else []
    if pauli in ("Z", "I"):
        return flip
    if pauli == "X":
        return flip + [Gate("h", (qubit,))]
    if pauli == "Y":
        return flip + [Gate("h", (qubit,)), Gate("s", (qubit,))]
    raise ValueError(f"unknown Pauli label {pauli!r}")


def exact_probabilities(state: StateVector) -> np.ndarray:
    probs = np.abs(state.amplitudes) ** 2
    total = probs.sum()
    if total > 0:
        probs /= total
    return probs


def _as_generator(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def sample_counts(probs: np.ndarray, shots: int, rng_seed=None) -> np.ndarray:
    """Multinomial counts by inverse-CDF lookup of uniform draws.

    Returns a dense integer array aligned with ``probs``.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = _as_generator(rng_seed)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    draws = rng.random(shots)
    outcomes = np.searchsorted(cdf, draws, side="right")
    # guards against cdf[-1] rounding below a draw
    np.minimum(outcomes, len(probs) - 1, out=outcomes)
    return np.bincount(outcomes, minlength=len(probs))


def sample_bitstrings(state: StateVector, shots: int, rng_seed=None) -> dict[int, int]:
    """Sampled outcome counts keyed by bitstring index (zero counts omitted)."""
    counts = sample_counts(exact_probabilities(state), shots, rng_seed)
    return {int(i): int(c) for i, c in enumerate(counts) if c}


def apply_pauli_string(state: StateVector, paulis: str) -> StateVector:
    """Apply the tensor product described by ``paulis`` (character i acts on qubit i)."""
    if len(paulis) != state.n_qubits:
        raise ValueError(f"Pauli string {paulis!r} does not match {state.n_qubits} qubits")
    gates = [Gate(p.lower(), (q,)) for q, p in enumerate(paulis) if p != "I"]
    return apply_gates(state, gates)


def exact_expectation(state: StateVector, observable) -> float:
    """``<psi|O|psi>`` for an :class:`~goldencut.cutting.Observable` or a dense matrix."""
    if isinstance(observable, np.ndarray):
        dim = state.amplitudes.size
        if observable.shape != (dim, dim):
            raise ValueError(f"observable shape {observable.shape} does not match state")
        if not np.allclose(observable, observable.conj().T, atol=1e-12):
            raise ValueError("observable is not Hermitian")
        value = np.vdot(state.amplitudes, observable @ state.amplitudes)
        return float(value.real)
    total = 0.0
    for coeff, paulis in observable.terms:
        if isinstance(coeff, complex) and coeff.imag != 0:
            raise ValueError("observable is not Hermitian: complex Pauli coefficient")
        moved = apply_pauli_string(state, paulis)
        total += float(coeff.real if isinstance(coeff, complex) else coeff) * float(
            np.vdot(state.amplitudes, moved.amplitudes).real
        )
    return total


def pauli_matrix(paulis: str) -> np.ndarray:
    """Dense matrix of a Pauli string under the qubit-0-lowest-bit convention."""
    out = np.eye(1, dtype=complex)
    for p in paulis:
        # later characters are higher-order bits, so they go on the left
        out = np.kron(PAULI_MATRICES[p], out)
    return out


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        rho = np.asarray(self.entries, dtype=complex)
        dim = 2**self.n_qubits
        if rho.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {rho.shape}")
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        a = state.amplitudes
        return cls(state.n_qubits, np.outer(a, a.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_hermitian(self, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.entries, self.entries.conj().T, atol=atol))

    def expectation(self, operator: np.ndarray) -> complex:
        return complex(np.trace(operator @ self.entries))

    def _tensor(self) -> np.ndarray:
        n = self.n_qubits
        # axis k of each half corresponds to qubit n-1-k
        return self.entries.reshape((2,) * (2 * n))

    def partial_trace(self, qubits: Sequence[int]) -> "DensityMatrix":
        """Trace out ``qubits``; remaining qubits keep their relative order."""
        n = self.n_qubits
        keep = [q for q in range(n) if q not in set(qubits)]
        t = self._tensor()
        row_axes = {q: n - 1 - q for q in range(n)}
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        rows = [letters[i] for i in range(n)]
        cols = [letters[n + i] for i in range(n)]
        for q in qubits:
            cols[row_axes[q]] = rows[row_axes[q]]
        out_rows = [rows[row_axes[q]] for q in reversed(keep)]
        out_cols = [cols[row_axes[q]] for q in reversed(keep)]
        spec = "".join(rows) + "".join(cols) + "->" + "".join(out_rows) + "".join(out_cols)
        reduced = np.einsum(spec, t)
        dim = 2 ** len(keep)
        return DensityMatrix(len(keep), reduced.reshape(dim, dim))

    def apply_on(self, operator_1q: np.ndarray, qubit: int) -> "DensityMatrix":
        """Left-multiply by a single-qubit operator acting on ``qubit``."""
        full = np.eye(1, dtype=complex)
        for q in range(self.n_qubits):
            full = np.kron(operator_1q if q == qubit else np.eye(2), full)
        return DensityMatrix(self.n_qubits, full @ self.entries)
