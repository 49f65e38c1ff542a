"""Circuit representation, cut specification, bipartition and the ``.qct`` text format.

Format::

    qubits 3
    rx 0 0.5          # rotations take one qubit and an angle in radians
    h 1
    cut 1             # at most one; every cut qubit is severed here
    cx 1 2

Qubits touched by gates before the ``cut`` line, together with the cut
qubits, form the upstream fragment. All other qubits belong downstream; the
cut qubits occupy downstream wires ``0..K-1`` in the order listed.
"""
from __future__ import annotations

from dataclasses import dataclass

from .sim import GATE_KINDS, ROTATIONS, TWO_QUBIT, Gate


class CircuitParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CutStructureError(ValueError):
    """A gate crosses the upstream/downstream boundary."""

    def __init__(self, message: str, gate_index: int, gate: Gate):
        super().__init__(message)
        self.gate_index = gate_index
        self.gate = gate


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for t in g.targets:
                if t >= self.n_qubits:
                    raise IndexError(f"{g.kind} on qubit {t} in a {self.n_qubits}-qubit circuit")


@dataclass(frozen=True)
class CutSpec:
    cut_qubits: tuple[int, ...]
    position: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "cut_qubits", tuple(int(q) for q in self.cut_qubits))
        if not self.cut_qubits:
            raise ValueError("a cut needs at least one qubit")
        if len(set(self.cut_qubits)) != len(self.cut_qubits):
            raise ValueError(f"duplicate cut qubit in {self.cut_qubits}")
        if self.position < 0:
            raise ValueError("cut position must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.cut_qubits)


@dataclass(frozen=True)
class FragmentPair:
    """Upstream and downstream fragments of a bipartitioned circuit.

    ``upstream_qubits[w]`` / ``downstream_qubits[w]`` give the original qubit
    behind fragment wire ``w``. ``upstream_cut_wires[k]`` is the upstream wire
    of cut ``k``; downstream cut ``k`` is always wire ``k``.
    """

    original: Circuit
    cut: CutSpec
    upstream: Circuit
    downstream: Circuit
    upstream_qubits: tuple[int, ...]
    downstream_qubits: tuple[int, ...]
    upstream_cut_wires: tuple[int, ...]

    @property
    def k(self) -> int:
        return self.cut.k

    @property
    def upstream_output_wires(self) -> tuple[int, ...]:
        cut = set(self.upstream_cut_wires)
        return tuple(w for w in range(self.upstream.n_qubits) if w not in cut)

    @property
    def upstream_output_qubits(self) -> tuple[int, ...]:
        """Original qubits measured as final outputs of the upstream fragment."""
        return tuple(self.upstream_qubits[w] for w in self.upstream_output_wires)

    @property
    def n_upstream_outputs(self) -> int:
        return self.upstream.n_qubits - self.k


def _upstream_qubits(circuit: Circuit, cut: CutSpec) -> set[int]:
    touched = {t for g in circuit.gates[: cut.position] for t in g.targets}
    return touched | set(cut.cut_qubits)


def _validate(circuit: Circuit, cut: CutSpec) -> set[int]:
    for q in cut.cut_qubits:
        if not 0 <= q < circuit.n_qubits:
            raise IndexError(f"cut qubit {q} out of range for {circuit.n_qubits} qubits")
    if cut.position > len(circuit.gates):
        raise ValueError(f"cut position {cut.position} beyond {len(circuit.gates)} gates")
    upstream = _upstream_qubits(circuit, cut)
    upstream_only = upstream - set(cut.cut_qubits)
    for i in range(cut.position, len(circuit.gates)):
        g = circuit.gates[i]
        bad = sorted(set(g.targets) & upstream_only)
        if bad:
            raise CutStructureError(
                f"gate {i} ({format_gate(g)}) after the cut acts on upstream-only qubit(s) {bad}",
                i,
                g,
            )
    return upstream


def bipartition(circuit: Circuit, cut: CutSpec) -> FragmentPair:
    upstream = _validate(circuit, cut)
    up_qubits = tuple(sorted(upstream))
    rest = sorted(set(range(circuit.n_qubits)) - upstream)
    down_qubits = tuple(cut.cut_qubits) + tuple(rest)

    up_index = {q: w for w, q in enumerate(up_qubits)}
    down_index = {q: w for w, q in enumerate(down_qubits)}

    def remap(gates, index):
        return tuple(Gate(g.kind, tuple(index[t] for t in g.targets), g.angle) for g in gates)

    up_circuit = Circuit(len(up_qubits), remap(circuit.gates[: cut.position], up_index))
    down_circuit = Circuit(len(down_qubits), remap(circuit.gates[cut.position :], down_index))
    return FragmentPair(
        original=circuit,
        cut=cut,
        upstream=up_circuit,
        downstream=down_circuit,
        upstream_qubits=up_qubits,
        downstream_qubits=down_qubits,
        upstream_cut_wires=tuple(up_index[q] for q in cut.cut_qubits),
    )


def recompose(fragments: FragmentPair) -> Circuit:
    """Glue the fragments back into one circuit on the original wires."""
    gates = [
        Gate(g.kind, tuple(fragments.upstream_qubits[t] for t in g.targets), g.angle)
        for g in fragments.upstream.gates
    ]
    gates += [
        Gate(g.kind, tuple(fragments.downstream_qubits[t] for t in g.targets), g.angle)
        for g in fragments.downstream.gates
    ]
    return Circuit(fragments.original.n_qubits, tuple(gates))


def format_gate(gate: Gate) -> str:
    parts = [gate.kind, *map(str, gate.targets)]
    if gate.angle is not None:
        parts.append(repr(gate.angle))
    return " ".join(parts)


def serialize_circuit(circuit: Circuit, cut: CutSpec | None = None) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    for i, g in enumerate(circuit.gates):
        if cut is not None and i == cut.position:
            lines.append("cut " + " ".join(map(str, cut.cut_qubits)))
        lines.append(format_gate(g))
    if cut is not None and cut.position == len(circuit.gates):
        lines.append("cut " + " ".join(map(str, cut.cut_qubits)))
    return "\n".join(lines) + "\n"


def _parse_qubit(token: str, n: int, lineno: int) -> int:
    try:
        q = int(token)
    except ValueError:
        raise CircuitParseError(f"expected a qubit index, got {token!r}", lineno) from None
    if not 0 <= q < n:
        raise CircuitParseError(f"qubit {q} out of range for {n} qubits", lineno)
    return q


def parse_circuit(text: str) -> tuple[Circuit, CutSpec | None]:
    n_qubits: int | None = None
    gates: list[Gate] = []
    gate_lines: list[int] = []
    cut: CutSpec | None = None
    cut_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        head = head.lower()

        if n_qubits is None:
            if head != "qubits":
                raise CircuitParseError("first statement must be 'qubits <N>'", lineno)
            if len(args) != 1:
                raise CircuitParseError("'qubits' takes exactly one argument", lineno)
            try:
                n_qubits = int(args[0])
            except ValueError:
                raise CircuitParseError(f"bad qubit count {args[0]!r}", lineno) from None
            if n_qubits < 1:
                raise CircuitParseError("qubit count must be >= 1", lineno)
            continue

        if head == "qubits":
            raise CircuitParseError("duplicate 'qubits' statement", lineno)

        if head == "cut":
            if cut is not None:
                raise CircuitParseError(f"second cut (first on line {cut_line}); only bipartitions are supported", lineno)
            if not args:
                raise CircuitParseError("'cut' needs at least one qubit", lineno)
            qubits = [_parse_qubit(a, n_qubits, lineno) for a in args]
            if len(set(qubits)) != len(qubits):
                raise CircuitParseError(f"duplicate cut qubit in {qubits}", lineno)
            cut = CutSpec(tuple(qubits), len(gates))
            cut_line = lineno
            continue

        if head not in GATE_KINDS:
            raise CircuitParseError(f"unknown mnemonic {head!r}", lineno)
        arity = 2 if head in TWO_QUBIT else 1
        n_args = arity + (1 if head in ROTATIONS else 0)
        if len(args) != n_args:
            raise CircuitParseError(f"'{head}' expects {n_args} argument(s), got {len(args)}", lineno)
        targets = tuple(_parse_qubit(a, n_qubits, lineno) for a in args[:arity])
        if len(set(targets)) != len(targets):
            raise CircuitParseError(f"'{head}' targets must be distinct", lineno)
        angle = None
        if head in ROTATIONS:
            try:
                angle = float(args[arity])
            except ValueError:
                raise CircuitParseError(f"bad angle {args[arity]!r}", lineno) from None
        gates.append(Gate(head, targets, angle))
        gate_lines.append(lineno)

    if n_qubits is None:
        raise CircuitParseError("missing 'qubits <N>' statement", 1)
    circuit = Circuit(n_qubits, tuple(gates))
    if cut is not None:
        try:
            _validate(circuit, cut)
        except CutStructureError as err:
            raise CircuitParseError(str(err), gate_lines[err.gate_index]) from err
    return circuit, cut
