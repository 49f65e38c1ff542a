import hypothesis
import numpy as np
import pytest

from goldencut.circuit import Circuit, CutSpec
from goldencut.sim import Gate

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

BELL_TEXT = "qubits 2\nh 0\ncx 0 1\n"
GOLDEN_UPSTREAM_TEXT = "qubits 3\nrx 0 0.5\nrx 1 0.5\nry 0 0.5\ncut 1\ncx 1 2\n"

# (text, offending line)
MALFORMED = [
    ("qubits 2\nfoo 0\n", 2),
    ("qubits 2\nh 0 1\n", 2),
    ("qubits 2\nrx 0\n", 2),
    ("qubits 2\ncx 0\n", 2),
    ("qubits 2\nh 2\n", 2),
    ("qubits 2\nrx 0 abc\n", 2),
    ("qubits 3\nh 0\ncut 1 1\n", 3),
    ("qubits 3\nh 0\ncut 5\n", 3),
    ("qubits 3\nh 0\ncut 1\nh 2\ncut 2\n", 5),
    ("qubits 3\nh 0\nh 1\ncut 1\nh 2\ncx 0 2\n", 6),
    ("h 0\n", 1),
    ("qubits 2\nqubits 2\n", 2),
    ("qubits 2\ncx 1 1\n", 2),
    ("qubits 0\n", 1),
    ("", 1),
]


def random_gates(rng: np.random.Generator, qubits, n_gates: int) -> list[Gate]:
    qubits = list(qubits)
    gates = []
    for _ in range(n_gates):
        kinds = ["rx", "ry", "rz", "h", "x", "y", "z", "s"] + (["cx"] * 3 if len(qubits) > 1 else [])
        kind = kinds[rng.integers(len(kinds))]
        if kind == "cx":
            a, b = rng.choice(len(qubits), size=2, replace=False)
            gates.append(Gate("cx", (qubits[a], qubits[b])))
        else:
            q = qubits[rng.integers(len(qubits))]
            angle = float(rng.uniform(-np.pi, np.pi)) if kind.startswith("r") else None
            gates.append(Gate(kind, (q,), angle))
    return gates


def random_cut_circuit(rng: np.random.Generator, n_qubits: int, k: int):
    """Random circuit with a valid K-cut: upstream gates on U, downstream gates on D, U & D = cut qubits."""
    perm = [int(q) for q in rng.permutation(n_qubits)]
    cut = perm[:k]
    rest = perm[k:]
    n_up_only = int(rng.integers(0, len(rest) + 1))
    up_only, down_only = rest[:n_up_only], rest[n_up_only:]
    upstream = random_gates(rng, cut + up_only, int(rng.integers(3, 9)))
    # make sure every upstream-only qubit is touched before the cut
    upstream += [Gate("h", (q,)) for q in up_only]
    downstream = random_gates(rng, cut + down_only, int(rng.integers(3, 9)))
    circuit = Circuit(n_qubits, tuple(upstream + downstream))
    return circuit, CutSpec(tuple(cut), len(upstream))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
