"""Two-fragment quantum circuit cutting with online detection of golden cutting points."""

from .circuit import (
    Circuit,
    CircuitParseError,
    CutSpec,
    CutStructureError,
    FragmentPair,
    bipartition,
    parse_circuit,
    recompose,
    serialize_circuit,
)
from .cutting import (
    DownstreamResult,
    EigenstringDistribution,
    IncompleteFragmentData,
    Observable,
    UpstreamResult,
    enumerate_bases,
    execute_fragments,
    parity,
    pauli_split,
    reconstruct_distribution,
    reconstruct_expectation,
    run_downstream,
    run_upstream,
)
from .detector import DetectionReport, detect, detect_and_reconstruct, savings_summary
from .sim import Gate, StateVector, apply_gate, exact_probabilities, run_circuit
from .stats import (
    HypothesisOutcome,
    TauEstimate,
    b_upper_bound,
    estimate_tau,
    normal_quantile,
    required_shots,
    std_error,
    test_golden,
)

__version__ = "0.1.0"
