"""Noise-aware device selection within a cluster, plus quantum volume.

The selection problem: pick a subset of cluster devices whose combined
capacity covers the model, whose weighted noise stays under a threshold,
and whose count satisfies the data-parallelization and device limits, while
minimizing the aggregate noise. ``greedy_select`` scans devices in
ascending noise order; ``brute_force_select`` enumerates bounded subsets
and is the optimality oracle used in tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .noise import CalibrationNoiseModel, apply_readout_flips, make_bit_flip, preparation_flip_prob
from .sim import MAX_QUBITS, Circuit, Gate, apply_channel, run_circuit, sample_bits, zero_state
from .topology import DeviceProfile

CAPACITY = "capacity"
NOISE_THRESHOLD = "noise-threshold"
PARALLELIZATION = "parallelization"
DEVICE_LIMIT = "device-limit"


@dataclass(frozen=True)
class Candidate:
    """One selectable device: its id, qubit capacity, noise score, and QV."""

    id: str
    capacity: int
    n_eff: float
    quantum_volume: float = 1.0


@dataclass(frozen=True)
class SelectionProblem:
    candidates: tuple[Candidate, ...]
    model_capacity: int
    noise_threshold: float
    parallel_limit: int
    data_dim: int
    device_limit: int
    device_weights: dict[str, float] | None = None  # None: uniform 1/k over selected

    def __post_init__(self):
        if self.noise_threshold <= 0:
            raise ValueError("noise threshold must be positive")
        if self.parallel_limit < 1 or self.device_limit < 1 or self.data_dim < 1:
            raise ValueError("parallel_limit, device_limit and data_dim must be >= 1")
        if self.model_capacity < 1:
            raise ValueError("model capacity must be >= 1")
        object.__setattr__(self, "candidates", tuple(self.candidates))

    def by_id(self, device_id: str) -> Candidate:
        for c in self.candidates:
            if c.id == device_id:
                return c
        raise KeyError(device_id)


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    aggregate_noise: float | None
    avg_quantum_volume: float | None
    feasible: bool
    violations: tuple[str, ...] = ()
    n_enumerated: int | None = None

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "aggregate_noise": self.aggregate_noise,
            "avg_quantum_volume": self.avg_quantum_volume,
            "feasible": self.feasible,
            "violations": list(self.violations),
            "n_enumerated": self.n_enumerated,
        }


def aggregate_noise(selected: list[Candidate], weights: dict[str, float] | None = None) -> float:
    """Weighted noise of a selection; uniform weights make it the mean."""
    if not selected:
        raise ValueError("selection is empty")
    if weights is None:
        return float(sum(c.n_eff for c in selected) / len(selected))
    return float(sum(weights[c.id] * c.n_eff for c in selected))


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[str, ...]


def check_feasible(problem: SelectionProblem, selected_ids) -> FeasibilityReport:
    """Evaluate the four selection constraints; names each violated one."""
    selected = [problem.by_id(i) for i in selected_ids]
    violations = []
    if problem.model_capacity > sum(c.capacity for c in selected):
        violations.append(CAPACITY)
    if selected and aggregate_noise(selected, problem.device_weights) > problem.noise_threshold + 1e-12:
        violations.append(NOISE_THRESHOLD)
    if not selected or problem.data_dim / len(selected) > problem.parallel_limit + 1e-12:
        violations.append(PARALLELIZATION)
    if len(selected) > problem.device_limit:
        violations.append(DEVICE_LIMIT)
    return FeasibilityReport(not violations, tuple(violations))


def _result_for(problem: SelectionProblem, selected: list[Candidate],
                noise_blocked: bool = False) -> SelectionResult:
    ids = tuple(sorted(c.id for c in selected))
    report = check_feasible(problem, ids)
    violations = report.violations
    if not report.feasible and noise_blocked and NOISE_THRESHOLD not in violations:
        violations = violations + (NOISE_THRESHOLD,)
    agg = aggregate_noise(selected, problem.device_weights) if selected else None
    qv = float(np.mean([c.quantum_volume for c in selected])) if selected else None
    return SelectionResult(ids, agg, qv, report.feasible, violations)


def _scan(problem: SelectionProblem, order: list[Candidate]) -> SelectionResult:
    selected: list[Candidate] = []
    noise_blocked = False
    for cand in order:
        if len(selected) >= problem.device_limit:
            break
        trial = selected + [cand]
        if aggregate_noise(trial, problem.device_weights) > problem.noise_threshold + 1e-12:
            noise_blocked = True
            continue
        selected = trial
        capacity_met = sum(c.capacity for c in selected) >= problem.model_capacity
        parallel_met = problem.data_dim / len(selected) <= problem.parallel_limit + 1e-12
        if capacity_met and parallel_met:
            break
    return _result_for(problem, selected, noise_blocked)


def greedy_select(problem: SelectionProblem) -> SelectionResult:
    """Scan devices in ascending noise order, adding while the threshold and
    device limit allow, until capacity and parallelization are both met.
    Infeasibility is a result, never an exception."""
    order = sorted(problem.candidates, key=lambda c: (c.n_eff, c.id))
    return _scan(problem, order)


def random_select(problem: SelectionProblem, seed: int) -> SelectionResult:
    """Baseline selector: same stopping rule as greedy over a shuffled order."""
    rng = np.random.default_rng(seed)
    order = [problem.candidates[i] for i in rng.permutation(len(problem.candidates))]
    return _scan(problem, order)


def brute_force_select(problem: SelectionProblem,
                       max_subset_size: int | None = None) -> SelectionResult:
    """Enumerate all subsets up to the size cap and return the feasible one
    with minimal aggregate noise (ties: smaller subset, then lexicographic ids).

    The enumeration count is recorded on the result for complexity checks.
    """
    n = len(problem.candidates)
    p = min(max_subset_size if max_subset_size is not None else problem.device_limit,
            problem.device_limit, n)
    if n > 20 and p > 4:
        raise ValueError(f"enumeration bound exceeded (n={n}, p={p})")
    ordered = sorted(problem.candidates, key=lambda c: c.id)
    best_key = None
    best: list[Candidate] | None = None
    count = 0
    for k in range(1, p + 1):
        for combo in itertools.combinations(ordered, k):
            count += 1
            ids = tuple(c.id for c in combo)
            if not check_feasible(problem, ids).feasible:
                continue
            key = (aggregate_noise(list(combo), problem.device_weights), k, ids)
            if best_key is None or key < best_key:
                best_key, best = key, list(combo)
    if best is None:
        return replace(greedy_select(problem), n_enumerated=count)
    return replace(_result_for(problem, best), n_enumerated=count)


def enumeration_size(n: int, p: int) -> int:
    """Number of nonempty subsets of size <= p from n items."""
    return sum(math.comb(n, k) for k in range(1, min(p, n) + 1))


def _model_circuit(width: int, rng: np.random.Generator) -> Circuit:
    """A scrambling circuit: per layer, random Euler rotations on every qubit
    and CNOTs on a random disjoint pairing; depth equals width."""
    gates = []
    for _ in range(width):
        for q in range(width):
            a, b, c = rng.uniform(0.0, 2.0 * np.pi, size=3)
            gates.append(Gate("RZ", (q,), float(a)))
            gates.append(Gate("RY", (q,), float(b)))
            gates.append(Gate("RZ", (q,), float(c)))
        perm = rng.permutation(width)
        for i in range(width // 2):
            gates.append(Gate("CNOT", (int(perm[2 * i]), int(perm[2 * i + 1]))))
    return Circuit(width, tuple(gates))


def _prepared_state(width: int, calibration):
    state = zero_state(width)
    for q in range(width):
        p = preparation_flip_prob(calibration, q, 0)
        if p > 0:
            state = apply_channel(state, make_bit_flip(p), (q,))
    return state


def quantum_volume(device: DeviceProfile, seed: int, max_width: int = 5,
                   n_circuits: int = 20, shots: int = 200) -> int:
    """Heavy-output quantum volume of a device under its calibration noise.

    For each width m, runs random model circuits, takes the heavy set from
    the ideal output distribution, and samples the noisy execution (with
    preparation and readout errors). QV is 2^m for the largest m whose mean
    heavy-output probability exceeds 2/3. Deterministic for a fixed seed.
    """
    if not 2 <= max_width <= 5:
        raise ValueError("max_width must be in [2, 5]")
    rng = np.random.default_rng(seed)
    calib = device.calibration
    noise_model = CalibrationNoiseModel(calib)
    passed = 0
    for width in range(2, min(max_width, device.capacity, MAX_QUBITS) + 1):
        hops = []
        for _ in range(n_circuits):
            circuit = _model_circuit(width, rng)
            ideal = run_circuit(circuit)
            probs = np.clip(np.real(np.diag(ideal.data)), 0.0, None)
            heavy = probs > np.median(probs)
            noisy = run_circuit(circuit, noise_model, initial=_prepared_state(width, calib))
            bits = sample_bits(noisy, shots, rng)
            bits = apply_readout_flips(bits, calib, rng)
            outcomes = bits @ (1 << np.arange(width))
            hops.append(float(heavy[outcomes].mean()))
        if float(np.mean(hops)) > 2.0 / 3.0:
            passed = width
        else:
            break
    return 2**passed
