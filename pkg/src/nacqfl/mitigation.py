"""Error-mitigated expectation estimation: ZNE via circuit folding and PEC
via quasi-probability inversion of Pauli noise.

ZNE measures the same circuit at odd noise-scale factors c >= 1, realized by
replacing every gate G with G (G^dag G)^((c-1)/2), and extrapolates to c = 0.
PEC represents the inverse of each gate's Pauli noise as a signed mixture of
Pauli operations, samples from it, and reweights by the total gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import pauli_probs
from .sim import Circuit, DensityMatrix, Gate, KrausChannel, Observable, apply_channel, apply_gate, run_circuit, z_expectations, zero_state

_PAULI_GATES = (None, "X", "Y", "Z")


@dataclass(frozen=True)
class ZneConfig:
    """Noise-scale factors (odd integers, first 1) and extrapolation method."""

    scale_factors: tuple[int, ...] = (1, 3, 5)
    method: str = "linear"

    def __post_init__(self):
        scales = tuple(self.scale_factors)
        if len(scales) < 2:
            raise ValueError("need at least two scale factors")
        if scales[0] != 1:
            raise ValueError("first scale factor must be 1")
        if any(s != int(s) or int(s) % 2 == 0 or s < 1 for s in scales):
            raise ValueError("scale factors must be odd positive integers")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scale factors must be strictly increasing")
        if self.method not in ("linear", "richardson", "exponential"):
            raise ValueError(f"unknown extrapolation method {self.method!r}")
        object.__setattr__(self, "scale_factors", scales)


@dataclass(frozen=True)
class PecConfig:
    """Sampling budget for quasi-probability cancellation during training."""

    n_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def fold_circuit(circuit: Circuit, scale: int) -> Circuit:
    """Replace every gate G by G (G^dag G)^((scale-1)/2); ideal semantics
    unchanged, noisy gate count multiplied by ``scale``."""
    if scale != int(scale) or scale < 1 or int(scale) % 2 == 0:
        raise ValueError(f"scale must be an odd positive integer, got {scale}")
    scale = int(scale)
    if scale == 1:
        return circuit
    reps = (scale - 1) // 2
    gates = []
    for g in circuit.gates:
        gates.append(g)
        inv = g.inverse()
        for _ in range(reps):
            gates.append(inv)
            gates.append(g)
    return Circuit(circuit.n_qubits, tuple(gates))


def zne_estimate(points, method: str = "linear") -> float:
    """Extrapolate (scale, value) pairs to zero noise; clamped to [-1, 1]."""
    points = list(points)
    if len(points) < 2:
        raise ValueError("need at least two points")
    x = np.array([float(p[0]) for p in points])
    y = np.array([float(p[1]) for p in points])
    if len(set(x.tolist())) != len(x):
        raise ValueError("scale factors must be distinct")
    if method == "linear":
        slope, intercept = np.polyfit(x, y, 1)
        est = intercept
    elif method == "richardson":
        est = 0.0
        for i in range(len(x)):
            term = y[i]
            for j in range(len(x)):
                if j != i:
                    term *= x[j] / (x[j] - x[i])
            est += term
    elif method == "exponential":
        signs = np.sign(y)
        if np.any(y == 0) or len(set(signs.tolist())) != 1:
            raise ValueError("exponential fit needs nonzero, same-sign values")
        slope, intercept = np.polyfit(x, np.log(np.abs(y)), 1)
        est = signs[0] * math.exp(intercept)
    else:
        raise ValueError(f"unknown extrapolation method {method!r}")
    return float(np.clip(est, -1.0, 1.0))


def zne_expectations(circuit: Circuit, noise_model, qubits, config: ZneConfig) -> np.ndarray:
    """Zero-noise extrapolated <Z_q> for each qubit in ``qubits``."""
    values = []
    for c in config.scale_factors:
        state = run_circuit(fold_circuit(circuit, c), noise_model)
        values.append(z_expectations(state, qubits))
    values = np.array(values)  # (n_scales, n_qubits)
    return np.array([
        zne_estimate(zip(config.scale_factors, values[:, k]), config.method)
        for k in range(values.shape[1])
    ])


@dataclass(frozen=True)
class PecRepresentation:
    """Signed Pauli mixture implementing the inverse of a Pauli channel."""

    quasi_probs: tuple[float, float, float, float]  # (eta_I, eta_X, eta_Y, eta_Z)
    gamma: float


def pec_representation(noise) -> PecRepresentation:
    """Invert a Pauli channel in its transfer representation.

    Accepts a Pauli-type ``KrausChannel`` or a raw (px, py, pz) triple. The
    Bloch components contract by fx = 1-2(py+pz), fy = 1-2(px+pz),
    fz = 1-2(px+py); the inverse exists when all three are positive.
    """
    if isinstance(noise, KrausChannel):
        triple = pauli_probs(noise)
        if triple is None:
            raise ValueError(f"channel {noise.label} is not a Pauli channel")
    else:
        triple = tuple(noise)
    px, py, pz = triple
    fx = 1.0 - 2.0 * (py + pz)
    fy = 1.0 - 2.0 * (px + pz)
    fz = 1.0 - 2.0 * (px + py)
    if min(fx, fy, fz) <= 0:
        raise ValueError(f"Pauli channel {triple} is not invertible")
    target = np.array([1.0, 1.0 / fx, 1.0 / fy, 1.0 / fz])
    # eigenvalue map of a Pauli mixture (eta_I, eta_X, eta_Y, eta_Z); the
    # matrix is 2x a Hadamard-type involution, so its inverse is itself / 4.
    m = np.array([
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ], dtype=float)
    eta = m @ target / 4.0
    return PecRepresentation(tuple(float(v) for v in eta), float(np.abs(eta).sum()))


def quasi_channel_matrices(rep: PecRepresentation) -> list[tuple[float, np.ndarray]]:
    """(weight, conjugation matrix) pairs of the inverse map, for composition checks."""
    from .sim import PAULI_MATRICES

    mats = [PAULI_MATRICES["I"], PAULI_MATRICES["X"], PAULI_MATRICES["Y"], PAULI_MATRICES["Z"]]
    return [(rep.quasi_probs[i], mats[i]) for i in range(4)]


@dataclass(frozen=True)
class PecResult:
    estimate: float
    std_error: float
    gamma: float
    n_samples: int


def _insertion_points(circuit: Circuit, noise_model):
    """Fixed (gate index, target, representation) sequence for a noisy circuit."""
    points = []
    for gi, gate in enumerate(circuit.gates):
        for channel, targets in noise_model.channels_for(gate):
            if len(targets) != 1:
                raise ValueError("quasi-probability cancellation supports single-qubit noise only")
            points.append((gi, targets[0], pec_representation(channel)))
    return points


def _measurement_rotations(observable: Observable) -> list[Gate]:
    gates = []
    for q, c in enumerate(observable.pauli_string):
        if c == "X":
            gates.append(Gate("H", (q,)))
        elif c == "Y":
            gates.append(Gate("RZ", (q,), -math.pi / 2))
            gates.append(Gate("H", (q,)))
    return gates


def _run_with_insertions(circuit: Circuit, noise_model, points, choices) -> tuple[DensityMatrix, float]:
    state = zero_state(circuit.n_qubits)
    sign = 1.0
    pi = 0
    for gi, gate in enumerate(circuit.gates):
        state = apply_gate(state, gate)
        for channel, targets in noise_model.channels_for(gate):
            state = apply_channel(state, channel, targets)
            _, target, rep = points[pi]
            k = int(choices[pi])
            if rep.quasi_probs[k] < 0:
                sign = -sign
            if k > 0:
                state = apply_gate(state, Gate(_PAULI_GATES[k], (target,)))
            pi += 1
    return state, sign


def _sample_choices(points, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    choices = np.zeros((n_samples, len(points)), dtype=np.int64)
    for j, (_, _, rep) in enumerate(points):
        probs = np.abs(rep.quasi_probs) / rep.gamma
        choices[:, j] = rng.choice(4, size=n_samples, p=probs)
    return choices


def pec_estimate(circuit: Circuit, noise_model, observable: Observable,
                 n_samples: int, seed: int) -> PecResult:
    """Monte-Carlo quasi-probability estimate of the noiseless expectation.

    Each sample runs the noisy circuit with one sampled Pauli inserted after
    every noisy gate, then draws a single measurement shot of the observable;
    the estimate is gamma^G times the signed sample mean. Unbiased, with
    variance growing as gamma^(2G). Deterministic for a fixed seed.
    """
    if observable.n_qubits != circuit.n_qubits:
        raise ValueError("observable length must match the circuit")
    rng = np.random.default_rng(seed)
    points = _insertion_points(circuit, noise_model)
    gamma_tot = float(np.prod([rep.gamma for _, _, rep in points])) if points else 1.0
    choices = _sample_choices(points, n_samples, rng)
    rotations = _measurement_rotations(observable)
    mask = np.array([c != "I" for c in observable.pauli_string])
    vals = np.empty(n_samples)
    for s in range(n_samples):
        state, sign = _run_with_insertions(circuit, noise_model, points, choices[s])
        for g in rotations:
            state = apply_gate(state, g)
        probs = np.clip(np.real(np.diag(state.data)), 0.0, None)
        probs /= probs.sum()
        outcome = rng.choice(state.dim, p=probs)
        bits = (outcome >> np.arange(circuit.n_qubits)) & 1
        parity = int(bits[mask].sum()) % 2
        vals[s] = sign * (1.0 - 2.0 * parity)
    estimate = gamma_tot * float(vals.mean())
    stderr = gamma_tot * float(vals.std(ddof=1)) / math.sqrt(n_samples) if n_samples > 1 else float("inf")
    return PecResult(estimate, stderr, gamma_tot, n_samples)


def pec_expectations(circuit: Circuit, noise_model, qubits, n_samples: int, seed: int) -> np.ndarray:
    """PEC estimates of <Z_q> for each qubit, sharing one sample stream.

    A single measurement shot yields every qubit's Z eigenvalue at once, so
    all requested expectations reuse the same circuit executions.
    """
    rng = np.random.default_rng(seed)
    points = _insertion_points(circuit, noise_model)
    gamma_tot = float(np.prod([rep.gamma for _, _, rep in points])) if points else 1.0
    choices = _sample_choices(points, n_samples, rng)
    qubits = list(qubits)
    vals = np.empty((n_samples, len(qubits)))
    for s in range(n_samples):
        state, sign = _run_with_insertions(circuit, noise_model, points, choices[s])
        probs = np.clip(np.real(np.diag(state.data)), 0.0, None)
        probs /= probs.sum()
        outcome = rng.choice(state.dim, p=probs)
        for k, q in enumerate(qubits):
            vals[s, k] = sign * (1.0 - 2.0 * ((outcome >> q) & 1))
    return gamma_tot * vals.mean(axis=0)


def benchmark_circuit(n_qubits: int, n_layers: int, seed: int) -> Circuit:
    """Randomized layered rotation + CNOT-ring circuit used by the
    mitigation benchmarks."""
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(n_layers):
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), float(rng.uniform(0, 2 * np.pi))))
            gates.append(Gate("RZ", (q,), float(rng.uniform(0, 2 * np.pi))))
        if n_qubits >= 2:
            for q in range(n_qubits):
                gates.append(Gate("CNOT", (q, (q + 1) % n_qubits)))
    return Circuit(n_qubits, tuple(gates))
