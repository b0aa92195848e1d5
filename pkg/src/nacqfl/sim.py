"""Minimal density-matrix simulator: states, gates, Kraus channels, sampling.

Conventions used throughout the package:

* Qubit ``q`` is bit ``q`` of the computational-basis index (qubit 0 is the
  least-significant bit).
* Bitstrings are printed most-significant qubit first, i.e. ``format(i, "0nb")``,
  so qubit 0 is the rightmost character.
* States are immutable by contract: every operation returns a new
  ``DensityMatrix`` and never mutates its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend

MAX_QUBITS = 12

_CPTP_ATOL = 1e-10


class CapacityError(ValueError):
    """Requested system size is outside the supported qubit range."""


_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

# 4x4 operator basis index is bit(targets[1])*2 + bit(targets[0]); for CNOT
# targets are (control, target), so the control is the LSB of the operator.
_CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0],
     [0, 1, 0, 0]],
    dtype=complex,
)

PAULI_MATRICES = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}

GATE_ARITY = {"X": 1, "Y": 1, "Z": 1, "H": 1, "RX": 1, "RY": 1, "RZ": 1, "CNOT": 2}
ROTATION_GATES = frozenset({"RX", "RY", "RZ"})


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    """A named gate on explicit target qubits.

    ``targets`` for CNOT are ``(control, target)``. Rotation gates carry an
    angle in radians; all other gates must not.
    """

    name: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.name not in GATE_ARITY:
            raise ValueError(f"unknown gate {self.name!r}")
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.targets) != GATE_ARITY[self.name]:
            raise ValueError(f"{self.name} expects {GATE_ARITY[self.name]} target(s)")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("gate targets must be distinct")
        if any(t < 0 for t in self.targets):
            raise ValueError("gate targets must be non-negative")
        if (self.name in ROTATION_GATES) != (self.angle is not None):
            raise ValueError(f"angle is required exactly for rotation gates, got {self.name}")

    def matrix(self) -> np.ndarray:
        if self.name == "RX":
            return _rx(self.angle)
        if self.name == "RY":
            return _ry(self.angle)
        if self.name == "RZ":
            return _rz(self.angle)
        if self.name == "CNOT":
            return _CNOT
        return PAULI_MATRICES[self.name] if self.name != "H" else _H

    def inverse(self) -> "Gate":
        if self.name in ROTATION_GATES:
            return Gate(self.name, self.targets, -self.angle)
        return self  # X, Y, Z, H, CNOT are involutions


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list on a fixed number of qubits."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise ValueError(f"gate {g.name} targets {g.targets} exceed {self.n_qubits} qubits")


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by its operator-sum form ``rho -> sum_i A_i rho A_i^dagger``.

    Completeness ``sum_i A_i^dagger A_i = I`` is enforced at construction, so
    application sites never re-validate.
    """

    operators: tuple[np.ndarray, ...]
    kind: str = "custom"
    param: float | tuple | None = None

    def __post_init__(self):
        ops = tuple(np.asarray(a, dtype=complex) for a in self.operators)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if dim < 2 or (dim & (dim - 1)) != 0:
            raise ValueError("Kraus operators must be 2^k x 2^k")
        for a in ops:
            if a.shape != (dim, dim):
                raise ValueError("all Kraus operators must share one shape")
        k = dim.bit_length() - 1
        if len(ops) > 4**k:
            raise ValueError(f"at most {4**k} Kraus operators for {k} qubit(s)")
        total = sum(a.conj().T @ a for a in ops)
        if not np.allclose(total, np.eye(dim), atol=_CPTP_ATOL):
            raise ValueError("channel is not trace preserving (sum A_i^dag A_i != I)")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "_op_array", np.ascontiguousarray(np.stack(ops)))

    @property
    def n_qubits(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1

    @property
    def op_array(self) -> np.ndarray:
        """Operators stacked as one contiguous (k, dim, dim) array for the kernels."""
        return self._op_array

    @property
    def label(self) -> str:
        return f"{self.kind}({self.param})"


@dataclass(frozen=True)
class Observable:
    """A Pauli-string observable, one letter in {I, X, Y, Z} per qubit.

    ``pauli_string[q]`` acts on qubit q.
    """

    pauli_string: str

    def __post_init__(self):
        if not self.pauli_string or any(c not in "IXYZ" for c in self.pauli_string):
            raise ValueError("pauli_string must be a nonempty word over I, X, Y, Z")

    @property
    def n_qubits(self) -> int:
        return len(self.pauli_string)


@dataclass(frozen=True)
class DensityMatrix:
    """The quantum state rho: a 2^n x 2^n complex matrix with unit trace."""

    n_qubits: int
    data: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))


def zero_state(n_qubits: int) -> DensityMatrix:
    """|0...0><0...0| on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    data = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
    data[0, 0] = 1.0
    return DensityMatrix(n_qubits, data)


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    dim = 1 << n_qubits
    return DensityMatrix(n_qubits, np.eye(dim, dtype=complex) / dim)


def _check_targets(state: DensityMatrix, targets: tuple[int, ...]):
    for t in targets:
        if not 0 <= t < state.n_qubits:
            raise ValueError(f"target qubit {t} out of range for {state.n_qubits} qubits")


def _apply_operators(state: DensityMatrix, ops: np.ndarray, targets: tuple[int, ...]) -> DensityMatrix:
    out = np.zeros_like(state.data)
    if len(targets) == 1:
        backend.apply_kraus_1q(state.data, ops, targets[0], out)
    else:
        backend.apply_kraus_2q(state.data, ops, targets[0], targets[1], out)
    return DensityMatrix(state.n_qubits, out)


def apply_gate(state: DensityMatrix, gate: Gate) -> DensityMatrix:
    """rho -> U rho U^dagger with U embedded on the gate's targets."""
    _check_targets(state, gate.targets)
    m = gate.matrix()
    return _apply_operators(state, m.reshape(1, *m.shape), gate.targets)


def apply_channel(state: DensityMatrix, channel: KrausChannel, targets: tuple[int, ...]) -> DensityMatrix:
    """rho -> sum_i A_i rho A_i^dagger with operators embedded on ``targets``."""
    targets = tuple(targets)
    if len(targets) != channel.n_qubits:
        raise ValueError(f"channel acts on {channel.n_qubits} qubit(s), got {len(targets)} target(s)")
    if len(set(targets)) != len(targets):
        raise ValueError("channel targets must be distinct")
    _check_targets(state, targets)
    return _apply_operators(state, channel.op_array, targets)


def run_circuit(circuit: Circuit, noise_model=None, initial: DensityMatrix | None = None) -> DensityMatrix:
    """Execute all gates in order; ``noise_model.channels_for(gate)`` (if given)
    yields (channel, targets) pairs appended after each ideal gate."""
    state = initial if initial is not None else zero_state(circuit.n_qubits)
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("initial state size does not match circuit")
    for gate in circuit.gates:
        state = apply_gate(state, gate)
        if noise_model is not None:
            for channel, targets in noise_model.channels_for(gate):
                state = apply_channel(state, channel, targets)
    return state


def _diag_probs(state: DensityMatrix) -> np.ndarray:
    probs = np.clip(np.real(np.diag(state.data)), 0.0, None)
    total = probs.sum()
    if total <= 0:
        raise ValueError("state has no probability mass on the diagonal")
    return probs / total


def z_expectations(state: DensityMatrix, qubits) -> np.ndarray:
    """<Z_q> for each qubit in ``qubits``, read off the diagonal."""
    probs = np.real(np.diag(state.data))
    idx = np.arange(state.dim)
    out = np.empty(len(qubits))
    for i, q in enumerate(qubits):
        signs = 1.0 - 2.0 * ((idx >> q) & 1)
        out[i] = float(probs @ signs)
    return out


def expectation(state: DensityMatrix, obs: Observable) -> float:
    """Tr(rho P) for the Pauli string P; the (tiny) imaginary part is discarded."""
    if obs.n_qubits != state.n_qubits:
        raise ValueError("observable length must equal the qubit count")
    letters = obs.pauli_string
    if set(letters) <= {"I", "Z"}:
        zq = [q for q, c in enumerate(letters) if c == "Z"]
        if not zq:
            return float(np.real(np.trace(state.data)))
        probs = np.real(np.diag(state.data))
        idx = np.arange(state.dim)
        signs = np.ones(state.dim)
        for q in zq:
            signs *= 1.0 - 2.0 * ((idx >> q) & 1)
        return float(probs @ signs)
    n = state.n_qubits
    t = state.data.reshape((2,) * (2 * n))
    for q, c in enumerate(letters):
        if c == "I":
            continue
        col_ax = 2 * n - 1 - q
        t = np.tensordot(t, PAULI_MATRICES[c], axes=([col_ax], [0]))
        t = np.moveaxis(t, -1, col_ax)
    m = t.reshape(state.dim, state.dim)
    return float(np.real(np.trace(m)))


def sample_counts(state: DensityMatrix, shots: int, seed: int) -> dict[str, int]:
    """Sample computational-basis outcomes from the diagonal of rho.

    Deterministic for a fixed seed. Keys are bitstrings with qubit 0 as the
    rightmost character; only outcomes with nonzero counts appear.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = _diag_probs(state)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    n = state.n_qubits
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c > 0}


def sample_bits(state: DensityMatrix, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``shots`` outcomes, returned as a (shots, n_qubits) bit array
    with column q holding qubit q."""
    probs = _diag_probs(state)
    idx = rng.choice(state.dim, size=shots, p=probs)
    qs = np.arange(state.n_qubits)
    return ((idx[:, None] >> qs[None, :]) & 1).astype(np.uint8)


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, clipped to [0, 1]."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("states must have equal dimension")
    wa, va = np.linalg.eigh(a.data)
    wa = np.clip(wa, 0.0, None)
    sqrt_a = (va * np.sqrt(wa)) @ va.conj().T
    m = sqrt_a @ b.data @ sqrt_a
    w = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    return float(min(1.0, np.sqrt(w).sum() ** 2))


def embed_operator(op: np.ndarray, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Embed a 1- or 2-qubit operator into the full 2^n space (test oracle;
    the kernels never build these matrices)."""
    op = np.asarray(op, dtype=complex)
    dim = 1 << n_qubits
    k = len(targets)
    full = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bits_i = [(i >> q) & 1 for q in range(n_qubits)]
        row = sum(bits_i[targets[t]] << t for t in range(k))
        for col in range(1 << k):
            j_bits = list(bits_i)
            for t in range(k):
                j_bits[targets[t]] = (col >> t) & 1
            j = sum(b << q for q, b in enumerate(j_bits))
            full[i, j] = op[row, col]
    return full
