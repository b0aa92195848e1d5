"""Partitioned quantum neural network: encoding, ansatz, training, readout.

The model is an angle-encoded layered circuit (RY/RZ rotations plus a CNOT
ring per layer) whose qubits are split across selected devices. Each part
encodes its own feature slice, runs its slice of the trainable parameters
under that device's noise, and measures per-qubit <Z>; the concatenated
expectations feed a classical linear readout. Training is plain mini-batch
SGD with parameter-shift gradients for the circuit parameters and analytic
gradients for the readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mitigation import PecConfig, ZneConfig, pec_expectations, zne_expectations
from .sim import Circuit, Gate, run_circuit, z_expectations


class PartitioningError(ValueError):
    """Aggregate device capacity cannot execute the circuit."""


@dataclass
class Readout:
    """Linear map from concatenated expectations to class logits."""

    weights: np.ndarray  # (n_classes, n_qubits)
    bias: np.ndarray     # (n_classes,)

    def copy(self) -> "Readout":
        return Readout(self.weights.copy(), self.bias.copy())


@dataclass
class QnnModel:
    """Trainable circuit parameters plus the classical readout.

    ``params`` is flat with layout [layer][qubit][rotation], rotation 0 = RY
    and 1 = RZ, so its length is n_layers * n_qubits * 2.
    """

    n_qubits: int
    n_layers: int
    data_dim: int
    params: np.ndarray
    readout: Readout

    def __post_init__(self):
        expected = self.n_layers * self.n_qubits * 2
        if self.params.shape != (expected,):
            raise ValueError(f"params must have shape ({expected},)")
        if self.readout.weights.shape[1] != self.n_qubits:
            raise ValueError("readout width must equal the qubit count")

    @classmethod
    def init(cls, n_qubits: int, n_layers: int, n_classes: int, data_dim: int,
             seed: int) -> "QnnModel":
        rng = np.random.default_rng(seed)
        params = rng.uniform(-0.1, 0.1, size=n_layers * n_qubits * 2)
        weights = rng.normal(0.0, 0.5, size=(n_classes, n_qubits))
        bias = np.zeros(n_classes)
        return cls(n_qubits, n_layers, data_dim, params, Readout(weights, bias))

    @property
    def n_classes(self) -> int:
        return self.readout.weights.shape[0]

    def param_index(self, layer: int, qubit: int, rotation: int) -> int:
        return (layer * self.n_qubits + qubit) * 2 + rotation

    def copy(self) -> "QnnModel":
        return QnnModel(self.n_qubits, self.n_layers, self.data_dim,
                        self.params.copy(), self.readout.copy())


@dataclass(frozen=True)
class PartitionPart:
    device_id: str
    n_qubits: int
    feature_range: tuple[int, int]


@dataclass(frozen=True)
class PartitionPlan:
    """How the model's qubits and features are split across devices.

    Parts are ordered; part k covers the model qubits starting at the sum of
    the earlier parts' widths.
    """

    p_type: str
    parts: tuple[PartitionPart, ...]

    def __post_init__(self):
        if self.p_type not in ("SYM", "ASYM"):
            raise ValueError(f"p_type must be SYM or ASYM, got {self.p_type!r}")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def total_qubits(self) -> int:
        return sum(p.n_qubits for p in self.parts)

    def qubit_offset(self, part_index: int) -> int:
        return sum(p.n_qubits for p in self.parts[:part_index])

    def to_dict(self) -> dict:
        return {"p_type": self.p_type,
                "parts": [[p.device_id, p.n_qubits, list(p.feature_range)] for p in self.parts]}

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionPlan":
        parts = tuple(PartitionPart(x[0], int(x[1]), (int(x[2][0]), int(x[2][1]))) for x in d["parts"])
        return cls(d["p_type"], parts)


def _device_pairs(devices) -> list[tuple[str, int]]:
    pairs = []
    for d in devices:
        if isinstance(d, tuple):
            pairs.append((str(d[0]), int(d[1])))
        else:
            pairs.append((d.id, d.capacity))
    return sorted(pairs)


def _round_robin_counts(n: int, caps: list[int]) -> list[int]:
    """Counts as equal as possible subject to per-device caps; any remainder
    goes to earlier devices."""
    counts = [0] * len(caps)
    remaining = n
    while remaining > 0:
        progressed = False
        for i in range(len(caps)):
            if counts[i] < caps[i]:
                counts[i] += 1
                remaining -= 1
                progressed = True
                if remaining == 0:
                    break
        if not progressed:
            raise PartitioningError("insufficient aggregate capacity")
    return counts


def _largest_remainder(n: int, weights: list[float], caps: list[int] | None = None,
                       min_one: bool = False) -> list[int]:
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    counts = [int(math.floor(q)) for q in quotas]
    remainder = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    if caps is not None:
        for i in range(len(counts)):
            while counts[i] > caps[i]:
                counts[i] -= 1
                for j in range(len(counts)):
                    if counts[j] < caps[j]:
                        counts[j] += 1
                        break
    if min_one:
        for i in range(len(counts)):
            while counts[i] == 0:
                donor = max(range(len(counts)), key=lambda j: counts[j])
                if counts[donor] <= 1:
                    break
                counts[donor] -= 1
                counts[i] += 1
    return counts


def partition_circuit(model: QnnModel, devices, p_type: str) -> PartitionPlan:
    """Split the model across devices, symmetrically or capacity-proportionally.

    SYM gives each device an equal share (remainder to lexicographically
    earlier ids, capped at capacity); ASYM makes shares proportional to
    capacity with largest-remainder rounding, each at least one qubit.
    Devices that receive no qubits are dropped from the plan.
    """
    pairs = _device_pairs(devices)
    if not pairs:
        raise ValueError("no devices given")
    if p_type not in ("SYM", "ASYM"):
        raise ValueError(f"p_type must be SYM or ASYM, got {p_type!r}")
    caps = [c for _, c in pairs]
    if sum(caps) < model.n_qubits:
        raise PartitioningError(
            f"aggregate capacity {sum(caps)} cannot execute {model.n_qubits} qubits")
    if p_type == "SYM":
        counts = _round_robin_counts(model.n_qubits, caps)
    else:
        counts = _largest_remainder(model.n_qubits, [float(c) for c in caps],
                                    caps=caps, min_one=True)
    kept = [(pid, cnt) for (pid, _), cnt in zip(pairs, counts) if cnt > 0]
    feat_counts = _largest_remainder(model.data_dim, [float(c) for _, c in kept])
    parts = []
    lo = 0
    for (pid, cnt), fc in zip(kept, feat_counts):
        parts.append(PartitionPart(pid, cnt, (lo, lo + fc)))
        lo += fc
    return PartitionPlan(p_type, tuple(parts))


def single_device_plan(model: QnnModel, device_id: str = "local") -> PartitionPlan:
    """The trivial plan: the whole circuit on one device."""
    return PartitionPlan("SYM", (PartitionPart(device_id, model.n_qubits, (0, model.data_dim)),))


def build_part_circuit(model: QnnModel, plan: PartitionPlan, part_index: int,
                       features: np.ndarray, params: np.ndarray | None = None) -> Circuit:
    """The executable circuit of one part: encoding, then the trainable layers.

    The part's feature slice is encoded as RY rotations, folded round-robin
    over the part's qubits when the slice is wider than the part.
    """
    part = plan.parts[part_index]
    w = part.n_qubits
    theta = model.params if params is None else params
    offset = plan.qubit_offset(part_index)
    gates = []
    lo, hi = part.feature_range
    for i in range(lo, hi):
        gates.append(Gate("RY", ((i - lo) % w,), float(features[i])))
    for layer in range(model.n_layers):
        for q in range(w):
            base = model.param_index(layer, offset + q, 0)
            gates.append(Gate("RY", (q,), float(theta[base])))
            gates.append(Gate("RZ", (q,), float(theta[base + 1])))
        if w >= 2:
            for q in range(w):
                gates.append(Gate("CNOT", (q, (q + 1) % w)))
    return Circuit(w, tuple(gates))


def reconstruct(part_expectations) -> np.ndarray:
    """Merge per-part expectation vectors by concatenation in plan order."""
    return np.concatenate([np.asarray(v, dtype=float) for v in part_expectations])


def _part_expectations(circuit: Circuit, width: int, noise_model, mitigation) -> np.ndarray:
    qubits = range(width)
    if mitigation is None or noise_model is None:
        state = run_circuit(circuit, noise_model)
        return z_expectations(state, qubits)
    if isinstance(mitigation, ZneConfig):
        return zne_expectations(circuit, noise_model, qubits, mitigation)
    if isinstance(mitigation, PecConfig):
        return pec_expectations(circuit, noise_model, qubits, mitigation.n_samples, mitigation.seed)
    raise TypeError(f"unsupported mitigation config {type(mitigation).__name__}")


def _noise_for(noise_map, device_id: str):
    if noise_map is None:
        return None
    return noise_map.get(device_id)


@dataclass
class ForwardResult:
    expectations: np.ndarray
    logits: np.ndarray


def forward(model: QnnModel, plan: PartitionPlan, features: np.ndarray,
            noise_map: dict | None = None, mitigation=None,
            params: np.ndarray | None = None) -> ForwardResult:
    """Run every part, concatenate their <Z> vectors, apply the readout."""
    features = np.asarray(features, dtype=float)
    if features.shape != (model.data_dim,):
        raise ValueError(f"expected {model.data_dim} features, got {features.shape}")
    if plan.total_qubits != model.n_qubits:
        raise ValueError("plan width does not match the model")
    parts = []
    for k, part in enumerate(plan.parts):
        circuit = build_part_circuit(model, plan, k, features, params)
        parts.append(_part_expectations(circuit, part.n_qubits,
                                        _noise_for(noise_map, part.device_id), mitigation))
    expectations = reconstruct(parts)
    logits = model.readout.weights @ expectations + model.readout.bias
    return ForwardResult(expectations, logits)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def loss(logits: np.ndarray, label: int) -> float:
    """Softmax cross-entropy; zero iff the true class has probability one."""
    if not 0 <= label < len(logits):
        raise ValueError(f"label {label} out of range for {len(logits)} classes")
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def loss_gradient(logits: np.ndarray, label: int) -> np.ndarray:
    """d loss / d logits = softmax(logits) - onehot(label)."""
    if not 0 <= label < len(logits):
        raise ValueError(f"label {label} out of range for {len(logits)} classes")
    g = _softmax(logits)
    g[label] -= 1.0
    return g


@dataclass
class Gradients:
    theta: np.ndarray
    readout_weights: np.ndarray
    readout_bias: np.ndarray
    mean_loss: float


def parameter_shift_grad(model: QnnModel, plan: PartitionPlan, features_batch,
                         labels_batch, noise_map: dict | None = None,
                         mitigation=None) -> Gradients:
    """Batch-mean gradients: parameter shift (+-pi/2) for circuit parameters,
    chain rule through the readout, analytic readout gradients.

    With mitigation configured, every expectation entering the forward and
    shifted evaluations is the mitigated estimate.
    """
    features_batch = np.asarray(features_batch, dtype=float)
    labels_batch = np.asarray(labels_batch)
    if len(features_batch) == 0:
        raise ValueError("batch is empty")
    g_theta = np.zeros_like(model.params)
    g_w = np.zeros_like(model.readout.weights)
    g_b = np.zeros_like(model.readout.bias)
    total_loss = 0.0
    w_mat = model.readout.weights
    for x, y in zip(features_batch, labels_batch):
        base_parts = []
        for k, part in enumerate(plan.parts):
            circuit = build_part_circuit(model, plan, k, x)
            base_parts.append(_part_expectations(circuit, part.n_qubits,
                                                 _noise_for(noise_map, part.device_id), mitigation))
        expectations = reconstruct(base_parts)
        logits = w_mat @ expectations + model.readout.bias
        total_loss += loss(logits, int(y))
        dlogits = loss_gradient(logits, int(y))
        d_expect = w_mat.T @ dlogits
        g_w += np.outer(dlogits, expectations)
        g_b += dlogits
        for k, part in enumerate(plan.parts):
            offset = plan.qubit_offset(k)
            noise_model = _noise_for(noise_map, part.device_id)
            slice_grad = d_expect[offset:offset + part.n_qubits]
            for layer in range(model.n_layers):
                for q in range(part.n_qubits):
                    for rot in range(2):
                        idx = model.param_index(layer, offset + q, rot)
                        shifted = model.params.copy()
                        shifted[idx] += math.pi / 2
                        plus = _part_expectations(
                            build_part_circuit(model, plan, k, x, shifted),
                            part.n_qubits, noise_model, mitigation)
                        shifted[idx] -= math.pi
                        minus = _part_expectations(
                            build_part_circuit(model, plan, k, x, shifted),
                            part.n_qubits, noise_model, mitigation)
                        g_theta[idx] += float(slice_grad @ ((plus - minus) / 2.0))
    n = len(features_batch)
    return Gradients(g_theta / n, g_w / n, g_b / n, total_loss / n)


def train_local(model: QnnModel, plan: PartitionPlan, features, labels,
                epochs: int, lr: float, noise_map: dict | None = None,
                mitigation=None, seed: int = 0,
                batch_size: int = 16) -> tuple[QnnModel, list[float]]:
    """Mini-batch SGD on a local dataset; returns the trained copy and the
    per-epoch mean loss. Deterministic for a fixed seed."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if len(features) == 0:
        raise ValueError("dataset is empty")
    model = model.copy()
    rng = np.random.default_rng(seed)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(features))
        batch_losses = []
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            grads = parameter_shift_grad(model, plan, features[idx], labels[idx],
                                         noise_map, mitigation)
            model.params -= lr * grads.theta
            model.readout.weights -= lr * grads.readout_weights
            model.readout.bias -= lr * grads.readout_bias
            batch_losses.append(grads.mean_loss)
        losses.append(float(np.mean(batch_losses)))
    return model, losses


def model_to_dict(model: QnnModel, plan: PartitionPlan | None = None) -> dict:
    doc = {
        "n_qubits": model.n_qubits,
        "n_layers": model.n_layers,
        "data_dim": model.data_dim,
        "params": model.params.tolist(),
        "readout_weights": model.readout.weights.tolist(),
        "readout_bias": model.readout.bias.tolist(),
    }
    if plan is not None:
        doc["plan"] = plan.to_dict()
    return doc


def model_from_dict(doc: dict) -> tuple[QnnModel, PartitionPlan | None]:
    model = QnnModel(
        n_qubits=int(doc["n_qubits"]),
        n_layers=int(doc["n_layers"]),
        data_dim=int(doc["data_dim"]),
        params=np.array(doc["params"], dtype=float),
        readout=Readout(np.array(doc["readout_weights"], dtype=float),
                        np.array(doc["readout_bias"], dtype=float)),
    )
    plan = PartitionPlan.from_dict(doc["plan"]) if "plan" in doc else None
    return model, plan
