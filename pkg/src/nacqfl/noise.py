"""Noise channels, device calibration data, and the effective-noise score.

The calibration-driven score aggregates five error families (coherence
times, single-qubit gate errors, two-qubit gate errors, readout errors,
state-preparation errors) into one weighted scalar used to rank devices:
higher always means noisier. The coherence term enters as
``1 - T_sum / T_sum_max`` so that long-lived qubits lower the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim import GATE_ARITY, Gate, KrausChannel

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class CalibrationError(ValueError):
    """Calibration data is missing an entry or violates a physical bound."""


def _check_prob(p: float, what: str = "p"):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{what} must be in [0, 1], got {p}")


def make_bit_flip(p: float) -> KrausChannel:
    """X error with probability p: (1-p) rho + p X rho X."""
    _check_prob(p)
    return KrausChannel((math.sqrt(1 - p) * _I2, math.sqrt(p) * _X), kind="bit_flip", param=p)


def make_phase_flip(p: float) -> KrausChannel:
    """Z error with probability p: (1-p) rho + p Z rho Z."""
    _check_prob(p)
    return KrausChannel((math.sqrt(1 - p) * _I2, math.sqrt(p) * _Z), kind="phase_flip", param=p)


def make_depolarizing(p: float) -> KrausChannel:
    """(1 - 3p/4) rho + (p/4)(X rho X + Y rho Y + Z rho Z)."""
    _check_prob(p)
    ops = (
        math.sqrt(1 - 0.75 * p) * _I2,
        math.sqrt(p / 4) * _X,
        math.sqrt(p / 4) * _Y,
        math.sqrt(p / 4) * _Z,
    )
    return KrausChannel(ops, kind="depolarizing", param=p)


def make_amplitude_damping(p: float) -> KrausChannel:
    """Excited-state decay: K0 = diag(1, sqrt(1-p)), K1 = sqrt(p) |0><1|."""
    _check_prob(p)
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1), kind="amplitude_damping", param=p)


def make_phase_damping(p: float) -> KrausChannel:
    """Pure dephasing: K0 = diag(1, sqrt(1-p)), K1 = diag(0, sqrt(p))."""
    _check_prob(p)
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, 0], [0, math.sqrt(p)]], dtype=complex)
    return KrausChannel((k0, k1), kind="phase_damping", param=p)


def make_pauli(px: float, py: float, pz: float) -> KrausChannel:
    """General Pauli channel; the identity keeps weight 1 - px - py - pz."""
    for v, name in ((px, "px"), (py, "py"), (pz, "pz")):
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")
    total = px + py + pz
    if total > 1.0 + 1e-12:
        raise ValueError(f"px + py + pz must be <= 1, got {total}")
    ops = (
        math.sqrt(max(0.0, 1 - total)) * _I2,
        math.sqrt(px) * _X,
        math.sqrt(py) * _Y,
        math.sqrt(pz) * _Z,
    )
    return KrausChannel(ops, kind="pauli", param=(px, py, pz))


CHANNEL_FACTORIES = {
    "bitflip": make_bit_flip,
    "phaseflip": make_phase_flip,
    "depolarizing": make_depolarizing,
    "ampdamp": make_amplitude_damping,
}


def compose_single_qubit_channels(channels) -> KrausChannel:
    """Fuse sequentially applied 1-qubit channels into one channel.

    Works in the superoperator picture (row-major vec, S = sum_i A_i (x)
    conj(A_i)), multiplies the maps in application order, and recovers a
    minimal Kraus set (<= 4 operators) from the Choi matrix. Cuts the
    per-gate kernel work roughly in half for calibration noise.
    """
    channels = list(channels)
    if not channels:
        raise ValueError("nothing to compose")
    if any(c.n_qubits != 1 for c in channels):
        raise ValueError("composition supports single-qubit channels only")
    if len(channels) == 1:
        return channels[0]
    s_tot = np.eye(4, dtype=complex)
    for ch in channels:
        s = sum(np.kron(a, a.conj()) for a in ch.operators)
        s_tot = s @ s_tot
    choi = s_tot.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    vals, vecs = np.linalg.eigh(choi)
    ops = [
        math.sqrt(v) * vecs[:, i].reshape(2, 2)
        for i, v in enumerate(np.clip(vals, 0.0, None)) if v > 1e-14
    ]
    return KrausChannel(tuple(ops), kind="composed",
                        param=tuple(c.label for c in channels))


def pauli_probs(channel: KrausChannel) -> tuple[float, float, float] | None:
    """(px, py, pz) if the channel is a Pauli channel, else None."""
    if channel.kind == "bit_flip":
        return (channel.param, 0.0, 0.0)
    if channel.kind == "phase_flip":
        return (0.0, 0.0, channel.param)
    if channel.kind == "depolarizing":
        p = channel.param
        return (p / 4, p / 4, p / 4)
    if channel.kind == "pauli":
        return tuple(channel.param)
    return None


@dataclass(frozen=True)
class CalibrationData:
    """Per-qubit and per-gate calibration parameters of one device.

    Times are microseconds, gate durations nanoseconds, errors raw
    probabilities. ``two_gate_err`` maps a gate name to explicit ordered
    qubit pairs; the stored pairs are the device's coupling map and define
    the two-qubit error sum.
    """

    t1: tuple[float, ...]
    t2: tuple[float, ...]
    single_gate_err: dict[str, tuple[float, ...]]
    two_gate_err: dict[str, dict[tuple[int, int], float]]
    readout_err: tuple[float, ...]
    prep01: tuple[float, ...]
    prep10: tuple[float, ...]
    gate_duration: dict[str, float]

    def __post_init__(self):
        n = len(self.t1)
        if n == 0:
            raise CalibrationError("empty calibration")
        for name, vec in (("t2", self.t2), ("readout_err", self.readout_err),
                          ("prep01", self.prep01), ("prep10", self.prep10)):
            if len(vec) != n:
                raise CalibrationError(f"{name} must have one entry per qubit")
        for t1j, t2j in zip(self.t1, self.t2):
            if t1j <= 0 or t2j <= 0:
                raise CalibrationError("coherence times must be positive")
            if t2j > 2 * t1j + 1e-9:
                raise CalibrationError(f"T2={t2j} exceeds 2*T1={2 * t1j}")
        for gate, vec in self.single_gate_err.items():
            if len(vec) != n:
                raise CalibrationError(f"single_gate_err[{gate}] must have one entry per qubit")
            for p in vec:
                if not 0.0 <= p <= 1.0:
                    raise CalibrationError(f"single_gate_err[{gate}] must be in [0, 1], got {p}")
        for gate, pairs in self.two_gate_err.items():
            for (a, b), p in pairs.items():
                if not (0 <= a < n and 0 <= b < n and a != b):
                    raise CalibrationError(f"two_gate_err[{gate}] pair ({a},{b}) out of range")
                if not 0.0 <= p <= 1.0:
                    raise CalibrationError(f"two_gate_err[{gate}][{a},{b}] must be in [0, 1], got {p}")
        for p in (*self.readout_err, *self.prep01, *self.prep10):
            if not 0.0 <= p <= 1.0:
                raise CalibrationError(f"error probability must be in [0, 1], got {p}")
        for gate, d in self.gate_duration.items():
            if d < 0:
                raise CalibrationError(f"gate_duration[{gate}] must be >= 0")

    @property
    def n_qubits(self) -> int:
        return len(self.t1)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationData":
        two = {
            gate: {tuple(int(x) for x in key.split("-")): float(v) for key, v in pairs.items()}
            for gate, pairs in d.get("two_gate_err", {}).items()
        }
        return cls(
            t1=tuple(float(x) for x in d["t1"]),
            t2=tuple(float(x) for x in d["t2"]),
            single_gate_err={g: tuple(float(x) for x in v) for g, v in d.get("single_gate_err", {}).items()},
            two_gate_err=two,
            readout_err=tuple(float(x) for x in d["readout_err"]),
            prep01=tuple(float(x) for x in d["prep01"]),
            prep10=tuple(float(x) for x in d["prep10"]),
            gate_duration={g: float(v) for g, v in d.get("gate_duration", {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "t1": list(self.t1),
            "t2": list(self.t2),
            "single_gate_err": {g: list(v) for g, v in self.single_gate_err.items()},
            "two_gate_err": {
                g: {f"{a}-{b}": v for (a, b), v in pairs.items()}
                for g, pairs in self.two_gate_err.items()
            },
            "readout_err": list(self.readout_err),
            "prep01": list(self.prep01),
            "prep10": list(self.prep10),
            "gate_duration": dict(self.gate_duration),
        }


@dataclass(frozen=True)
class NoiseWeights:
    """Weights for the five error aggregates; normalized to sum 1 before use."""

    w1: float = 0.2
    w2: float = 0.1
    w3: float = 0.4
    w4: float = 0.2
    w5: float = 0.1

    def __post_init__(self):
        vals = self.as_tuple()
        if any(w < 0 for w in vals):
            raise ValueError("weights must be non-negative")
        if sum(vals) <= 0:
            raise ValueError("at least one weight must be positive")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5)

    def normalized(self) -> tuple[float, ...]:
        vals = self.as_tuple()
        s = sum(vals)
        return tuple(w / s for w in vals)


DEFAULT_WEIGHTS = NoiseWeights()


def coherence_sum(calib: CalibrationData) -> float:
    """Raw aggregated coherence: sum of T1 plus sum of T2 (microseconds)."""
    return float(sum(calib.t1) + sum(calib.t2))


def single_gate_error_sum(calib: CalibrationData) -> float:
    return float(sum(sum(vec) for vec in calib.single_gate_err.values()))


def two_gate_error_sum(calib: CalibrationData) -> float:
    return float(sum(sum(pairs.values()) for pairs in calib.two_gate_err.values()))


def readout_error_sum(calib: CalibrationData) -> float:
    return float(sum(calib.readout_err))


def prep_error_sum(calib: CalibrationData) -> float:
    return float(sum(calib.prep01) + sum(calib.prep10))


@dataclass(frozen=True)
class FleetNorms:
    """Per-component normalizers (fleet maxima) for the effective-noise score.

    Error normalizers default to 1 so that raw probability sums pass through
    unchanged; ``from_fleet`` replaces them with fleet-wide maxima.
    """

    t_eff_max: float
    g1_max: float = 1.0
    g2_max: float = 1.0
    readout_max: float = 1.0
    prep_max: float = 1.0

    def __post_init__(self):
        if self.t_eff_max <= 0:
            raise ValueError("t_eff_max must be positive")

    @classmethod
    def from_fleet(cls, calibs) -> "FleetNorms":
        calibs = list(calibs)
        if not calibs:
            raise ValueError("fleet must be nonempty")
        return cls(
            t_eff_max=max(coherence_sum(c) for c in calibs),
            g1_max=max(single_gate_error_sum(c) for c in calibs) or 1.0,
            g2_max=max(two_gate_error_sum(c) for c in calibs) or 1.0,
            readout_max=max(readout_error_sum(c) for c in calibs) or 1.0,
            prep_max=max(prep_error_sum(c) for c in calibs) or 1.0,
        )


@dataclass(frozen=True)
class EffectiveNoiseBreakdown:
    """Per-component values behind one device's effective-noise score."""

    t_eff_raw: float  # microseconds, larger is better
    t_term: float     # 1 - t_eff_raw / fleet max, larger is noisier
    g1_err: float
    g2_err: float
    readout_err: float
    prep_err: float
    n_eff: float


def effective_noise(calib: CalibrationData,
                    weights: NoiseWeights | None = None,
                    norms: FleetNorms | None = None) -> EffectiveNoiseBreakdown:
    """Weighted aggregate of the five calibration error families.

    Without ``norms`` the device is scored against itself (coherence term 0,
    raw error sums); pass ``FleetNorms.from_fleet`` output to rank devices
    within a fleet.
    """
    w = (weights or DEFAULT_WEIGHTS).normalized()
    t_raw = coherence_sum(calib)
    if norms is None:
        norms = FleetNorms(t_eff_max=t_raw)
    t_term = max(0.0, 1.0 - t_raw / norms.t_eff_max)
    g1 = single_gate_error_sum(calib) / norms.g1_max
    g2 = two_gate_error_sum(calib) / norms.g2_max
    ro = readout_error_sum(calib) / norms.readout_max
    prep = prep_error_sum(calib) / norms.prep_max
    n_eff = w[0] * t_term + w[1] * g1 + w[2] * g2 + w[3] * ro + w[4] * prep
    return EffectiveNoiseBreakdown(t_raw, t_term, g1, g2, ro, prep, n_eff)


def _two_qubit_error(calib: CalibrationData, gate: Gate) -> float:
    pairs = calib.two_gate_err.get(gate.name)
    if pairs is None:
        raise CalibrationError(f"no two-qubit error entry for gate {gate.name}")
    key = (gate.targets[0], gate.targets[1])
    if key in pairs:
        return pairs[key]
    rev = (key[1], key[0])
    if rev in pairs:
        return pairs[rev]
    raise CalibrationError(f"no {gate.name} error for qubit pair {key}")


def gate_noise_channel(calib: CalibrationData, gate: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
    """Noise channels to append after one ideal gate.

    Per target qubit: depolarizing at the calibrated gate error, amplitude
    damping at 1 - exp(-duration/T1), phase damping at 1 - exp(-duration/T2).
    Zero-probability channels are dropped, so an ideal device yields [].
    """
    for q in gate.targets:
        if q >= calib.n_qubits:
            raise CalibrationError(f"qubit {q} outside device capacity {calib.n_qubits}")
    if gate.name not in calib.gate_duration:
        raise CalibrationError(f"no duration entry for gate {gate.name}")
    duration_us = calib.gate_duration[gate.name] * 1e-3

    out: list[tuple[KrausChannel, tuple[int, ...]]] = []
    if GATE_ARITY[gate.name] == 2:
        p_gate = _two_qubit_error(calib, gate)
        p_by_qubit = {q: p_gate for q in gate.targets}
    else:
        vec = calib.single_gate_err.get(gate.name)
        if vec is None:
            raise CalibrationError(f"no single-qubit error entry for gate {gate.name}")
        p_by_qubit = {q: vec[q] for q in gate.targets}

    for q in gate.targets:
        if p_by_qubit[q] > 0:
            out.append((make_depolarizing(p_by_qubit[q]), (q,)))
        p_amp = 1.0 - math.exp(-duration_us / calib.t1[q])
        if p_amp > 0:
            out.append((make_amplitude_damping(p_amp), (q,)))
        p_phi = 1.0 - math.exp(-duration_us / calib.t2[q])
        if p_phi > 0:
            out.append((make_phase_damping(p_phi), (q,)))
    return out


def measurement_noise(calib: CalibrationData, qubit: int, ideal_bit: int) -> float:
    """Probability that the readout of ``qubit`` flips the given ideal bit.

    Table-style calibration carries one symmetric readout error per qubit,
    so the value is independent of ``ideal_bit``.
    """
    if not 0 <= qubit < calib.n_qubits:
        raise CalibrationError(f"qubit {qubit} outside device capacity")
    if ideal_bit not in (0, 1):
        raise ValueError("ideal_bit must be 0 or 1")
    return calib.readout_err[qubit]


def preparation_flip_prob(calib: CalibrationData, qubit: int, bit: int) -> float:
    """Probability that preparing ``bit`` on ``qubit`` yields the other state."""
    if not 0 <= qubit < calib.n_qubits:
        raise CalibrationError(f"qubit {qubit} outside device capacity")
    return calib.prep01[qubit] if bit == 0 else calib.prep10[qubit]


def apply_readout_flips(bits: np.ndarray, calib: CalibrationData, rng: np.random.Generator) -> np.ndarray:
    """Classically flip sampled outcome bits at each qubit's readout error."""
    flip_p = np.asarray(calib.readout_err[: bits.shape[1]])
    flips = rng.random(bits.shape) < flip_p[None, :]
    return bits ^ flips.astype(bits.dtype)


class _ChannelCache:
    """Memoizes channels_for results keyed by (gate name, targets, angle-free)."""

    __slots__ = ("_data",)

    def __init__(self):
        self._data = {}

    def get(self, key, build):
        try:
            return self._data[key]
        except KeyError:
            value = build()
            self._data[key] = value
            return value


@dataclass(frozen=True)
class CalibrationNoiseModel:
    """Gate-noise model derived from device calibration.

    Per-qubit channels of one gate are fused into a single composed channel
    (identical action, fewer kernel calls). With ``pauli_only`` the damping
    terms are dropped and only the depolarizing gate-error component remains
    (every channel is then a Pauli channel, as quasi-probability inversion
    requires); Pauli channels are never composed away.
    """

    calibration: CalibrationData
    pauli_only: bool = False
    _cache: _ChannelCache = field(default_factory=_ChannelCache, repr=False, compare=False)

    def channels_for(self, gate: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        key = (gate.name, gate.targets)
        return self._cache.get(key, lambda: self._build(gate))

    def _build(self, gate: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        if not self.pauli_only:
            raw = gate_noise_channel(self.calibration, gate)
            by_qubit: dict[int, list[KrausChannel]] = {}
            for channel, targets in raw:
                by_qubit.setdefault(targets[0], []).append(channel)
            return [(compose_single_qubit_channels(chs), (q,))
                    for q, chs in by_qubit.items()]
        calib = self.calibration
        if GATE_ARITY[gate.name] == 2:
            p_gate = _two_qubit_error(calib, gate)
            p_by_qubit = {q: p_gate for q in gate.targets}
        else:
            vec = calib.single_gate_err.get(gate.name)
            if vec is None:
                raise CalibrationError(f"no single-qubit error entry for gate {gate.name}")
            p_by_qubit = {q: vec[q] for q in gate.targets}
        return [(make_depolarizing(p), (q,)) for q, p in p_by_qubit.items() if p > 0]


@dataclass(frozen=True)
class DepolarizingNoiseModel:
    """Depolarizing noise at a fixed rate on every target of every gate."""

    p: float
    _cache: _ChannelCache = field(default_factory=_ChannelCache, repr=False, compare=False)

    def channels_for(self, gate: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        if self.p <= 0:
            return []
        channel = self._cache.get("channel", lambda: make_depolarizing(self.p))
        return [(channel, (q,)) for q in gate.targets]


@dataclass(frozen=True)
class PauliNoiseModel:
    """Fixed Pauli noise on every target of every gate."""

    px: float
    py: float
    pz: float
    _cache: _ChannelCache = field(default_factory=_ChannelCache, repr=False, compare=False)

    def channels_for(self, gate: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        if self.px + self.py + self.pz <= 0:
            return []
        channel = self._cache.get("channel", lambda: make_pauli(self.px, self.py, self.pz))
        return [(channel, (q,)) for q in gate.targets]
