"""Density-matrix simulator: states, gates, channels, sampling, fidelity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nacqfl import sim
from nacqfl.noise import (make_amplitude_damping, make_bit_flip, make_depolarizing,
                          make_pauli, make_phase_damping, make_phase_flip)
from nacqfl.sim import (CapacityError, Circuit, DensityMatrix, Gate, Observable,
                        apply_channel, apply_gate, expectation, fidelity,
                        maximally_mixed, sample_counts, zero_state)

from conftest import random_density

X = np.array([[0, 1], [1, 0]], dtype=complex)


class TestZeroState:
    def test_single_qubit(self):
        np.testing.assert_allclose(zero_state(1).data, [[1, 0], [0, 0]])

    def test_two_qubits(self):
        rho = zero_state(2).data
        assert rho.shape == (4, 4)
        assert rho[0, 0] == 1.0
        assert np.count_nonzero(rho) == 1

    def test_capacity_bound(self):
        with pytest.raises(CapacityError):
            zero_state(13)
        with pytest.raises(CapacityError):
            zero_state(0)

    def test_purity_and_trace(self):
        state = zero_state(3)
        assert abs(state.trace() - 1) < 1e-12
        assert abs(state.purity() - 1) < 1e-12


class TestGates:
    def test_x_flips_ground_state(self):
        state = apply_gate(zero_state(1), Gate("X", (0,)))
        np.testing.assert_allclose(state.data, [[0, 0], [0, 1]])

    def test_hadamard_is_involution(self):
        rng = np.random.default_rng(5)
        state = random_density(2, rng)
        h = Gate("H", (1,))
        back = apply_gate(apply_gate(state, h), h)
        np.testing.assert_allclose(back.data, state.data, atol=1e-10)

    def test_ry_half_pi_reaches_equator(self):
        state = apply_gate(zero_state(1), Gate("RY", (0,), math.pi / 2))
        assert abs(expectation(state, Observable("Z"))) < 1e-10

    def test_cnot_flips_target_when_control_set(self):
        state = zero_state(2)
        state = apply_gate(state, Gate("X", (0,)))        # control = qubit 0
        state = apply_gate(state, Gate("CNOT", (0, 1)))
        assert abs(state.data[3, 3] - 1) < 1e-12          # |11>

    def test_gate_validation(self):
        with pytest.raises(ValueError):
            Gate("X", (0, 1))
        with pytest.raises(ValueError):
            Gate("CNOT", (1, 1))
        with pytest.raises(ValueError):
            Gate("RY", (0,))  # missing angle
        with pytest.raises(ValueError):
            Gate("X", (0,), 0.3)  # spurious angle
        with pytest.raises(ValueError):
            Gate("SWAP", (0, 1))

    def test_invalid_target_index(self):
        with pytest.raises(ValueError):
            apply_gate(zero_state(1), Gate("X", (1,)))

    @pytest.mark.parametrize("name,angle", [
        ("X", None), ("Y", None), ("Z", None), ("H", None),
        ("RX", 0.7), ("RY", -1.2), ("RZ", 2.5), ("CNOT", None),
    ])
    def test_matrices_are_unitary(self, name, angle):
        targets = (0, 1) if name == "CNOT" else (0,)
        m = Gate(name, targets, angle).matrix()
        np.testing.assert_allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-10)

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(11)
        state = random_density(3, rng)
        for gate in [Gate("RX", (1,), 0.9), Gate("H", (2,)), Gate("CNOT", (0, 2))]:
            roundtrip = apply_gate(apply_gate(state, gate), gate.inverse())
            np.testing.assert_allclose(roundtrip.data, state.data, atol=1e-10)


class TestChannels:
    def test_bit_flip_zero_probability_is_identity(self):
        rng = np.random.default_rng(1)
        state = random_density(2, rng)
        out = apply_channel(state, make_bit_flip(0.0), (0,))
        np.testing.assert_allclose(out.data, state.data, atol=1e-12)

    def test_full_depolarizing_gives_maximally_mixed(self):
        rng = np.random.default_rng(2)
        state = random_density(1, rng)
        out = apply_channel(state, make_depolarizing(1.0), (0,))
        np.testing.assert_allclose(out.data, np.eye(2) / 2, atol=1e-10)

    def test_full_amplitude_damping_resets_excited_state(self):
        one = apply_gate(zero_state(1), Gate("X", (0,)))
        out = apply_channel(one, make_amplitude_damping(1.0), (0,))
        np.testing.assert_allclose(out.data, [[1, 0], [0, 0]], atol=1e-12)

    def test_arity_mismatch_rejected(self):
        with pytest.raises(ValueError):
            apply_channel(zero_state(2), make_bit_flip(0.1), (0, 1))

    @pytest.mark.parametrize("factory", [
        make_bit_flip, make_phase_flip, make_depolarizing,
        make_amplitude_damping, make_phase_damping,
    ])
    @pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
    def test_trace_preserved_on_random_states(self, factory, p):
        channel = factory(p)
        rng = np.random.default_rng(hash((factory.__name__, p)) % 2**32)
        for _ in range(5):
            state = random_density(2, rng)
            out = apply_channel(state, channel, (1,))
            assert abs(out.trace() - 1) < 1e-10

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
    def test_cptp_completeness(self, p):
        for channel in (make_bit_flip(p), make_phase_flip(p), make_depolarizing(p),
                        make_amplitude_damping(p), make_pauli(p / 2, p / 4, p / 4)):
            total = sum(a.conj().T @ a for a in channel.operators)
            np.testing.assert_allclose(total, np.eye(2), atol=1e-10)

    def test_channel_linearity(self):
        rng = np.random.default_rng(9)
        a, b = random_density(2, rng), random_density(2, rng)
        alpha = 0.3
        mix = DensityMatrix(2, alpha * a.data + (1 - alpha) * b.data)
        channel = make_amplitude_damping(0.4)
        lhs = apply_channel(mix, channel, (0,)).data
        rhs = (alpha * apply_channel(a, channel, (0,)).data
               + (1 - alpha) * apply_channel(b, channel, (0,)).data)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_non_cptp_operators_rejected_at_construction(self):
        with pytest.raises(ValueError):
            sim.KrausChannel((np.eye(2) * 0.5,))


class TestExpectation:
    def test_z_on_ground_state(self):
        assert expectation(zero_state(1), Observable("Z")) == pytest.approx(1.0)

    def test_z_on_maximally_mixed(self):
        assert expectation(maximally_mixed(1), Observable("Z")) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 0.5, 0.9])
    def test_z_after_bit_flip_matches_direct_matrix_oracle(self, p):
        # oracle: evaluate (1-p) rho + p X rho X explicitly, then trace against Z
        state = apply_channel(zero_state(1), make_bit_flip(p), (0,))
        rho0 = np.array([[1, 0], [0, 0]], dtype=complex)
        direct = (1 - p) * rho0 + p * X @ rho0 @ X
        expected = float(np.real(np.trace(direct @ np.diag([1, -1]))))
        assert expectation(state, Observable("Z")) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(1 - 2 * p)

    def test_x_expectation_on_plus_state(self):
        plus = apply_gate(zero_state(1), Gate("H", (0,)))
        assert expectation(plus, Observable("X")) == pytest.approx(1.0)

    def test_multi_qubit_pauli_string(self):
        state = zero_state(2)
        state = apply_gate(state, Gate("X", (1,)))
        assert expectation(state, Observable("ZZ")) == pytest.approx(-1.0)
        assert expectation(state, Observable("IZ")) == pytest.approx(-1.0)
        assert expectation(state, Observable("ZI")) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            expectation(zero_state(2), Observable("Z"))

    def test_imaginary_part_is_negligible(self):
        rng = np.random.default_rng(21)
        state = random_density(3, rng)
        # brute-force Tr(rho P) for P = X2 (x) Y1 (x) Z0, kept fully complex
        p_full = sim.embed_operator(np.array([[0, 1], [1, 0]]), (2,), 3)
        p_full = p_full @ sim.embed_operator(np.array([[0, -1j], [1j, 0]]), (1,), 3)
        p_full = p_full @ sim.embed_operator(np.diag([1, -1]).astype(complex), (0,), 3)
        want = np.trace(state.data @ p_full)
        assert abs(want.imag) < 1e-10
        got = expectation(state, Observable("ZYX"))
        assert got == pytest.approx(want.real, abs=1e-10)


class TestSampling:
    def test_ground_state_counts(self):
        assert sample_counts(zero_state(1), 100, seed=0) == {"0": 100}

    def test_maximally_mixed_within_binomial_bound(self):
        shots = 100_000
        counts = sample_counts(maximally_mixed(1), shots, seed=123)
        sigma = math.sqrt(shots * 0.5 * 0.5)
        for key in ("0", "1"):
            assert abs(counts[key] - shots / 2) < 3 * sigma

    def test_same_seed_reproduces_counts(self):
        rng = np.random.default_rng(4)
        state = random_density(3, rng)
        assert sample_counts(state, 999, seed=7) == sample_counts(state, 999, seed=7)

    def test_shots_validated(self):
        with pytest.raises(ValueError):
            sample_counts(zero_state(1), 0, seed=0)

    def test_bitstring_orientation(self):
        # qubit 0 is the rightmost character
        state = apply_gate(zero_state(2), Gate("X", (0,)))
        assert sample_counts(state, 10, seed=0) == {"01": 10}


class TestFidelity:
    def test_identical_states(self):
        rng = np.random.default_rng(8)
        state = random_density(2, rng)
        assert fidelity(state, state) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_pure_states(self):
        one = apply_gate(zero_state(1), Gate("X", (0,)))
        assert fidelity(zero_state(1), one) == pytest.approx(0.0, abs=1e-12)

    def test_pure_vs_maximally_mixed(self):
        # closed form: <0| I/2 |0> = 1/2 for a pure reference state
        assert fidelity(zero_state(1), maximally_mixed(1)) == pytest.approx(0.5, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(zero_state(1), zero_state(2))

    def test_symmetry(self):
        rng = np.random.default_rng(13)
        a, b = random_density(2, rng), random_density(2, rng)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-9)


class TestStateInvariants:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_random_states_are_physical(self, seed):
        state = random_density(2, np.random.default_rng(seed))
        np.testing.assert_allclose(state.data, state.data.conj().T, atol=1e-10)
        assert abs(state.trace() - 1) < 1e-10
        assert np.linalg.eigvalsh(state.data).min() > -1e-9

    def test_channels_preserve_hermiticity_and_psd(self):
        rng = np.random.default_rng(0)
        state = random_density(2, rng)
        for channel in (make_depolarizing(0.3), make_amplitude_damping(0.6)):
            state = apply_channel(state, channel, (1,))
        np.testing.assert_allclose(state.data, state.data.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh(state.data).min() > -1e-9


class TestCircuit:
    def test_run_circuit_matches_manual_application(self):
        circuit = Circuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))))
        out = sim.run_circuit(circuit)
        manual = apply_gate(apply_gate(zero_state(2), Gate("H", (0,))), Gate("CNOT", (0, 1)))
        np.testing.assert_allclose(out.data, manual.data, atol=1e-12)

    def test_circuit_rejects_out_of_range_targets(self):
        with pytest.raises(ValueError):
            Circuit(1, (Gate("CNOT", (0, 1)),))

    def test_bell_state_sampling(self):
        circuit = Circuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))))
        counts = sim.sample_counts(sim.run_circuit(circuit), 4000, seed=5)
        assert set(counts) == {"00", "11"}
