import numpy as np
import pytest

from nacqfl.noise import CalibrationData
from nacqfl.sim import DensityMatrix


def random_density(n_qubits: int, rng: np.random.Generator) -> DensityMatrix:
    """A random full-rank density matrix (Wishart construction)."""
    dim = 1 << n_qubits
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return DensityMatrix(n_qubits, rho / np.trace(rho))


def simple_calibration(n_qubits=2, *, t1=100.0, t2=80.0, e1=0.001, e2=0.01,
                       readout=0.02, prep=0.01, dur_1q=35.6, dur_2q=300.0,
                       gates=("X", "H", "RY", "RZ")) -> CalibrationData:
    """A small uniform calibration record for tests."""
    pairs = {}
    for a in range(n_qubits):
        for b in range(n_qubits):
            if a != b:
                pairs[(a, b)] = e2
    duration = {g: dur_1q for g in gates}
    duration["CNOT"] = dur_2q
    return CalibrationData(
        t1=(t1,) * n_qubits,
        t2=(t2,) * n_qubits,
        single_gate_err={g: (e1,) * n_qubits for g in gates},
        two_gate_err={"CNOT": pairs},
        readout_err=(readout,) * n_qubits,
        prep01=(prep,) * n_qubits,
        prep10=(prep,) * n_qubits,
        gate_duration=duration,
    )


@pytest.fixture(scope="session")
def fleet():
    from nacqfl.topology import bundled_fleet

    return bundled_fleet()
