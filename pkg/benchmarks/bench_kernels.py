"""Compares the compiled density-matrix kernels against the numpy fallback.

Three workloads: raw 1-qubit Kraus application, raw 2-qubit Kraus
application, and a full partitioned-QNN forward pass under calibration
noise (the shape of the training hot loop).

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from nacqfl import _kernels_py

try:
    from nacqfl import _kernels
except ImportError:
    _kernels = None


def _random_rho(n, rng):
    dim = 1 << n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return np.ascontiguousarray(rho / np.trace(rho))


def bench_kraus(mod, n_qubits, two_qubit, repeats):
    rng = np.random.default_rng(0)
    rho = _random_rho(n_qubits, rng)
    if two_qubit:
        ops = np.ascontiguousarray(rng.normal(size=(4, 4, 4)) + 1j * rng.normal(size=(4, 4, 4)))
    else:
        ops = np.ascontiguousarray(rng.normal(size=(4, 2, 2)) + 1j * rng.normal(size=(4, 2, 2)))
    out = np.zeros_like(rho)
    calls = max(20, 20000 // (1 << n_qubits))
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(calls):
            out[:] = 0
            if two_qubit:
                mod.apply_kraus_2q(rho, ops, 0, n_qubits - 1, out)
            else:
                mod.apply_kraus_1q(rho, ops, n_qubits // 2, out)
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def bench_forward(backend_name, repeats):
    # the simulator resolves kernels through the backend module at call time,
    # so swapping the implementation there is enough
    import nacqfl.backend as b

    impl = _kernels_py if backend_name == "numpy" else _kernels
    b.apply_kraus_1q = impl.apply_kraus_1q
    b.apply_kraus_2q = impl.apply_kraus_2q

    from nacqfl.dqnn import QnnModel, forward, partition_circuit
    from nacqfl.noise import CalibrationNoiseModel
    from nacqfl.topology import bundled_fleet

    fleet = {d.id: d for d in bundled_fleet()}
    model = QnnModel.init(4, 2, 2, 4, seed=1)
    plan = partition_circuit(model, [("lagos-7", 7), ("oslo-5", 5)], "SYM")
    noise_map = {name: CalibrationNoiseModel(fleet[name].calibration)
                 for name in ("lagos-7", "oslo-5")}
    x = np.linspace(0.1, 3.0, 4)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(50):
            forward(model, plan, x, noise_map)
        best = min(best, (time.perf_counter() - t0) / 50)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    mods = [("numpy", _kernels_py)]
    if _kernels is not None:
        mods.insert(0, ("cython", _kernels))
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    print(f"{'workload':28s}" + "".join(f"{name:>12s}" for name, _ in mods) + f"{'speedup':>10s}")
    for label, n, two in [("kraus-1q 2 qubits", 2, False),
                          ("kraus-1q 6 qubits", 6, False),
                          ("kraus-1q 10 qubits", 10, False),
                          ("kraus-2q 2 qubits", 2, True),
                          ("kraus-2q 6 qubits", 6, True),
                          ("kraus-2q 10 qubits", 10, True)]:
        times = [bench_kraus(mod, n, two, args.repeats) for _, mod in mods]
        row = f"{label:28s}" + "".join(f"{t * 1e6:10.1f}us" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:9.1f}x"
        print(row)

    times = []
    for name, _ in mods:
        times.append(bench_forward(name, args.repeats))
    row = f"{'noisy DQNN forward (4q)':28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
    if len(times) == 2:
        row += f"{times[1] / times[0]:9.1f}x"
    print(row)


if __name__ == "__main__":
    main()
