"""Pure-numpy fallback for the compiled density-matrix kernels.

Same contract as ``nacqfl._kernels``: ``out`` accumulates
``sum_i A_i rho A_i^dagger`` with operators embedded on the target qubits.
Qubit ``q`` is bit ``q`` of the computational-basis index, so with the
row-major reshape to a rank-2n tensor, qubit ``q`` lives on axis ``n-1-q``
(rows) and ``2n-1-q`` (columns).
"""

import numpy as np

BACKEND = "numpy"


def _n_qubits(dim: int) -> int:
    return dim.bit_length() - 1


def apply_kraus_1q(rho, ops, q, out):
    dim = rho.shape[0]
    n = _n_qubits(dim)
    t = rho.reshape((2,) * (2 * n))
    row_ax = n - 1 - q
    col_ax = 2 * n - 1 - q
    acc = np.zeros_like(t)
    for a in ops:
        s = np.tensordot(a, t, axes=([1], [row_ax]))
        s = np.moveaxis(s, 0, row_ax)
        s = np.tensordot(s, a.conj().T, axes=([col_ax], [0]))
        s = np.moveaxis(s, -1, col_ax)
        acc += s
    out += acc.reshape(dim, dim)


def apply_kraus_2q(rho, ops, q_a, q_b, out):
    dim = rho.shape[0]
    n = _n_qubits(dim)
    t = rho.reshape((2,) * (2 * n))
    # operator index is bit(q_b)*2 + bit(q_a); reshaping a 4x4 operator to
    # (2, 2, 2, 2) yields axes [out_b, out_a, in_b, in_a]
    row_b, row_a = n - 1 - q_b, n - 1 - q_a
    col_b, col_a = 2 * n - 1 - q_b, 2 * n - 1 - q_a
    acc = np.zeros_like(t)
    for a in ops:
        a4 = a.reshape(2, 2, 2, 2)
        s = np.tensordot(a4, t, axes=([2, 3], [row_b, row_a]))
        s = np.moveaxis(s, [0, 1], [row_b, row_a])
        s = np.tensordot(s, a4.conj(), axes=([col_b, col_a], [2, 3]))
        s = np.moveaxis(s, [-2, -1], [col_b, col_a])
        acc += s
    out += acc.reshape(dim, dim)
