# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for applying 1- and 2-qubit operators to density matrices.

Semantics match ``nacqfl._kernels_py`` exactly: ``out`` accumulates
``sum_i A_i rho A_i^dagger`` with the operators embedded on the target
qubit(s).  Qubit ``q`` is bit ``q`` of the computational-basis index.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex conj(double complex)


BACKEND = "cython"


def apply_kraus_1q(const double complex[:, ::1] rho,
                   const double complex[:, :, ::1] ops,
                   Py_ssize_t q,
                   double complex[:, ::1] out):
    """Accumulate sum_i A_i rho A_i^dagger into out for 2x2 operators on qubit q."""
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t half = dim >> 1
    cdef Py_ssize_t mask = (<Py_ssize_t>1) << q
    cdef Py_ssize_t low = mask - 1
    cdef Py_ssize_t n_ops = ops.shape[0]
    cdef Py_ssize_t k, i, j, r0, r1, c0, c1
    cdef double complex a00, a01, a10, a11
    cdef double complex b00, b01, b10, b11
    cdef double complex t00, t01, t10, t11

    with nogil:
        for k in range(n_ops):
            a00 = ops[k, 0, 0]
            a01 = ops[k, 0, 1]
            a10 = ops[k, 1, 0]
            a11 = ops[k, 1, 1]
            for i in range(half):
                r0 = ((i >> q) << (q + 1)) | (i & low)
                r1 = r0 | mask
                for j in range(half):
                    c0 = ((j >> q) << (q + 1)) | (j & low)
                    c1 = c0 | mask
                    b00 = rho[r0, c0]
                    b01 = rho[r0, c1]
                    b10 = rho[r1, c0]
                    b11 = rho[r1, c1]
                    t00 = a00 * b00 + a01 * b10
                    t01 = a00 * b01 + a01 * b11
                    t10 = a10 * b00 + a11 * b10
                    t11 = a10 * b01 + a11 * b11
                    out[r0, c0] = out[r0, c0] + t00 * conj(a00) + t01 * conj(a01)
                    out[r0, c1] = out[r0, c1] + t00 * conj(a10) + t01 * conj(a11)
                    out[r1, c0] = out[r1, c0] + t10 * conj(a00) + t11 * conj(a01)
                    out[r1, c1] = out[r1, c1] + t10 * conj(a10) + t11 * conj(a11)


def apply_kraus_2q(const double complex[:, ::1] rho,
                   const double complex[:, :, ::1] ops,
                   Py_ssize_t q_a,
                   Py_ssize_t q_b,
                   double complex[:, ::1] out):
    """Accumulate sum_i A_i rho A_i^dagger for 4x4 operators on qubits (q_a, q_b).

    The 4x4 operator index is bit(q_b)*2 + bit(q_a): q_a is the least
    significant bit of the operator basis.
    """
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t quarter = dim >> 2
    cdef Py_ssize_t m_a = (<Py_ssize_t>1) << q_a
    cdef Py_ssize_t m_b = (<Py_ssize_t>1) << q_b
    cdef Py_ssize_t q_lo = q_a if q_a < q_b else q_b
    cdef Py_ssize_t q_hi = q_b if q_a < q_b else q_a
    cdef Py_ssize_t low_lo = ((<Py_ssize_t>1) << q_lo) - 1
    cdef Py_ssize_t low_hi = ((<Py_ssize_t>1) << q_hi) - 1
    cdef Py_ssize_t n_ops = ops.shape[0]
    cdef Py_ssize_t k, i, j, r, c, s, t, u
    cdef Py_ssize_t roff[4]
    cdef Py_ssize_t coff[4]
    cdef double complex a[4][4]
    cdef double complex b[4][4]
    cdef double complex tmp[4][4]
    cdef double complex acc

    cdef Py_ssize_t off[4]
    off[0] = 0
    off[1] = m_a
    off[2] = m_b
    off[3] = m_a | m_b

    with nogil:
        for k in range(n_ops):
            for s in range(4):
                for t in range(4):
                    a[s][t] = ops[k, s, t]
            for i in range(quarter):
                r = ((i >> q_lo) << (q_lo + 1)) | (i & low_lo)
                r = ((r >> q_hi) << (q_hi + 1)) | (r & low_hi)
                for s in range(4):
                    roff[s] = r | off[s]
                for j in range(quarter):
                    c = ((j >> q_lo) << (q_lo + 1)) | (j & low_lo)
                    c = ((c >> q_hi) << (q_hi + 1)) | (c & low_hi)
                    for s in range(4):
                        coff[s] = c | off[s]
                    for s in range(4):
                        for t in range(4):
                            b[s][t] = rho[roff[s], coff[t]]
                    # tmp = A @ B
                    for s in range(4):
                        for t in range(4):
                            acc = 0
                            for u in range(4):
                                acc = acc + a[s][u] * b[u][t]
                            tmp[s][t] = acc
                    # out_block += tmp @ A^dagger
                    for s in range(4):
                        for t in range(4):
                            acc = 0
                            for u in range(4):
                                acc = acc + tmp[s][u] * conj(a[t][u])
                            out[roff[s], coff[t]] = out[roff[s], coff[t]] + acc
