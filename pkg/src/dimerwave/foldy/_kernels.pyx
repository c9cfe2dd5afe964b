# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Foldy-Lax kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, M_PI

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)

cnp.import_array()


cdef inline void _green(double rx, double ry, double rz, double complex k,
                        double complex *e, double complex *gfac, double complex *hxx,
                        double *dist) noexcept nogil:
    cdef double d = sqrt(rx * rx + ry * ry + rz * rz)
    cdef double complex ikd = 1j * k * d
    e[0] = -cexp(ikd) / (4.0 * M_PI * d)
    gfac[0] = e[0] * (ikd - 1.0) / (d * d)
    hxx[0] = e[0] * (3.0 - 3.0 * ikd - k * k * d * d) / (d * d * d * d)
    dist[0] = d


def assemble_foldy(double[:, ::1] z, double complex[::1] g0, double complex[:, :, ::1] g1,
                   double complex k, int block=256):
    cdef Py_ssize_t N = z.shape[0]
    out = np.zeros((4 * N, 4 * N), dtype=np.complex128)
    cdef double complex[:, ::1] T = out
    cdef Py_ssize_t i, j, a, b, c, row, col
    cdef double r[3]
    cdef double complex e, gfac, hxx, gi, s
    cdef double complex grad[3]
    cdef double complex H[3][3]
    cdef double d
    with nogil:
        for j in range(N):
            row = 4 * j
            for i in range(N):
                if i == j:
                    continue
                col = 4 * i
                r[0] = z[j, 0] - z[i, 0]
                r[1] = z[j, 1] - z[i, 1]
                r[2] = z[j, 2] - z[i, 2]
                _green(r[0], r[1], r[2], k, &e, &gfac, &hxx, &d)
                gi = g0[i]
                for a in range(3):
                    grad[a] = gfac * r[a]
                    for b in range(3):
                        H[a][b] = hxx * r[a] * r[b]
                    H[a][a] = H[a][a] + gfac
                T[row, col] = gi * e
                for a in range(3):
                    s = 0
                    for b in range(3):
                        s = s + g1[i, a, b] * grad[b]
                    T[row, col + 1 + a] = s
                    T[row + 1 + a, col] = gi * grad[a]
                for c in range(3):
                    for a in range(3):
                        s = 0
                        for b in range(3):
                            s = s + H[c][b] * g1[i, a, b]
                        T[row + 1 + c, col + 1 + a] = s
    return out


def field_sum(double[:, ::1] x, double[:, ::1] z, double complex[::1] q, double complex[:, ::1] w,
              double complex k, int block=2048):
    cdef Py_ssize_t M = x.shape[0], N = z.shape[0]
    out = np.zeros(M, dtype=np.complex128)
    cdef double complex[::1] res = out
    cdef Py_ssize_t m, i
    cdef double rx, ry, rz, d
    cdef double complex e, gfac, hxx, acc
    with nogil:
        for m in range(M):
            acc = 0
            for i in range(N):
                rx = x[m, 0] - z[i, 0]
                ry = x[m, 1] - z[i, 1]
                rz = x[m, 2] - z[i, 2]
                _green(rx, ry, rz, k, &e, &gfac, &hxx, &d)
                acc = acc + q[i] * e + gfac * (w[i, 0] * rx + w[i, 1] * ry + w[i, 2] * rz)
            res[m] = acc
    return out
