# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors _pyref.py operation for operation."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def level_offsets(dim, depth):
    # wraparound is disabled module-wide, so avoid negative list indices
    off = [0]
    total = 0
    for k in range(depth + 1):
        total = total + dim**k
        off.append(total)
    return off


def pvar_cumulative(const double[:, ::1] dist_pow):
    cdef Py_ssize_t n = dist_pow.shape[0]
    out = np.zeros(n)
    cdef double[::1] cum = out
    cdef Py_ssize_t j, m
    cdef double best, c
    for j in range(1, n):
        best = cum[0] + dist_pow[0, j]
        for m in range(1, j):
            c = cum[m] + dist_pow[m, j]
            if c > best:
                best = c
        cum[j] = best
    return out


def sig_trajectory_batch(const double[:, :, ::1] increments, int depth):
    cdef Py_ssize_t B = increments.shape[0]
    cdef Py_ssize_t n = increments.shape[1]
    cdef Py_ssize_t d = increments.shape[2]
    offs = level_offsets(d, depth)
    cdef Py_ssize_t D = offs[depth + 1]
    cdef cnp.ndarray off_arr = np.asarray(offs, dtype=np.intp)
    cdef Py_ssize_t[::1] off = off_arr
    out = np.empty((B, n + 1, D))
    cdef double[:, :, ::1] o = out
    work_s = np.empty(D)
    work_e = np.empty(D)
    cdef double[::1] S = work_s
    cdef double[::1] E = work_e
    cdef Py_ssize_t b, i, k, lvl, a, c, idx, rem, base, rowbase, dkp
    cdef double ea, sa, dk
    for b in range(B):
        S[0] = 1.0
        for idx in range(1, D):
            S[idx] = 0.0
        for idx in range(D):
            o[b, 0, idx] = S[idx]
        for i in range(n):
            E[0] = 1.0
            for k in range(1, depth + 1):
                dkp = off[k] - off[k - 1]
                dk = <double> k
                idx = off[k]
                for a in range(dkp):
                    ea = E[off[k - 1] + a]
                    for c in range(d):
                        E[idx] = ea * increments[b, i, c] / dk
                        idx += 1
            for lvl in range(depth, 0, -1):
                base = off[lvl]
                rem = off[lvl + 1] - base
                for idx in range(rem):
                    S[base + idx] = S[base + idx] + E[base + idx]
                for k in range(1, lvl):
                    rem = off[lvl - k + 1] - off[lvl - k]
                    for a in range(off[k + 1] - off[k]):
                        sa = S[off[k] + a]
                        rowbase = base + a * rem
                        for c in range(rem):
                            S[rowbase + c] += sa * E[off[lvl - k] + c]
            for idx in range(D):
                o[b, i + 1, idx] = S[idx]
    return out


def sig_trajectory(const double[:, ::1] increments, int depth):
    arr = np.ascontiguousarray(increments)[None, :, :]
    return sig_trajectory_batch(arr, depth)[0]


def chen_max_residual(const double[:, ::1] z1, const double[:, :, ::1] z2):
    cdef Py_ssize_t n = z1.shape[0]
    cdef Py_ssize_t d = z1.shape[1]
    cdef Py_ssize_t s, r, t, a, c
    cdef double best = 0.0
    cdef double ast, asr, art, res
    for r in range(1, n - 1):
        for s in range(r):
            for t in range(r + 1, n):
                for a in range(d):
                    for c in range(d):
                        ast = z2[t, a, c] - z2[s, a, c] - z1[s, a] * (z1[t, c] - z1[s, c])
                        asr = z2[r, a, c] - z2[s, a, c] - z1[s, a] * (z1[r, c] - z1[s, c])
                        art = z2[t, a, c] - z2[r, a, c] - z1[r, a] * (z1[t, c] - z1[r, c])
                        res = ast - asr - art - (z1[r, a] - z1[s, a]) * (z1[t, c] - z1[r, c])
                        if fabs(res) > best:
                            best = fabs(res)
    return best
