# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_kernels_py``; same signatures, same results."""

import numpy as np
from libc.math cimport exp


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def quad_energy(ninv, e, daa, drr, dra, mr):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef double[:, ::1] Drr = _c(drr)
    cdef double[:, ::1] Dra = _c(dra)
    cdef double[:, ::1] Mr = _c(mr)
    cdef Py_ssize_t n = E.shape[0], k, l, j, i, kl, ji
    cdef double total = 0.0, x, y
    for k in range(n):
        for l in range(n):
            kl = k * n + l
            for j in range(n):
                if N[k, j] == 0.0:
                    continue
                for i in range(n):
                    ji = j * n + i
                    x = Mr[k, l] + Dra[kl, l] + Dra[kl, i]
                    y = Mr[j, i] + Dra[ji, l] + Dra[ji, i]
                    total += N[k, j] * E[l] * E[i] * exp(Daa[l, i]) * (Drr[kl, ji] + x * y)
    return 0.5 * total


def quad_grad_a(ninv, e, daa, drr, dra, mr):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef double[:, ::1] Drr = _c(drr)
    cdef double[:, ::1] Dra = _c(dra)
    cdef double[:, ::1] Mr = _c(mr)
    cdef Py_ssize_t n = E.shape[0], p, k, l, j, kl, jp
    cdef double acc, x, y
    out = np.zeros(n)
    cdef double[::1] O = out
    for p in range(n):
        acc = 0.0
        for k in range(n):
            for l in range(n):
                kl = k * n + l
                for j in range(n):
                    jp = j * n + p
                    x = Mr[k, l] + Dra[kl, l] + Dra[kl, p]
                    y = Mr[j, p] + Dra[jp, l] + Dra[jp, p]
                    acc += N[k, j] * E[l] * exp(Daa[l, p]) * (Drr[kl, jp] + x * y)
        O[p] = acc * E[p]
    return out


def quad_grad_r(ninv, e, daa, drr, dra, mr):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef double[:, ::1] Dra = _c(dra)
    cdef double[:, ::1] Mr = _c(mr)
    cdef Py_ssize_t n = E.shape[0], p, q, j, i, ji
    cdef double acc
    out = np.zeros((n, n))
    cdef double[:, ::1] O = out
    for p in range(n):
        for q in range(n):
            acc = 0.0
            for j in range(n):
                for i in range(n):
                    ji = j * n + i
                    acc += N[p, j] * E[i] * exp(Daa[q, i]) * (Mr[j, i] + Dra[ji, q] + Dra[ji, i])
            O[p, q] = acc * E[q]
    return out


def quad_hess_aa(ninv, e, daa, drr, dra, mr):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef double[:, ::1] Drr = _c(drr)
    cdef double[:, ::1] Dra = _c(dra)
    cdef double[:, ::1] Mr = _c(mr)
    cdef Py_ssize_t n = E.shape[0], p, q, k, j, kq, jp
    cdef double acc, x, y
    cdef double[::1] diag = quad_grad_a(ninv, e, daa, drr, dra, mr)
    out = np.zeros((n, n))
    cdef double[:, ::1] O = out
    for p in range(n):
        for q in range(n):
            acc = 0.0
            for k in range(n):
                kq = k * n + q
                for j in range(n):
                    jp = j * n + p
                    x = Mr[k, q] + Dra[kq, q] + Dra[kq, p]
                    y = Mr[j, p] + Dra[jp, q] + Dra[jp, p]
                    acc += N[k, j] * (Drr[kq, jp] + x * y)
            O[p, q] = acc * E[q] * E[p] * exp(Daa[q, p])
        O[p, p] += diag[p]
    return out


def quad_hess_ar(ninv, e, daa, drr, dra, mr):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef double[:, ::1] Dra = _c(dra)
    cdef double[:, ::1] Mr = _c(mr)
    cdef Py_ssize_t n = E.shape[0], u, v, p, j, k, l, jp, kl
    cdef double acc
    out = np.zeros((n * n, n))
    cdef double[:, ::1] O = out
    for u in range(n):
        for v in range(n):
            for p in range(n):
                acc = 0.0
                for j in range(n):
                    jp = j * n + p
                    acc += N[u, j] * (Mr[j, p] + Dra[jp, v] + Dra[jp, p])
                acc *= E[v] * E[p] * exp(Daa[v, p])
                if v == p:
                    for k in range(n):
                        for l in range(n):
                            kl = k * n + l
                            acc += N[k, u] * E[l] * E[p] * exp(Daa[l, p]) * (Mr[k, l] + Dra[kl, l] + Dra[kl, p])
                O[u * n + v, p] = acc
    return out


def quad_hess_rr(ninv, e, daa):
    cdef double[:, ::1] N = _c(ninv)
    cdef double[::1] E = _c(e)
    cdef double[:, ::1] Daa = _c(daa)
    cdef Py_ssize_t n = E.shape[0], p, q, u, v
    out = np.zeros((n * n, n * n))
    cdef double[:, ::1] O = out
    for p in range(n):
        for q in range(n):
            for u in range(n):
                for v in range(n):
                    O[p * n + q, u * n + v] = N[p, u] * E[q] * E[v] * exp(Daa[q, v])
    return out
