"""Pure-Python index-loop kernels for the matrix-response interaction term.

Reference implementation of the sums in :mod:`opcalc.general`; the compiled
``_kernels`` extension mirrors these loops one to one. Notation: ``E[i]`` is
``exp(m_a[i] + D_aa[i, i] / 2)``, the response matrix is flattened row-major
so ``r[j, i]`` sits at position ``j * n + i`` of ``drr`` and ``dra``, and the
tilted response mean under ``exp(a_l + a_i)`` is
``mr[j, i] + dra[j * n + i, l] + dra[j * n + i, i]``.
"""

import math

import numpy as np


def _lists(*arrays):
    return [np.asarray(a, dtype=float).tolist() for a in arrays]


def quad_energy(ninv, e, daa, drr, dra, mr):
    """``1/2 <(r e^a)^T N^-1 (r e^a)>``."""
    ninv, e, daa, drr, dra, mr = _lists(ninv, e, daa, drr, dra, mr)
    n = len(e)
    total = 0.0
    for k in range(n):
        for l in range(n):
            kl = k * n + l
            for j in range(n):
                if ninv[k][j] == 0.0:
                    continue
                for i in range(n):
                    ji = j * n + i
                    x = mr[k][l] + dra[kl][l] + dra[kl][i]
                    y = mr[j][i] + dra[ji][l] + dra[ji][i]
                    total += ninv[k][j] * e[l] * e[i] * math.exp(daa[l][i]) * (drr[kl][ji] + x * y)
    return 0.5 * total


def quad_grad_a(ninv, e, daa, drr, dra, mr):
    ninv, e, daa, drr, dra, mr = _lists(ninv, e, daa, drr, dra, mr)
    n = len(e)
    out = [0.0] * n
    for p in range(n):
        acc = 0.0
        for k in range(n):
            for l in range(n):
                kl = k * n + l
                for j in range(n):
                    jp = j * n + p
                    x = mr[k][l] + dra[kl][l] + dra[kl][p]
                    y = mr[j][p] + dra[jp][l] + dra[jp][p]
                    acc += ninv[k][j] * e[l] * math.exp(daa[l][p]) * (drr[kl][jp] + x * y)
        out[p] = acc * e[p]
    return np.array(out)


def quad_grad_r(ninv, e, daa, drr, dra, mr):
    ninv, e, daa, drr, dra, mr = _lists(ninv, e, daa, drr, dra, mr)
    n = len(e)
    out = np.zeros((n, n))
    for p in range(n):
        for q in range(n):
            acc = 0.0
            for j in range(n):
                for i in range(n):
                    ji = j * n + i
                    acc += ninv[p][j] * e[i] * math.exp(daa[q][i]) * (mr[j][i] + dra[ji][q] + dra[ji][i])
            out[p, q] = acc * e[q]
    return out


def quad_hess_aa(ninv, e, daa, drr, dra, mr):
    ninv, e, daa, drr, dra, mr = _lists(ninv, e, daa, drr, dra, mr)
    n = len(e)
    diag = quad_grad_a(ninv, e, daa, drr, dra, mr)
    out = np.zeros((n, n))
    for p in range(n):
        for q in range(n):
            acc = 0.0
            for k in range(n):
                kq = k * n + q
                for j in range(n):
                    jp = j * n + p
                    x = mr[k][q] + dra[kq][q] + dra[kq][p]
                    y = mr[j][p] + dra[jp][q] + dra[jp][p]
                    acc += ninv[k][j] * (drr[kq][jp] + x * y)
            out[p, q] = acc * e[q] * e[p] * math.exp(daa[q][p])
        out[p, p] += diag[p]
    return out


def quad_hess_ar(ninv, e, daa, drr, dra, mr):
    """Mixed block, shape ``(n * n, n)``: row ``u * n + v`` is ``d/d mr[u, v]``, column ``p`` is ``d/d a[p]``."""
    ninv, e, daa, drr, dra, mr = _lists(ninv, e, daa, drr, dra, mr)
    n = len(e)
    out = np.zeros((n * n, n))
    for u in range(n):
        for v in range(n):
            for p in range(n):
                acc = 0.0
                for j in range(n):
                    jp = j * n + p
                    acc += ninv[u][j] * (mr[j][p] + dra[jp][v] + dra[jp][p])
                acc *= e[v] * e[p] * math.exp(daa[v][p])
                if v == p:
                    for k in range(n):
                        for l in range(n):
                            kl = k * n + l
                            acc += ninv[k][u] * e[l] * e[p] * math.exp(daa[l][p]) * (mr[k][l] + dra[kl][l] + dra[kl][p])
                out[u * n + v, p] = acc
    return out


def quad_hess_rr(ninv, e, daa):
    ninv, e, daa = _lists(ninv, e, daa)
    n = len(e)
    out = np.zeros((n * n, n * n))
    for p in range(n):
        for q in range(n):
            for u in range(n):
                for v in range(n):
                    out[p * n + q, u * n + v] = ninv[p][u] * e[q] * e[v] * math.exp(daa[q][v])
    return out
