# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the functions in ``_kernels_py``.

Same signatures, same semantics; results agree with the NumPy versions to
floating-point roundoff (summation order inside a point is fixed).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, fabs, fmax

cnp.import_array()

cdef double EPS = 1e-12


def beta_terms(obs, model, double beta):
    cdef cnp.ndarray[double, ndim=1] o = np.ascontiguousarray(obs, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] m = np.ascontiguousarray(model, dtype=np.float64).ravel()
    cdef Py_ssize_t n = m.shape[0], i
    cdef cnp.ndarray[double, ndim=1] neg = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] pos = np.empty(n)
    cdef double* op = &o[0] if n else NULL
    cdef double* mp = &m[0] if n else NULL
    cdef double* negp = &neg[0] if n else NULL
    cdef double* posp = &pos[0] if n else NULL
    cdef double mi, p, bm1 = beta - 1.0
    # branch-free loops per case so the compiler can vectorise exp/log
    with nogil:
        if beta == 1.0:
            for i in range(n):
                mi = fmax(mp[i], EPS)
                posp[i] = 1.0
                negp[i] = op[i] / mi
        elif beta == 2.0:
            for i in range(n):
                mi = fmax(mp[i], EPS)
                posp[i] = mi
                negp[i] = op[i]
        else:
            for i in range(n):
                mi = fmax(mp[i], EPS)
                p = exp(bm1 * log(mi))
                posp[i] = p
                negp[i] = op[i] * p / mi
    shape = np.shape(model)
    return neg.reshape(shape), pos.reshape(shape)


def beta_div_sum(a, b, double beta):
    cdef cnp.ndarray[double, ndim=1] av = np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] bv = np.ascontiguousarray(b, dtype=np.float64).ravel()
    cdef Py_ssize_t n = av.shape[0], i
    cdef double* ap = &av[0] if n else NULL
    cdef double* bp = &bv[0] if n else NULL
    cdef double s = 0.0, x, y, r, lx, ly
    # unbounded cases first; the loops below assume finite terms
    if beta <= 0.0 and n and np.any(av <= 0.0):
        return float("inf")
    with nogil:
        if beta == 0.0:
            for i in range(n):
                r = ap[i] / fmax(bp[i], EPS)
                s += r - log(r) - 1.0
        elif beta == 1.0:
            for i in range(n):
                x = ap[i]
                y = fmax(bp[i], EPS)
                # x log(x/y) -> 0 as x -> 0
                lx = log(fmax(x, 1e-300))
                s += (x * (lx - log(y)) if x > 0.0 else 0.0) + y - x
        else:
            # same rearrangement around expm1 as the NumPy version
            for i in range(n):
                x = ap[i]
                y = fmax(bp[i], EPS)
                ly = log(y)
                r = exp((beta - 1.0) * ly)
                if x <= 0.0:
                    s += y * r / beta
                    continue
                lx = log(x) - ly
                if beta < 0.5:
                    s += (y * r * expm1(beta * lx) / beta - x * r + y * r) / (beta - 1.0)
                else:
                    s += (x * r * (expm1((beta - 1.0) * lx) / (beta - 1.0) - 1.0) + y * r) / beta
    return float(s)


def local_cov(x, win):
    cdef cnp.ndarray[complex, ndim=3] X = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=2] W = np.ascontiguousarray(win, dtype=np.float64)
    cdef Py_ssize_t F = X.shape[0], L = X.shape[1], M = X.shape[2]
    cdef Py_ssize_t P = W.shape[0], Q = W.shape[1]
    cdef Py_ssize_t hp = P // 2, hq = Q // 2
    cdef cnp.ndarray[complex, ndim=4] out = np.zeros((F, L, M, M), dtype=np.complex128)
    cdef Py_ssize_t f, l, a, b, i, j, ff, ll
    cdef double g, wsum
    cdef double complex xi, xj, acc
    with nogil:
        for f in range(F):
            for l in range(L):
                wsum = 0.0
                for a in range(P):
                    ff = f + a - hp
                    if ff < 0 or ff >= F:
                        continue
                    for b in range(Q):
                        ll = l + b - hq
                        if ll < 0 or ll >= L:
                            continue
                        g = W[a, b]
                        if g == 0.0:
                            continue
                        wsum = wsum + g
                        for i in range(M):
                            xi = X[ff, ll, i]
                            for j in range(i, M):
                                xj = X[ff, ll, j]
                                out[f, l, i, j] = out[f, l, i, j] + g * (xi * xj.conjugate())
                for i in range(M):
                    out[f, l, i, i] = out[f, l, i, i].real / wsum
                    for j in range(i + 1, M):
                        acc = out[f, l, i, j] / wsum
                        out[f, l, i, j] = acc
                        out[f, l, j, i] = acc.conjugate()
    return out


cdef int _invert(double complex* A, double complex* Ainv, Py_ssize_t M) nogil:
    """Gauss-Jordan inverse with partial pivoting; A is destroyed."""
    cdef Py_ssize_t i, j, k, piv
    cdef double best, mag
    cdef double complex t, fct
    for i in range(M):
        for j in range(M):
            Ainv[i * M + j] = 1.0 if i == j else 0.0
    for k in range(M):
        piv = k
        best = fabs(A[k * M + k].real) + fabs(A[k * M + k].imag)
        for i in range(k + 1, M):
            mag = fabs(A[i * M + k].real) + fabs(A[i * M + k].imag)
            if mag > best:
                best = mag
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(M):
                t = A[k * M + j]
                A[k * M + j] = A[piv * M + j]
                A[piv * M + j] = t
                t = Ainv[k * M + j]
                Ainv[k * M + j] = Ainv[piv * M + j]
                Ainv[piv * M + j] = t
        fct = 1.0 / A[k * M + k]
        for j in range(M):
            A[k * M + j] = A[k * M + j] * fct
            Ainv[k * M + j] = Ainv[k * M + j] * fct
        for i in range(M):
            if i == k:
                continue
            fct = A[i * M + k]
            if fct == 0.0:
                continue
            for j in range(M):
                A[i * M + j] = A[i * M + j] - fct * A[k * M + j]
                Ainv[i * M + j] = Ainv[i * M + j] - fct * Ainv[k * M + j]
    return 0


def smooth_gains(sc, sx, double mu, double delta, double floor):
    cdef cnp.ndarray[complex, ndim=5] C = np.ascontiguousarray(sc, dtype=np.complex128)
    cdef cnp.ndarray[complex, ndim=4] S = np.ascontiguousarray(sx, dtype=np.complex128)
    cdef Py_ssize_t N = C.shape[0], F = C.shape[1], L = C.shape[2], M = C.shape[3]
    cdef cnp.ndarray[complex, ndim=5] G = np.empty_like(C)
    cdef cnp.ndarray[complex, ndim=1] work = np.empty(M * M, dtype=np.complex128)
    cdef cnp.ndarray[complex, ndim=1] inv = np.empty(M * M, dtype=np.complex128)
    cdef cnp.ndarray[complex, ndim=1] cn = np.empty(M * M, dtype=np.complex128)
    cdef double complex* w = &work[0]
    cdef double complex* iv = &inv[0]
    cdef double complex* cp = &cn[0]
    cdef Py_ssize_t n, f, l, i, j, k
    cdef double tr, load
    cdef double complex acc, det, a00, a01, a10, a11
    cdef int bad = 0
    with nogil:
        for f in range(F):
            for l in range(L):
                tr = 0.0
                for i in range(M):
                    tr = tr + S[f, l, i, i].real
                load = delta * tr / M
                if load < floor:
                    load = floor
                load = load / N
                for n in range(N):
                    for i in range(M):
                        for j in range(M):
                            acc = C[n, f, l, i, j]
                            if i == j:
                                acc = acc + load
                            cp[i * M + j] = acc
                            acc = (1.0 - mu) * S[f, l, i, j] + mu * acc
                            if i == j:
                                acc = acc + (1.0 - mu) * N * load
                            w[i * M + j] = acc
                    if M == 1:
                        G[n, f, l, 0, 0] = cp[0] / w[0]
                        continue
                    if M == 2:
                        a00 = w[0]
                        a01 = w[1]
                        a10 = w[2]
                        a11 = w[3]
                        # multiply by the adjugate first and divide by det last;
                        # at mu=1 this reproduces the identity to roundoff
                        det = a00 * a11 - a01 * a10
                        iv[0] = cp[0] * a11 - cp[1] * a10
                        iv[1] = cp[1] * a00 - cp[0] * a01
                        iv[2] = cp[2] * a11 - cp[3] * a10
                        iv[3] = cp[3] * a00 - cp[2] * a01
                        for i in range(4):
                            G[n, f, l, i // 2, i % 2] = iv[i] / det
                        continue
                    elif _invert(w, iv, M) != 0:
                        bad = 1
                        break
                    for i in range(M):
                        for j in range(M):
                            acc = 0.0
                            for k in range(M):
                                acc = acc + cp[i * M + k] * iv[k * M + j]
                            G[n, f, l, i, j] = acc
                if bad:
                    break
            if bad:
                break
    if bad:
        raise np.linalg.LinAlgError("singular regularised covariance")
    return G
