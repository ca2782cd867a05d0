# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels.

Same signatures and semantics as ``_pykernels``; see that module for the
reference implementation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2, fabs, INFINITY, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

STATUS_OK = 0
STATUS_ANTIPODAL = 1

cdef double ANTIPODAL_EPS = 1e-8
cdef double SMALL_SIN = 1e-12
cdef double ARMIJO = 1e-4


cdef int _project_one(const double[:, ::1] A, double C, double tol, int max_iter,
                      double* v, double* a, double* d, double* ad,
                      int* iu, int* ju, int* sweeps) nogil:
    cdef int m = A.shape[0]
    cdef int q = 0
    cdef int i, j, e, sweep
    cdef double ve, ti, tj, target, new, change, max_change, scale, mism
    cdef bint interior = True
    for i in range(m):
        d[i] = 0.0
        ad[i] = A[i, i]
    for i in range(m):
        for j in range(i + 1, m):
            iu[q] = i
            ju[q] = j
            a[q] = 0.5 * (A[i, j] + A[j, i])
            ve = a[q]
            if ve > 0.0:
                ve = 0.0
                interior = False
            elif ve < -C:
                ve = -C
                interior = False
            v[q] = ve
            d[i] -= ve
            d[j] -= ve
            q += 1
    if interior:
        scale = 0.0
        for e in range(q):
            if fabs(a[e]) > scale:
                scale = fabs(a[e])
        mism = 0.0
        for i in range(m):
            if fabs(d[i] - ad[i]) > mism:
                mism = fabs(d[i] - ad[i])
        if mism <= 1e-9 * (1.0 + scale):
            sweeps[0] = 0
            return 1
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for e in range(q):
            i = iu[e]
            j = ju[e]
            ve = v[e]
            ti = d[i] + ve - ad[i]
            tj = d[j] + ve - ad[j]
            target = (2.0 * a[e] + ti + tj) * 0.25
            new = target
            if new < -C:
                new = -C
            if new > 0.0:
                new = 0.0
            if new != ve:
                change = fabs(new - ve)
                if change > max_change:
                    max_change = change
                v[e] = new
                d[i] -= new - ve
                d[j] -= new - ve
        if max_change < tol:
            sweeps[0] = sweep
            return 1
    sweeps[0] = max_iter
    return 0


def project_laplacians(A, double C, double tol, int max_iter):
    cdef double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t k = Av.shape[0]
    cdef int m = Av.shape[1]
    cdef int q = m * (m - 1) // 2
    out_arr = np.zeros((k, m, m), dtype=np.float64)
    conv_arr = np.zeros(k, dtype=np.uint8)
    sweeps_arr = np.zeros(k, dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef unsigned char[::1] conv = conv_arr
    cdef long long[::1] sw = sweeps_arr
    cdef double* v = <double*> malloc(max(q, 1) * sizeof(double))
    cdef double* a = <double*> malloc(max(q, 1) * sizeof(double))
    cdef double* d = <double*> malloc(m * sizeof(double))
    cdef double* ad = <double*> malloc(m * sizeof(double))
    cdef int* iu = <int*> malloc(max(q, 1) * sizeof(int))
    cdef int* ju = <int*> malloc(max(q, 1) * sizeof(int))
    cdef int nsw = 0
    cdef Py_ssize_t r
    cdef int e, i
    cdef double rs
    try:
        with nogil:
            for r in range(k):
                conv[r] = _project_one(Av[r], C, tol, max_iter, v, a, d, ad,
                                       iu, ju, &nsw)
                sw[r] = nsw
                for e in range(q):
                    out[r, iu[e], ju[e]] = v[e]
                    out[r, ju[e], iu[e]] = v[e]
                for i in range(m):
                    rs = 0.0
                    for e in range(m):
                        if e != i:
                            rs += out[r, i, e]
                    out[r, i, i] = -rs
    finally:
        free(v); free(a); free(d); free(ad); free(iu); free(ju)
    return out_arr, conv_arr.astype(bool), sweeps_arr


def isotonic_rows(Y):
    cdef double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t k = Yv.shape[0]
    cdef Py_ssize_t M = Yv.shape[1]
    out_arr = np.empty((k, M), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* vals = <double*> malloc(max(M, 1) * sizeof(double))
    cdef long long* cnts = <long long*> malloc(max(M, 1) * sizeof(long long))
    cdef Py_ssize_t r, t, top, b, pos
    cdef long long tot
    try:
        with nogil:
            for r in range(k):
                top = 0
                for t in range(M):
                    vals[top] = Yv[r, t]
                    cnts[top] = 1
                    top += 1
                    while top > 1 and vals[top - 2] > vals[top - 1]:
                        tot = cnts[top - 2] + cnts[top - 1]
                        vals[top - 2] = (vals[top - 2] * cnts[top - 2]
                                         + vals[top - 1] * cnts[top - 1]) / tot
                        cnts[top - 2] = tot
                        top -= 1
                pos = 0
                for b in range(top):
                    for t in range(cnts[b]):
                        out[r, pos] = vals[b]
                        pos += 1
    finally:
        free(vals); free(cnts)
    return out_arr


cdef int _sphere_eval(const double[:, ::1] Y, const double* u, const double* om,
                      int n, int r, double* f, double* g, double* tmp) nogil:
    """Objective and Riemannian gradient at ``om``; returns 0 on an antipodal pair."""
    cdef int j, l
    cdef double c, s, dd, fac, acc, gom
    f[0] = 0.0
    for l in range(r):
        g[l] = 0.0
    for j in range(n):
        c = 0.0
        for l in range(r):
            c += Y[j, l] * om[l]
        s = 0.0
        for l in range(r):
            tmp[l] = Y[j, l] - c * om[l]
            s += tmp[l] * tmp[l]
        s = sqrt(s)
        dd = atan2(s, c)
        if u[j] != 0.0 and dd > M_PI - ANTIPODAL_EPS:
            return 0
        f[0] += u[j] * dd * dd
        if s > SMALL_SIN:
            fac = dd / s
        else:
            fac = 1.0
        fac = -2.0 * u[j] * fac
        for l in range(r):
            g[l] += fac * tmp[l]
    gom = 0.0
    for l in range(r):
        gom += g[l] * om[l]
    for l in range(r):
        g[l] -= gom * om[l]
    return 1


cdef inline double _dot(const double* x, const double* y, int r) nogil:
    cdef double acc = 0.0
    cdef int l
    for l in range(r):
        acc += x[l] * y[l]
    return acc


cdef int _sphere_descent(const double[:, ::1] Y, const double* u, double* om,
                         int n, int r, double grad_tol, int max_iter,
                         double* f_out, int* conv, int* iters,
                         double* g, double* cand, double* gc, double* tmp) nogil:
    """Armijo Riemannian descent from ``om`` (updated in place); 0 on antipodal."""
    cdef double f, fc, gn2, step, t, nrm
    cdef int it, ls, l
    cdef bint accepted
    nrm = sqrt(_dot(om, om, r))
    for l in range(r):
        om[l] /= nrm
    if not _sphere_eval(Y, u, om, n, r, &f, g, tmp):
        iters[0] = 0
        return 0
    t = 0.5
    for it in range(1, max_iter + 1):
        gn2 = _dot(g, g, r)
        if sqrt(gn2) <= grad_tol:
            f_out[0] = f
            conv[0] = 1
            iters[0] = it - 1
            return 1
        step = 2.0 * t
        if step > 0.5:
            step = 0.5
        accepted = False
        for ls in range(60):
            for l in range(r):
                cand[l] = om[l] - step * g[l]
            nrm = sqrt(_dot(cand, cand, r))
            for l in range(r):
                cand[l] /= nrm
            if not _sphere_eval(Y, u, cand, n, r, &fc, gc, tmp):
                iters[0] = it
                return 0
            if fc <= f - ARMIJO * step * gn2:
                accepted = True
                break
            if gn2 < 1e-12 and _dot(gc, gc, r) < gn2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            f_out[0] = f
            conv[0] = 0
            iters[0] = it
            return 1
        for l in range(r):
            om[l] = cand[l]
            g[l] = gc[l]
        f = fc
        t = step
    f_out[0] = f
    conv[0] = 1 if sqrt(_dot(g, g, r)) <= grad_tol else 0
    iters[0] = max_iter
    return 1


def sphere_means(Y, W, double grad_tol, int max_iter, int restarts):
    cdef double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t k = Wv.shape[0]
    cdef int n = Yv.shape[0]
    cdef int r = Yv.shape[1]
    cdef int nstart_max = 1 + max(0, min(restarts, n))
    out_arr = np.zeros((k, r), dtype=np.float64)
    conv_arr = np.zeros(k, dtype=np.uint8)
    iters_arr = np.zeros(k, dtype=np.int64)
    status_arr = np.zeros(k, dtype=np.int64)
    # restart indices: largest |w| first, ties broken by lower index
    order_arr = np.argsort(-np.abs(np.asarray(Wv)), axis=1, kind="stable")[:, :nstart_max - 1]
    order_arr = np.ascontiguousarray(order_arr, dtype=np.int64)
    cdef long long[:, ::1] order = order_arr
    cdef double[:, ::1] out = out_arr
    cdef unsigned char[::1] conv = conv_arr
    cdef long long[::1] itv = iters_arr
    cdef long long[::1] stv = status_arr
    cdef double* u = <double*> malloc(max(n, 1) * sizeof(double))
    cdef double* om = <double*> malloc(r * sizeof(double))
    cdef double* g = <double*> malloc(r * sizeof(double))
    cdef double* cand = <double*> malloc(r * sizeof(double))
    cdef double* gc = <double*> malloc(r * sizeof(double))
    cdef double* tmp = <double*> malloc(r * sizeof(double))
    cdef Py_ssize_t row
    cdef int j, l, st, jmax, cv, it, total
    cdef double sw, nrm, best_f, f, wmax
    try:
        with nogil:
            for row in range(k):
                sw = 0.0
                for j in range(n):
                    sw += Wv[row, j]
                for j in range(n):
                    u[j] = Wv[row, j] / sw
                best_f = INFINITY
                total = 0
                for st in range(nstart_max):
                    if st == 0:
                        for l in range(r):
                            om[l] = 0.0
                        for j in range(n):
                            for l in range(r):
                                om[l] += u[j] * Yv[j, l]
                        nrm = sqrt(_dot(om, om, r))
                        if nrm <= 1e-12:
                            jmax = 0
                            wmax = Wv[row, 0]
                            for j in range(1, n):
                                if Wv[row, j] > wmax:
                                    wmax = Wv[row, j]
                                    jmax = j
                            for l in range(r):
                                om[l] = Yv[jmax, l]
                    else:
                        for l in range(r):
                            om[l] = Yv[order[row, st - 1], l]
                    if not _sphere_descent(Yv, u, om, n, r, grad_tol, max_iter,
                                           &f, &cv, &it, g, cand, gc, tmp):
                        total += it
                        stv[row] = 1
                        break
                    total += it
                    if f < best_f:
                        best_f = f
                        for l in range(r):
                            out[row, l] = om[l]
                        conv[row] = cv
                itv[row] = total
    finally:
        free(u); free(om); free(g); free(cand); free(gc); free(tmp)
    return out_arr, conv_arr.astype(bool), iters_arr, status_arr
