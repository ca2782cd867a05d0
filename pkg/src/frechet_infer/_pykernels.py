"""Pure-Python implementations of the numerical kernels.

Mirrors ``_ckernels.pyx`` call for call; used when the compiled module is
unavailable or when ``FRECHET_INFER_BACKEND=python`` is set.
"""

import math

import numpy as np

STATUS_OK = 0
STATUS_ANTIPODAL = 1

# d_j within this distance of pi is treated as an antipodal pair
ANTIPODAL_EPS = 1e-8
_SMALL_SIN = 1e-12
_ARMIJO = 1e-4


def _project_one(A, C, tol, max_iter):
    m = A.shape[0]
    iu, ju = np.triu_indices(m, 1)
    a = 0.5 * (A[iu, ju] + A[ju, iu])
    v = np.clip(a, -C, 0.0)
    adiag = np.diag(A).copy()
    diag = np.zeros(m)
    np.add.at(diag, iu, -v)
    np.add.at(diag, ju, -v)
    if np.array_equal(v, a):
        # interior point; only the diagonal can disagree with A
        scale = 1.0 + np.max(np.abs(a), initial=0.0)
        if np.max(np.abs(diag - adiag), initial=0.0) <= 1e-9 * scale:
            return v, True, 0
    iu_l = iu.tolist()
    ju_l = ju.tolist()
    a_l = a.tolist()
    v_l = v.tolist()
    d_l = diag.tolist()
    ad_l = adiag.tolist()
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for e in range(len(v_l)):
            i = iu_l[e]
            j = ju_l[e]
            ve = v_l[e]
            ti = d_l[i] + ve - ad_l[i]
            tj = d_l[j] + ve - ad_l[j]
            target = (2.0 * a_l[e] + ti + tj) * 0.25
            new = min(0.0, max(-C, target))
            if new != ve:
                if abs(new - ve) > max_change:
                    max_change = abs(new - ve)
                v_l[e] = new
                d_l[i] -= new - ve
                d_l[j] -= new - ve
        if max_change < tol:
            return np.array(v_l), True, sweep
    return np.array(v_l), False, max_iter


def project_laplacians(A, C, tol, max_iter):
    """Frobenius projections of symmetric zero-row-sum matrices onto the
    Laplacian set with off-diagonals in ``[-C, 0]``.

    ``A`` has shape ``(k, m, m)``. Returns ``(out, converged, sweeps)``.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    k, m, _ = A.shape
    out = np.empty_like(A)
    converged = np.ones(k, dtype=bool)
    sweeps = np.zeros(k, dtype=np.int64)
    iu, ju = np.triu_indices(m, 1)
    for r in range(k):
        v, ok, it = _project_one(A[r], C, tol, max_iter)
        L = np.zeros((m, m))
        L[iu, ju] = v
        L[ju, iu] = v
        L[np.diag_indices(m)] = -L.sum(axis=1)
        out[r] = L
        converged[r] = ok
        sweeps[r] = it
    return out, converged, sweeps


def _pava(y):
    n = y.shape[0]
    vals = np.empty(n)
    cnts = np.empty(n, dtype=np.int64)
    top = 0
    for x in y.tolist():
        vals[top] = x
        cnts[top] = 1
        top += 1
        while top > 1 and vals[top - 2] > vals[top - 1]:
            tot = cnts[top - 2] + cnts[top - 1]
            vals[top - 2] = (vals[top - 2] * cnts[top - 2]
                             + vals[top - 1] * cnts[top - 1]) / tot
            cnts[top - 2] = tot
            top -= 1
    return np.repeat(vals[:top], cnts[:top])


def isotonic_rows(Y):
    """Least-squares non-decreasing fit of every row of ``Y`` (unit weights)."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    out = np.empty_like(Y)
    for r in range(Y.shape[0]):
        out[r] = _pava(Y[r])
    return out


def _sphere_eval(omega, Y, u, tol_anti):
    c = Y @ omega
    T = Y - c[:, None] * omega
    s = np.sqrt(np.einsum("ij,ij->i", T, T))
    d = np.arctan2(s, c)
    active = u != 0.0
    if np.any(active & (d > math.pi - tol_anti)):
        return None, None
    f = float(np.dot(u, d * d))
    fac = np.ones_like(d)
    big = s > _SMALL_SIN
    fac[big] = d[big] / s[big]
    g = -2.0 * (u * fac) @ T
    # keep g in the tangent space despite rounding
    g -= np.dot(g, omega) * omega
    return f, g


def _sphere_descent(start, Y, u, grad_tol, max_iter):
    omega = start / np.linalg.norm(start)
    f, g = _sphere_eval(omega, Y, u, ANTIPODAL_EPS)
    if f is None:
        return None, 0.0, False, 0
    t = 0.5
    for it in range(1, max_iter + 1):
        gn2 = float(np.dot(g, g))
        if math.sqrt(gn2) <= grad_tol:
            return omega, f, True, it - 1
        # 0.5 is the Newton step when the normalised Hessian is 2I
        step = min(0.5, 2.0 * t)
        accepted = False
        for _ in range(60):
            cand = omega - step * g
            cand /= np.linalg.norm(cand)
            fc, gc = _sphere_eval(cand, Y, u, ANTIPODAL_EPS)
            if fc is None:
                return None, 0.0, False, it
            if fc <= f - _ARMIJO * step * gn2:
                accepted = True
                break
            if gn2 < 1e-12 and float(np.dot(gc, gc)) < gn2:
                # objective differences are below rounding here
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return omega, f, False, it
        omega, f, g, t = cand, fc, gc, step
    return omega, f, math.sqrt(float(np.dot(g, g))) <= grad_tol, max_iter


def sphere_means(Y, W, grad_tol, max_iter, restarts):
    """Weighted Fréchet means on the unit sphere, one per row of ``W``.

    Returns ``(out, converged, iterations, status)``; ``status`` is
    ``STATUS_ANTIPODAL`` for rows whose solve met an antipodal pair.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    k = W.shape[0]
    r = Y.shape[1]
    out = np.zeros((k, r))
    converged = np.zeros(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    status = np.zeros(k, dtype=np.int64)
    for row in range(k):
        w = W[row]
        u = w / w.sum()
        starts = []
        avg = u @ Y
        nrm = np.linalg.norm(avg)
        if nrm > 1e-12:
            starts.append(avg / nrm)
        else:
            starts.append(Y[int(np.argmax(w))].copy())
        if restarts > 0:
            # stable sort keeps lower indices first among ties
            order = np.argsort(-np.abs(w), kind="stable")[:restarts]
            starts.extend(Y[j].copy() for j in order)
        best_f = math.inf
        total = 0
        for s in starts:
            om, f, ok, it = _sphere_descent(s, Y, u, grad_tol, max_iter)
            total += it
            if om is None:
                status[row] = STATUS_ANTIPODAL
                break
            if f < best_f:
                best_f = f
                out[row] = om
                converged[row] = ok
        iters[row] = total
    return out, converged, iters, status
