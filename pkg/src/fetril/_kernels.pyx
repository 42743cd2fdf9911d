# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: greedy herding selection and the primal hinge solver.

Mirrors ``_kernels_py.py`` step for step; keep any algorithmic change
synchronized between the two files.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

BACKEND = "c"

cdef double ARMIJO_C1 = 1e-4
cdef int ARMIJO_MEMORY = 10
cdef int MAX_BACKTRACKS = 60


def herd_select(pool, target, int s):
    """Greedy herding: pick s pool rows whose running mean tracks ``target``.

    See the pure-python twin for the full contract. Returns
    (indices int64[s], residual_norms float64[s]).
    """
    cdef const double[:, ::1] P = np.ascontiguousarray(pool, dtype=np.float64)
    cdef const double[::1] tgt = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t d = P.shape[1]

    indices_arr = np.empty(s, dtype=np.int64)
    residuals_arr = np.empty(s, dtype=np.float64)
    cdef long long[::1] indices = indices_arr
    cdef double[::1] residuals = residuals_arr

    acc_arr = np.zeros(d, dtype=np.float64)
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] acc = acc_arr
    cdef unsigned char[::1] used = used_arr

    cdef Py_ssize_t t, i, j, best, used_count = 0
    cdef double best_val, dist, diff, inv_t

    for t in range(1, s + 1):
        inv_t = t
        best = -1
        best_val = INFINITY
        for i in range(n):
            if used[i]:
                continue
            dist = 0.0
            # literal criterion ||target - (acc + x_i)/t||^2 so that ties
            # resolve the same way as a direct recomputation
            for j in range(d):
                diff = tgt[j] - (acc[j] + P[i, j]) / inv_t
                dist += diff * diff
            if dist < best_val:
                best_val = dist
                best = i
        indices[t - 1] = best
        residuals[t - 1] = sqrt(best_val)
        for j in range(d):
            acc[j] += P[best, j]
        used[best] = 1
        used_count += 1
        if used_count == n:
            for i in range(n):
                used[i] = 0
            used_count = 0
    return indices_arr, residuals_arr


cdef double _obj_at(const double[:, ::1] xa, const double[::1] y, double[::1] w,
                    double[::1] p, double a, double[::1] scores,
                    double[::1] q, double c, bint squared) nogil:
    """Objective at w + a*p, using scores and q = xa @ p to avoid a matvec."""
    cdef Py_ssize_t n = xa.shape[0]
    cdef Py_ssize_t d = xa.shape[1]
    cdef Py_ssize_t i, j
    cdef double wj, wtw = 0.0, loss = 0.0, margin
    for j in range(d):
        wj = w[j] + a * p[j]
        wtw += wj * wj
    for i in range(n):
        margin = 1.0 - y[i] * (scores[i] + a * q[i])
        if margin > 0.0:
            if squared:
                loss += margin * margin
            else:
                loss += margin
    return 0.5 * wtw + c * loss


cdef void _grad_at(const double[:, ::1] xa, const double[::1] y, double[::1] w,
                   double[::1] scores, double c, bint squared,
                   double[::1] grad) nogil:
    cdef Py_ssize_t n = xa.shape[0]
    cdef Py_ssize_t d = xa.shape[1]
    cdef Py_ssize_t i, j
    cdef double margin, coef
    for j in range(d):
        grad[j] = w[j]
    for i in range(n):
        margin = 1.0 - y[i] * scores[i]
        if margin > 0.0:
            if squared:
                coef = 2.0 * c * margin * y[i]
            else:
                coef = c * y[i]
            for j in range(d):
                grad[j] -= coef * xa[i, j]


def svm_primal(xa, y, double c, double tol, int max_epochs, bint squared=True):
    """Full-batch BB descent on the primal l2-regularized hinge objective.

    See the pure-python twin for the full contract. Returns
    (w, epochs, objective) for the best iterate seen.
    """
    cdef const double[:, ::1] X = np.ascontiguousarray(xa, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]

    w_arr = np.zeros(d, dtype=np.float64)
    best_w_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] best_w = best_w_arr
    cdef double[::1] scores = np.zeros(n, dtype=np.float64)
    cdef double[::1] grad = np.empty(d, dtype=np.float64)
    cdef double[::1] grad_new = np.empty(d, dtype=np.float64)
    cdef double[::1] p = np.empty(d, dtype=np.float64)
    cdef double[::1] q = np.empty(n, dtype=np.float64)
    cdef double[::1] history = np.empty(ARMIJO_MEMORY, dtype=np.float64)

    cdef Py_ssize_t i, j, epoch, bt, hist_len = 1
    cdef int epochs = 0
    cdef double obj, obj_new, obj_trial, best_obj, alpha, a, gg, f_ref
    cdef double mean_row_sq = 0.0, dwdg, rel, acc_q
    cdef bint accepted

    # At w = 0 every margin is 1, so both losses start at c * n.
    obj = c * n
    _grad_at(X, Y, w, scores, c, squared, grad)

    for i in range(n):
        for j in range(d):
            mean_row_sq += X[i, j] * X[i, j]
    mean_row_sq /= n
    alpha = 1.0 / max(1.0, 2.0 * c * mean_row_sq)
    history[0] = obj
    best_obj = obj
    epochs = 0

    for epoch in range(1, max_epochs + 1):
        epochs = epoch
        gg = 0.0
        for j in range(d):
            p[j] = -grad[j]
            gg += grad[j] * grad[j]
        if gg == 0.0:
            break
        for i in range(n):
            acc_q = 0.0
            for j in range(d):
                acc_q += X[i, j] * p[j]
            q[i] = acc_q
        f_ref = history[0]
        for i in range(1, hist_len):
            if history[i] > f_ref:
                f_ref = history[i]
        a = alpha
        accepted = False
        for bt in range(MAX_BACKTRACKS):
            obj_trial = _obj_at(X, Y, w, p, a, scores, q, c, squared)
            if obj_trial <= f_ref - ARMIJO_C1 * a * gg:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
        for j in range(d):
            w[j] += a * p[j]
        for i in range(n):
            scores[i] += a * q[i]
        obj_new = obj_trial
        _grad_at(X, Y, w, scores, c, squared, grad_new)

        dwdg = 0.0
        for j in range(d):
            dwdg += p[j] * (grad_new[j] - grad[j])
        dwdg *= a
        if dwdg > 0.0:
            alpha = a * a * gg / dwdg
        else:
            alpha = a * 2.0
        alpha = min(max(alpha, 1e-10), 1e10)

        if obj_new < best_obj:
            best_obj = obj_new
            for j in range(d):
                best_w[j] = w[j]
        if hist_len < ARMIJO_MEMORY:
            history[hist_len] = obj_new
            hist_len += 1
        else:
            for i in range(ARMIJO_MEMORY - 1):
                history[i] = history[i + 1]
            history[ARMIJO_MEMORY - 1] = obj_new

        rel = (obj - obj_new) / max(abs(obj), 1e-300)
        obj = obj_new
        for j in range(d):
            grad[j] = grad_new[j]
        if 0.0 <= rel < tol:
            break

    return best_w_arr, epochs, best_obj
