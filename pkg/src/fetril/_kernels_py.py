"""Pure-numpy implementations of the hot kernels.

These mirror the compiled kernels in ``_kernels.pyx`` step for step; the two
backends are interchangeable up to floating-point reduction order. Keep any
algorithmic change synchronized between the two files.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

# Non-monotone Armijo parameters (shared with the compiled kernel).
_ARMIJO_C1 = 1e-4
_ARMIJO_MEMORY = 10
_MAX_BACKTRACKS = 60


def herd_select(pool: np.ndarray, target: np.ndarray, s: int):
    """Greedy herding: pick s pool rows whose running mean tracks ``target``.

    At step t the chosen row minimizes ||target - running_mean_t|| over the
    rows not yet used in the current pass; ties go to the lowest row index.
    When the pool is exhausted a fresh greedy pass starts while the running
    sum keeps accumulating.

    Returns (indices int64[s], residual_norms float64[s]).
    """
    pool = np.ascontiguousarray(pool, dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    n = pool.shape[0]
    indices = np.empty(s, dtype=np.int64)
    residuals = np.empty(s, dtype=np.float64)
    acc = np.zeros(pool.shape[1], dtype=np.float64)
    used = np.zeros(n, dtype=bool)
    used_count = 0
    for t in range(1, s + 1):
        # literal criterion ||target - (acc + x_i)/t||^2 so that ties resolve
        # the same way as a direct recomputation
        dist = ((target[None, :] - (acc[None, :] + pool) / t) ** 2).sum(axis=1)
        dist[used] = np.inf
        i = int(np.argmin(dist))
        indices[t - 1] = i
        residuals[t - 1] = np.sqrt(dist[i])
        acc += pool[i]
        used[i] = True
        used_count += 1
        if used_count == n:
            used[:] = False
            used_count = 0
    return indices, residuals


def _hinge_obj(w, scores, y, c, squared):
    margin = 1.0 - y * scores
    if squared:
        viol = margin > 0.0
        loss = float(np.sum(margin[viol] ** 2))
    else:
        loss = float(np.sum(np.maximum(margin, 0.0)))
    return 0.5 * float(w @ w) + c * loss


def _hinge_grad(xa, w, scores, y, c, squared):
    margin = 1.0 - y * scores
    viol = margin > 0.0
    if squared:
        coef = np.where(viol, 2.0 * c * margin, 0.0)
    else:
        coef = np.where(viol, c, 0.0)
    return w - xa.T @ (y * coef)


def svm_primal(xa: np.ndarray, y: np.ndarray, c: float, tol: float,
               max_epochs: int, squared: bool = True):
    """Full-batch descent on the primal l2-regularized hinge objective.

        min_w  0.5 ||w||^2 + c * sum_i loss(1 - y_i * (w . xa_i))

    with loss(m) = max(0, m)^2 (squared hinge, default) or max(0, m).
    Steps use the Barzilai-Borwein rule safeguarded by a non-monotone Armijo
    backtracking line search; iteration stops when the relative objective
    decrease drops below ``tol`` or after ``max_epochs`` epochs. Deterministic
    for fixed inputs.

    ``xa`` already carries the bias column. Returns (w, epochs, objective)
    for the best iterate seen.
    """
    xa = np.ascontiguousarray(xa, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = xa.shape
    w = np.zeros(d)
    scores = np.zeros(n)
    obj = _hinge_obj(w, scores, y, c, squared)
    grad = _hinge_grad(xa, w, scores, y, c, squared)

    mean_row_sq = float(np.einsum("ij,ij->", xa, xa)) / n
    alpha = 1.0 / max(1.0, 2.0 * c * mean_row_sq)
    history = [obj]
    best_obj = obj
    best_w = w.copy()
    epochs = 0

    for epoch in range(1, max_epochs + 1):
        epochs = epoch
        gg = float(grad @ grad)
        if gg == 0.0:
            break
        p = -grad
        q = xa @ p
        f_ref = max(history)
        a = alpha
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            w_trial = w + a * p
            obj_trial = _hinge_obj(w_trial, scores + a * q, y, c, squared)
            if obj_trial <= f_ref - _ARMIJO_C1 * a * gg:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
        w = w_trial
        scores = scores + a * q
        obj_new = obj_trial
        grad_new = _hinge_grad(xa, w, scores, y, c, squared)

        dwdg = a * float(p @ (grad_new - grad))
        if dwdg > 0.0:
            alpha = a * a * gg / dwdg
        else:
            alpha = a * 2.0
        alpha = min(max(alpha, 1e-10), 1e10)

        if obj_new < best_obj:
            best_obj = obj_new
            best_w = w.copy()
        history.append(obj_new)
        if len(history) > _ARMIJO_MEMORY:
            history.pop(0)

        rel = (obj - obj_new) / max(abs(obj), 1e-300)
        obj = obj_new
        grad = grad_new
        if 0.0 <= rel < tol:
            break

    return best_w, epochs, best_obj
