"""Hot numeric kernels with two interchangeable backends.

The default backend compiles the inner loops with numba; setting the
environment variable ``NETCLUST_NO_NUMBA=1`` selects a pure-numpy path
instead. Both backends expose the same functions with the same contracts;
``benchmarks/backend_bench.py`` compares their throughput.

Reductions that feed iterative state (conditional-affinity sums, the
Student-t normalizer, per-point gradients, recentering) are computed over
sorted copies of their addends. A sorted sum is a function of the addend
multiset only, so reordering the input rows of a distance matrix permutes
the outputs bitwise instead of perturbing them.
"""

import os
import warnings

import numpy as np

_LN2 = float(np.log(2.0))


def numba_disabled_by_env() -> bool:
    return os.environ.get("NETCLUST_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# pure-numpy backend
# ---------------------------------------------------------------------------

def _msum_np(a):
    # sum over the sorted multiset: invariant under any reordering of a
    return float(np.sum(np.sort(a, axis=None)))


def _csr_matvec_np(indptr, indices, data, x):
    if data.size == 0:
        return np.zeros(indptr.size - 1)
    return np.add.reduceat(data * x[indices], indptr[:-1])


def cg_solve_numpy(indptr, indices, data, inv_diag, b, tol, max_iter):
    """Jacobi-preconditioned CG for the (singular, consistent) Laplacian system.

    Returns ``(x, rel_residual, iterations, converged)``. The caller is
    responsible for projecting b orthogonal to the all-ones vector.
    """
    n = b.size
    x = np.zeros(n)
    b_norm = float(np.sqrt(np.dot(b, b)))
    if b_norm == 0.0:
        return x, 0.0, 0, True
    r = b.copy()
    z = r * inv_diag
    p = z.copy()
    rz = float(np.dot(r, z))
    rel = 1.0
    for it in range(1, int(max_iter) + 1):
        ap = _csr_matvec_np(indptr, indices, data, p)
        pap = float(np.dot(p, ap))
        if pap <= 0.0:
            return x, rel, it, False
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = float(np.sqrt(np.dot(r, r))) / b_norm
        if rel <= tol:
            r_true = b - _csr_matvec_np(indptr, indices, data, x)
            rel = float(np.sqrt(np.dot(r_true, r_true))) / b_norm
            if rel <= tol:
                return x, rel, it, True
            r = r_true
            z = r * inv_diag
            p = z.copy()
            rz = float(np.dot(r, z))
            continue
        z = r * inv_diag
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, rel, int(max_iter), False


def _row_entropy_np(dsq_shifted, beta):
    # dsq_shifted has its minimum at 0, so the largest weight is exp(0)=1
    w = np.exp(-beta * dsq_shifted)
    s = _msum_np(w)
    wd = _msum_np(w * dsq_shifted)
    h_nat = np.log(s) + beta * wd / s
    return h_nat / _LN2, w, s

def calibrate_row_numpy(dsq, log2_target, tol, max_iter):
    """Binary search for the Gaussian precision matching a target perplexity.

    ``dsq`` holds squared distances to the other points. Returns
    ``(beta, probabilities, achieved_log2_perplexity, converged)``.
    """
    m = dsq.size
    shift = float(np.min(dsq))
    dsq_s = dsq - shift
    mean_dsq = _msum_np(dsq) / m
    beta = 1.0 if mean_dsq <= 0.0 else 1.0 / mean_dsq
    lo, hi = 0.0, np.inf
    h, w, s = _row_entropy_np(dsq_s, beta)
    for _ in range(int(max_iter)):
        diff = h - log2_target
        if abs(diff) < tol:
            return beta, w / s, h, True
        if diff > 0.0:
            lo = beta
            beta = beta * 2.0 if not np.isfinite(hi) else (beta + hi) / 2.0
        else:
            hi = beta
            beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
        h, w, s = _row_entropy_np(dsq_s, beta)
    return beta, w / s, h, False


def calibrate_affinities_numpy(dist_sq, log2_target, tol, max_iter):
    """Per-row bandwidth search over a squared-distance matrix.

    Returns ``(betas, conditional, bad_row)`` where ``conditional`` is the
    row-stochastic affinity matrix with a zero diagonal and ``bad_row`` is
    the first row whose search failed (-1 when all rows converged).
    """
    n = dist_sq.shape[0]
    betas = np.zeros(n)
    cond = np.zeros((n, n))
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        beta, probs, _, ok = calibrate_row_numpy(dist_sq[i][mask[i]], log2_target, tol, max_iter)
        if not ok:
            return betas, cond, i
        betas[i] = beta
        cond[i][mask[i]] = probs
    return betas, cond, -1


def _student_t_np(y):
    diff = y[:, None, :] - y[None, :, :]
    num = 1.0 / (1.0 + np.sum(diff * diff, axis=2))
    np.fill_diagonal(num, 0.0)
    return num, diff


def _normalizer_np(num):
    # two-level sorted sum: per-row multisets, then the row-total multiset
    row = np.sum(np.sort(num, axis=1), axis=1)
    return _msum_np(row)


def _kl_np(p, num, z):
    mask = p > 0.0
    terms = p[mask] * (np.log(p[mask]) - np.log(num[mask]) + np.log(z))
    return _msum_np(terms)


def tsne_grad_kl_numpy(p, y):
    """KL divergence and its analytic gradient at embedding ``y``."""
    num, diff = _student_t_np(y)
    z = _normalizer_np(num)
    w = (p - num / z) * num
    grad = 4.0 * np.sum(np.sort(w[:, :, None] * diff, axis=1), axis=1)
    return grad, _kl_np(p, num, z)


def tsne_run_numpy(p, y0, n_iter, lr, exag, exag_iters, mom_early, mom_late, min_gain):
    """Momentum gradient descent on the tSNE objective; returns (Y, kl0, kl1)."""
    n = p.shape[0]
    y = y0.copy()
    vel = np.zeros((n, 2))
    gains = np.ones((n, 2))
    num, diff = _student_t_np(y)
    z = _normalizer_np(num)
    kl_init = _kl_np(p, num, z)
    for it in range(int(n_iter)):
        if it > 0:
            num, diff = _student_t_np(y)
            z = _normalizer_np(num)
        exagf = exag if it < exag_iters else 1.0
        mom = mom_early if it < exag_iters else mom_late
        w = (p * exagf - num / z) * num
        grad = 4.0 * np.sum(np.sort(w[:, :, None] * diff, axis=1), axis=1)
        same_dir = (grad > 0.0) == (vel > 0.0)
        gains = np.where(same_dir, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, min_gain)
        vel = mom * vel - lr * (gains * grad)
        y = y + vel
        y[:, 0] -= _msum_np(y[:, 0]) / n
        y[:, 1] -= _msum_np(y[:, 1]) / n
    num, _ = _student_t_np(y)
    z = _normalizer_np(num)
    return y, kl_init, _kl_np(p, num, z)


_NUMPY_BACKEND = {
    "cg_solve": cg_solve_numpy,
    "calibrate_row": calibrate_row_numpy,
    "calibrate_affinities": calibrate_affinities_numpy,
    "tsne_run": tsne_run_numpy,
    "tsne_grad_kl": tsne_grad_kl_numpy,
}


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

BACKENDS = {"numpy": _NUMPY_BACKEND}
_HAVE_NUMBA = False

if not numba_disabled_by_env():
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba import failed; falling back to the numpy backend")

if _HAVE_NUMBA:
    _jit = njit(cache=True, nogil=True)

    @_jit
    def _msum_nb(a):
        # exactly-rounded sum via non-overlapping partials (the math.fsum
        # algorithm): the result is a pure function of the addend multiset,
        # so it is reorder-proof like a sorted sum but far cheaper than
        # sorting inside the hot loop. Inputs must be finite; 66 slots
        # exceed the maximum number of non-overlapping float64 partials.
        partials = np.empty(66)
        n_part = 0
        for k in range(a.size):
            x = a[k]
            i = 0
            for j in range(n_part):
                y = partials[j]
                if abs(x) < abs(y):
                    t = x
                    x = y
                    y = t
                hi = x + y
                lo = y - (hi - x)
                if lo != 0.0:
                    partials[i] = lo
                    i += 1
                x = hi
            if not np.isfinite(x):
                # non-finite input or intermediate overflow: exactness is
                # moot, and NaNs would grow the partial list without bound
                s = 0.0
                for k2 in range(a.size):
                    s += a[k2]
                return s
            partials[i] = x
            n_part = i + 1
        if n_part == 0:
            return 0.0
        j = n_part - 1
        hi = partials[j]
        lo = 0.0
        while j > 0:
            x = hi
            j -= 1
            y = partials[j]
            hi = x + y
            yr = hi - x
            lo = y - yr
            if lo != 0.0:
                break
        # round the leftover half-ulp toward the remaining partials' sign
        if j > 0 and ((lo < 0.0 and partials[j - 1] < 0.0)
                      or (lo > 0.0 and partials[j - 1] > 0.0)):
            y = lo * 2.0
            x = hi + y
            if y == x - hi:
                hi = x
        return hi

    @_jit
    def _csr_matvec_nb(indptr, indices, data, x, out):
        n = indptr.size - 1
        for i in range(n):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * x[indices[k]]
            out[i] = s

    @_jit
    def cg_solve_numba(indptr, indices, data, inv_diag, b, tol, max_iter):
        n = b.size
        x = np.zeros(n)
        b_norm = np.sqrt(np.dot(b, b))
        if b_norm == 0.0:
            return x, 0.0, 0, True
        r = b.copy()
        z = r * inv_diag
        p = z.copy()
        ap = np.empty(n)
        rz = np.dot(r, z)
        rel = 1.0
        for it in range(1, max_iter + 1):
            _csr_matvec_nb(indptr, indices, data, p, ap)
            pap = np.dot(p, ap)
            if pap <= 0.0:
                return x, rel, it, False
            alpha = rz / pap
            for i in range(n):
                x[i] += alpha * p[i]
                r[i] -= alpha * ap[i]
            rel = np.sqrt(np.dot(r, r)) / b_norm
            if rel <= tol:
                _csr_matvec_nb(indptr, indices, data, x, ap)
                for i in range(n):
                    r[i] = b[i] - ap[i]
                rel = np.sqrt(np.dot(r, r)) / b_norm
                if rel <= tol:
                    return x, rel, it, True
                for i in range(n):
                    z[i] = r[i] * inv_diag[i]
                    p[i] = z[i]
                rz = np.dot(r, z)
                continue
            rz_new = 0.0
            for i in range(n):
                z[i] = r[i] * inv_diag[i]
            rz_new = np.dot(r, z)
            beta = rz_new / rz
            for i in range(n):
                p[i] = z[i] + beta * p[i]
            rz = rz_new
        return x, rel, max_iter, False

    @_jit
    def _row_entropy_nb(dsq_shifted, beta, w):
        m = dsq_shifted.size
        for j in range(m):
            w[j] = np.exp(-beta * dsq_shifted[j])
        s = _msum_nb(w)
        wd = _msum_nb(w * dsq_shifted)
        return (np.log(s) + beta * wd / s) / _LN2, s

    @_jit
    def calibrate_row_numba(dsq, log2_target, tol, max_iter):
        m = dsq.size
        shift = dsq[0]
        for j in range(1, m):
            if dsq[j] < shift:
                shift = dsq[j]
        dsq_s = dsq - shift
        mean_dsq = _msum_nb(dsq) / m
        beta = 1.0 if mean_dsq <= 0.0 else 1.0 / mean_dsq
        lo = 0.0
        hi = np.inf
        w = np.empty(m)
        h, s = _row_entropy_nb(dsq_s, beta, w)
        for _ in range(max_iter):
            diff = h - log2_target
            if abs(diff) < tol:
                return beta, w / s, h, True
            if diff > 0.0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
            h, s = _row_entropy_nb(dsq_s, beta, w)
        return beta, w / s, h, False

    @_jit
    def calibrate_affinities_numba(dist_sq, log2_target, tol, max_iter):
        n = dist_sq.shape[0]
        betas = np.zeros(n)
        cond = np.zeros((n, n))
        dsq = np.empty(n - 1)
        for i in range(n):
            k = 0
            for j in range(n):
                if j != i:
                    dsq[k] = dist_sq[i, j]
                    k += 1
            beta, probs, _, ok = calibrate_row_numba(dsq, log2_target, tol, max_iter)
            if not ok:
                return betas, cond, i
            betas[i] = beta
            k = 0
            for j in range(n):
                if j != i:
                    cond[i, j] = probs[k]
                    k += 1
        return betas, cond, -1

    @_jit
    def _student_t_nb(y, num):
        n = y.shape[0]
        for i in range(n):
            for j in range(n):
                dx = y[i, 0] - y[j, 0]
                dy = y[i, 1] - y[j, 1]
                num[i, j] = 1.0 / (1.0 + (dx * dx + dy * dy))
            num[i, i] = 0.0

    @_jit
    def _normalizer_nb(num, rows):
        n = num.shape[0]
        for i in range(n):
            rows[i] = _msum_nb(num[i])
        return _msum_nb(rows)

    @_jit
    def _kl_nb(p, num, z):
        n = p.shape[0]
        terms = np.empty(n * n)
        k = 0
        logz = np.log(z)
        for i in range(n):
            for j in range(n):
                if p[i, j] > 0.0:
                    terms[k] = p[i, j] * (np.log(p[i, j]) - np.log(num[i, j]) + logz)
                    k += 1
        return _msum_nb(terms[:k])

    @_jit
    def _gradient_nb(p, num, z, y, exagf, grad, tx, ty):
        n = p.shape[0]
        for i in range(n):
            for j in range(n):
                w = (p[i, j] * exagf - num[i, j] / z) * num[i, j]
                tx[j] = w * (y[i, 0] - y[j, 0])
                ty[j] = w * (y[i, 1] - y[j, 1])
            grad[i, 0] = 4.0 * _msum_nb(tx)
            grad[i, 1] = 4.0 * _msum_nb(ty)

    @_jit
    def tsne_grad_kl_numba(p, y):
        n = p.shape[0]
        num = np.empty((n, n))
        rows = np.empty(n)
        grad = np.empty((n, 2))
        tx = np.empty(n)
        ty = np.empty(n)
        _student_t_nb(y, num)
        z = _normalizer_nb(num, rows)
        _gradient_nb(p, num, z, y, 1.0, grad, tx, ty)
        return grad, _kl_nb(p, num, z)

    @_jit
    def tsne_run_numba(p, y0, n_iter, lr, exag, exag_iters, mom_early, mom_late, min_gain):
        n = p.shape[0]
        y = y0.copy()
        vel = np.zeros((n, 2))
        gains = np.ones((n, 2))
        num = np.empty((n, n))
        rows = np.empty(n)
        grad = np.empty((n, 2))
        tx = np.empty(n)
        ty = np.empty(n)
        _student_t_nb(y, num)
        z = _normalizer_nb(num, rows)
        kl_init = _kl_nb(p, num, z)
        for it in range(n_iter):
            if it > 0:
                _student_t_nb(y, num)
                z = _normalizer_nb(num, rows)
            exagf = exag if it < exag_iters else 1.0
            mom = mom_early if it < exag_iters else mom_late
            _gradient_nb(p, num, z, y, exagf, grad, tx, ty)
            for i in range(n):
                for c in range(2):
                    if (grad[i, c] > 0.0) == (vel[i, c] > 0.0):
                        gains[i, c] *= 0.8
                    else:
                        gains[i, c] += 0.2
                    if gains[i, c] < min_gain:
                        gains[i, c] = min_gain
                    vel[i, c] = mom * vel[i, c] - lr * gains[i, c] * grad[i, c]
                    y[i, c] += vel[i, c]
            for c in range(2):
                mean = _msum_nb(y[:, c].copy()) / n
                for i in range(n):
                    y[i, c] -= mean
        _student_t_nb(y, num)
        z = _normalizer_nb(num, rows)
        return y, kl_init, _kl_nb(p, num, z)

    BACKENDS["numba"] = {
        "cg_solve": cg_solve_numba,
        "calibrate_row": calibrate_row_numba,
        "calibrate_affinities": calibrate_affinities_numba,
        "tsne_run": tsne_run_numba,
        "tsne_grad_kl": tsne_grad_kl_numba,
    }


ACTIVE_BACKEND = "numba" if _HAVE_NUMBA else "numpy"
_active = BACKENDS[ACTIVE_BACKEND]

cg_solve = _active["cg_solve"]
calibrate_row = _active["calibrate_row"]
calibrate_affinities = _active["calibrate_affinities"]
tsne_run = _active["tsne_run"]
tsne_grad_kl = _active["tsne_grad_kl"]


def warmup():
    """Trigger JIT compilation on tiny inputs so timings exclude compile cost."""
    if ACTIVE_BACKEND != "numba":
        return
    indptr = np.array([0, 1, 2], dtype=np.int64)
    indices = np.array([1, 0], dtype=np.int64)
    data = np.array([-1.0, -1.0])
    # 2-node Laplacian with diagonal folded in: use the real structure
    indptr = np.array([0, 2, 4], dtype=np.int64)
    indices = np.array([0, 1, 0, 1], dtype=np.int64)
    data = np.array([1.0, -1.0, -1.0, 1.0])
    inv_diag = np.array([1.0, 1.0])
    b = np.array([0.5, -0.5])
    cg_solve(indptr, indices, data, inv_diag, b, 1e-10, 50)
    dsq = np.array([[0.0, 1.0, 4.0, 2.0], [1.0, 0.0, 1.0, 3.0],
                    [4.0, 1.0, 0.0, 1.0], [2.0, 3.0, 1.0, 0.0]])
    _, cond, _ = calibrate_affinities(dsq, 1.0, 1e-5, 200)
    pj = (cond + cond.T) / (2.0 * 4)
    y0 = np.array([[0.01, 0.0], [0.0, 0.01], [-0.01, 0.0], [0.0, -0.01]])
    tsne_run(pj, y0, 3, 10.0, 4.0, 2, 0.5, 0.8, 0.01)
    tsne_grad_kl(pj, y0)
