"""Two-phase revised simplex for LPs with bounded variables and ranged rows.

The problem handled is

    min c'x   s.t.  row_lo <= A x <= row_hi,   col_lo <= x <= col_hi

Each row i gets a logical column s_i = (A x)_i carrying the row bounds, so the
equality system is ``A x - s = 0``.  Rows whose logical starts outside its
bounds receive an artificial column; phase one drives the artificials to zero.
The basis inverse is kept explicitly, updated by elementary row operations
after each pivot and recomputed from scratch every ``refactor_every`` pivots.

Pricing is Dantzig's rule. When a run of degenerate pivots revisits a basis
(detected with an additive hash of the basic index set) the solver switches to
Bland's smallest-index rule until the objective moves again.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# status codes returned by the kernel
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3
SINGULAR = 4

_BASIC = 0
_AT_LO = 1
_AT_HI = 2
_FREE = 3

_HASH_RING = 4096


@njit(cache=True, nogil=True)
def _refactor(basis, x, status, n, m, indptr, indices, data, art_sign, Binv):
    """Rebuild the basis inverse and recompute basic values from nonbasic ones."""
    B = np.zeros((m, m))
    for k in range(m):
        j = basis[k]
        if j < n:
            for p in range(indptr[j], indptr[j + 1]):
                B[indices[p], k] = data[p]
        elif j < n + m:
            B[j - n, k] = -1.0
        else:
            B[j - n - m, k] = art_sign[j - n - m]
    Binv[:, :] = np.linalg.inv(B)
    ok = True
    for k in range(m):
        for i in range(m):
            if not np.isfinite(Binv[k, i]):
                ok = False
    _recompute_basics(basis, x, status, n, m, indptr, indices, data, art_sign, Binv)
    return ok


@njit(cache=True, nogil=True)
def _recompute_basics(basis, x, status, n, m, indptr, indices, data, art_sign, Binv):
    """x_B = B^-1 (-N x_N) using the current inverse."""
    w = np.zeros(m)
    ntot = x.size
    for j in range(ntot):
        if status[j] == _BASIC or x[j] == 0.0:
            continue
        if j < n:
            for p in range(indptr[j], indptr[j + 1]):
                w[indices[p]] -= data[p] * x[j]
        elif j < n + m:
            w[j - n] += x[j]
        else:
            w[j - n - m] -= art_sign[j - n - m] * x[j]
    for k in range(m):
        s = 0.0
        for i in range(m):
            s += Binv[k, i] * w[i]
        x[basis[k]] = s


@njit(cache=True, nogil=True)
def _run_phase(cost, lo, hi, x, status, basis, Binv, n, m, indptr, indices, data,
               art_sign, feas_tol, opt_tol, piv_tol, max_iter, refactor_every, hash_w, iters):
    """Iterate until optimal for ``cost``. Returns (code, iterations used)."""
    ntot = x.size
    y = np.zeros(m)
    alpha = np.zeros(m)
    seen = np.zeros(_HASH_RING, dtype=np.uint64)
    n_seen = 0
    bland = False
    h = np.uint64(0)
    for k in range(m):
        h += hash_w[basis[k]]
    since_refactor = 0
    fresh_duals = True
    it = iters
    while True:
        if it >= max_iter:
            return ITERATION_LIMIT, it
        if since_refactor >= refactor_every:
            if not _refactor(basis, x, status, n, m, indptr, indices, data, art_sign, Binv):
                return SINGULAR, it
            since_refactor = 0
            fresh_duals = True
        if fresh_duals:
            # y' = c_B' B^-1 from scratch; between refactors it is updated per pivot
            y[:] = 0.0
            for k in range(m):
                ck = cost[basis[k]]
                if ck != 0.0:
                    for i in range(m):
                        y[i] += ck * Binv[k, i]
            fresh_duals = False
        # pricing
        q = -1
        best = 0.0
        q_dir = 0
        d_q = 0.0
        for j in range(ntot):
            st = status[j]
            if st == _BASIC or lo[j] == hi[j]:
                continue
            # column helpers are inlined by hand: calls taking arrays are costly here
            if j < n:
                aty = 0.0
                for p in range(indptr[j], indptr[j + 1]):
                    aty += data[p] * y[indices[p]]
            elif j < n + m:
                aty = -y[j - n]
            else:
                aty = art_sign[j - n - m] * y[j - n - m]
            d = cost[j] - aty
            direction = 0
            if st == _AT_LO and d < -opt_tol:
                direction = 1
            elif st == _AT_HI and d > opt_tol:
                direction = -1
            elif st == _FREE and abs(d) > opt_tol:
                direction = 1 if d < 0 else -1
            if direction == 0:
                continue
            if bland:
                q = j
                q_dir = direction
                d_q = d
                break
            if abs(d) > best:
                best = abs(d)
                q = j
                q_dir = direction
                d_q = d
        if q < 0:
            return OPTIMAL, it
        # alpha = B^-1 a_q
        if q < n:
            alpha[:] = 0.0
            for p in range(indptr[q], indptr[q + 1]):
                r = indices[p]
                v = data[p]
                for i in range(m):
                    alpha[i] += Binv[i, r] * v
        elif q < n + m:
            for i in range(m):
                alpha[i] = -Binv[i, q - n]
        else:
            for i in range(m):
                alpha[i] = Binv[i, q - n - m] * art_sign[q - n - m]
        # ratio test; basic k moves by -q_dir * alpha[k] per unit step.
        # Entries small relative to the column are treated as zero, and the
        # first pass relaxes bounds by feas_tol so the second can prefer the
        # largest pivot among near-ties (Harris).
        amax = 0.0
        for k in range(m):
            if abs(alpha[k]) > amax:
                amax = abs(alpha[k])
        tol_k = piv_tol * max(1.0, amax)
        t_max = np.inf
        for k in range(m):
            rate = -q_dir * alpha[k]
            v = basis[k]
            if rate < -tol_k and lo[v] > -np.inf:
                t = (x[v] - lo[v] + feas_tol) / (-rate)
            elif rate > tol_k and hi[v] < np.inf:
                t = (hi[v] - x[v] + feas_tol) / rate
            else:
                continue
            if t < t_max:
                t_max = t
        leave = -1
        t_min = np.inf
        if t_max < np.inf:
            best_piv = 0.0
            for k in range(m):
                rate = -q_dir * alpha[k]
                v = basis[k]
                if rate < -tol_k and lo[v] > -np.inf:
                    t = (x[v] - lo[v]) / (-rate)
                elif rate > tol_k and hi[v] < np.inf:
                    t = (hi[v] - x[v]) / rate
                else:
                    continue
                if t > t_max:
                    continue
                if bland:
                    if leave < 0 or v < basis[leave]:
                        leave = k
                        t_min = t
                elif abs(alpha[k]) > best_piv:
                    best_piv = abs(alpha[k])
                    leave = k
                    t_min = t
            if t_min < 0.0:
                t_min = 0.0
        t_flip = hi[q] - lo[q]
        if leave < 0 and not t_flip < np.inf:
            return UNBOUNDED, it
        it += 1
        if t_flip <= t_min:
            step = t_flip
            for k in range(m):
                x[basis[k]] -= q_dir * step * alpha[k]
            if q_dir > 0:
                x[q] = hi[q]
                status[q] = _AT_HI
            else:
                x[q] = lo[q]
                status[q] = _AT_LO
            degenerate = step <= 1e-12
        else:
            step = t_min
            for k in range(m):
                x[basis[k]] -= q_dir * step * alpha[k]
            x[q] += q_dir * step
            v = basis[leave]
            rate = -q_dir * alpha[leave]
            if rate < 0:
                x[v] = lo[v]
                status[v] = _AT_LO
            else:
                x[v] = hi[v]
                status[v] = _AT_HI
            status[q] = _BASIC
            basis[leave] = q
            h += hash_w[q] - hash_w[v]
            piv = alpha[leave]
            for i in range(m):
                Binv[leave, i] /= piv
            for k in range(m):
                if k == leave or alpha[k] == 0.0:
                    continue
                f = alpha[k]
                for i in range(m):
                    Binv[k, i] -= f * Binv[leave, i]
            for i in range(m):
                y[i] += d_q * Binv[leave, i]
            since_refactor += 1
            degenerate = step <= 1e-12
        if degenerate:
            if not bland:
                for s_ in range(n_seen):
                    if seen[s_] == h:
                        bland = True
                        break
                if not bland:
                    if n_seen < _HASH_RING:
                        seen[n_seen] = h
                        n_seen += 1
                    else:
                        bland = True
        else:
            n_seen = 0
            bland = False


@njit(cache=True, nogil=True)
def simplex_kernel(c, indptr, indices, data, m, n, row_lo, row_hi, col_lo, col_hi,
                   feas_tol, opt_tol, piv_tol, max_iter, refactor_every):
    """Minimize c'x. Returns (code, x[:n], iterations, phase-one residual)."""
    ntot = n + 2 * m
    lo = np.empty(ntot)
    hi = np.empty(ntot)
    x = np.zeros(ntot)
    status = np.empty(ntot, dtype=np.int8)
    art_sign = np.ones(m)
    lo[:n] = col_lo
    hi[:n] = col_hi
    lo[n:n + m] = row_lo
    hi[n:n + m] = row_hi
    lo[n + m:] = 0.0
    hi[n + m:] = 0.0
    for j in range(n):
        if lo[j] > -np.inf:
            x[j] = lo[j]
            status[j] = _AT_LO
        elif hi[j] < np.inf:
            x[j] = hi[j]
            status[j] = _AT_HI
        else:
            x[j] = 0.0
            status[j] = _FREE
    for j in range(n, ntot):
        status[j] = _AT_LO
    act = np.zeros(m)
    for j in range(n):
        if x[j] != 0.0:
            for p in range(indptr[j], indptr[j + 1]):
                act[indices[p]] += data[p] * x[j]
    basis = np.empty(m, dtype=np.int64)
    Binv = np.zeros((m, m))
    # crash: a column singleton at a bound can often absorb a row's residual
    single = np.full(m, -1, dtype=np.int64)
    for j in range(n):
        if indptr[j + 1] - indptr[j] == 1 and status[j] != _FREE:
            r = indices[indptr[j]]
            if single[r] < 0:
                single[r] = j
    n_art = 0
    for i in range(m):
        s = n + i
        a = n + m + i
        j = single[i]
        if j >= 0 and (act[i] < lo[s] - feas_tol or act[i] > hi[s] + feas_tol):
            target = lo[s] if act[i] < lo[s] else hi[s]
            v = data[indptr[j]]
            xj = x[j] + (target - act[i]) / v
            if lo[j] - feas_tol <= xj <= hi[j] + feas_tol:
                x[s] = target
                status[s] = _AT_LO if target == lo[s] else _AT_HI
                x[j] = xj
                status[j] = _BASIC
                basis[i] = j
                Binv[i, i] = 1.0 / v
                continue
        if act[i] < lo[s] - feas_tol:
            x[s] = lo[s]
            status[s] = _AT_LO
            art_sign[i] = 1.0
        elif act[i] > hi[s] + feas_tol:
            x[s] = hi[s]
            status[s] = _AT_HI
            art_sign[i] = -1.0
        else:
            x[s] = act[i]
            status[s] = _BASIC
            basis[i] = s
            Binv[i, i] = -1.0
            continue
        # artificial: act - s + sign * a = 0
        x[a] = abs(x[s] - act[i])
        hi[a] = np.inf
        status[a] = _BASIC
        basis[i] = a
        Binv[i, i] = art_sign[i]
        n_art += 1
    hash_w = np.empty(ntot, dtype=np.uint64)
    state = np.uint64(0x9E3779B97F4A7C15)
    for j in range(ntot):
        # splitmix64
        state += np.uint64(0x9E3779B97F4A7C15)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        hash_w[j] = z ^ (z >> np.uint64(31))
    iters = 0
    residual = 0.0
    if n_art > 0:
        cost1 = np.zeros(ntot)
        cost1[n + m:] = 1.0
        code, iters = _run_phase(cost1, lo, hi, x, status, basis, Binv, n, m, indptr, indices,
                                 data, art_sign, feas_tol, opt_tol, piv_tol, max_iter, refactor_every,
                                 hash_w, iters)
        if code != OPTIMAL:
            return code, x[:n].copy(), iters, residual
        scale = 1.0
        for i in range(m):
            for b in (row_lo[i], row_hi[i]):
                if np.isfinite(b) and abs(b) > scale:
                    scale = abs(b)
        for i in range(m):
            residual += max(x[n + m + i], 0.0)
        if residual > feas_tol * scale:
            return INFEASIBLE, x[:n].copy(), iters, residual
        for i in range(m):
            hi[n + m + i] = 0.0
    cost2 = np.zeros(ntot)
    cost2[:n] = c
    code, iters = _run_phase(cost2, lo, hi, x, status, basis, Binv, n, m, indptr, indices,
                             data, art_sign, feas_tol, opt_tol, piv_tol, max_iter, refactor_every,
                             hash_w, iters)
    if code == OPTIMAL:
        # clear accumulated drift in the basic values
        _recompute_basics(basis, x, status, n, m, indptr, indices, data, art_sign, Binv)
    return code, x[:n].copy(), iters, residual


@njit(cache=True, nogil=True)
def simplex_batch(C, indptr, indices, data, m, n, row_lo, row_hi, col_lo, col_hi,
                  feas_tol, opt_tol, piv_tol, max_iter, refactor_every):
    """Solve one LP per row of ``C``/``row_lo``/... sharing a constraint matrix."""
    S = C.shape[0]
    codes = np.empty(S, dtype=np.int64)
    X = np.empty((S, n))
    iters = np.empty(S, dtype=np.int64)
    for s in range(S):
        code, x, it, _ = simplex_kernel(C[s], indptr, indices, data, m, n, row_lo[s], row_hi[s],
                                        col_lo[s], col_hi[s], feas_tol, opt_tol, piv_tol,
                                        max_iter, refactor_every)
        codes[s] = code
        X[s] = x
        iters[s] = it
    return codes, X, iters
