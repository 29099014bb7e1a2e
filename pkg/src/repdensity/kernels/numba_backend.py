"""Numba-compiled sampler hot kernels.

Same contracts and randomness consumption as numpy_backend; all state lives
in caller-owned dense arrays so the compiled code is allocation-light.
"""

import math

import numpy as np
from numba import njit

LOG_PI = math.log(math.pi)

_DOWNDATE_RTOL = 1e-14


@njit(cache=True, nogil=True)
def _chol_update_jit(L, x):
    d = L.shape[0]
    for k in range(d):
        lkk = L[k, k]
        r = math.hypot(lkk, x[k])
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for i in range(k + 1, d):
            L[i, k] = (L[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]


@njit(cache=True, nogil=True)
def _chol_downdate_jit(L, x):
    d = L.shape[0]
    for k in range(d):
        lkk = L[k, k]
        r2 = lkk * lkk - x[k] * x[k]
        if r2 <= _DOWNDATE_RTOL * lkk * lkk:
            return False
        r = math.sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for i in range(k + 1, d):
            L[i, k] = (L[i, k] - s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]
    return True


def chol_update(L, x):
    """Rank-one update of a lower Cholesky factor: L L' + x x'. Destroys x."""
    _chol_update_jit(L, x)


def chol_downdate(L, x):
    """Rank-one downdate of a lower Cholesky factor; False on PD loss."""
    return _chol_downdate_jit(L, x)


@njit(cache=True, nogil=True)
def _logdet_from_chol(L):
    d = L.shape[0]
    acc = 0.0
    for i in range(d):
        acc += math.log(L[i, i])
    return 2.0 * acc


@njit(cache=True, nogil=True)
def _chol_factor(A, L):
    # lower factor of A into L; False when A is not positive definite
    d = A.shape[0]
    for i in range(d):
        for j in range(i + 1):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if acc <= 0.0:
                    return False
                L[i, i] = math.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
        for j in range(i + 1, d):
            L[i, j] = 0.0
    return True


@njit(cache=True, nogil=True)
def _slot_logpdf(x, count, ssum, chol, logdet, mu0, kappa0, nu0, ybuf):
    d = x.shape[0]
    kn = kappa0 + count
    nun = nu0 + count
    dof = nun - d + 1.0
    q0 = 0.0
    for r in range(d):
        acc = x[r] - (kappa0 * mu0[r] + ssum[r]) / kn
        for c2 in range(r):
            acc -= chol[r, c2] * ybuf[c2]
        yr = acc / chol[r, r]
        ybuf[r] = yr
        q0 += yr * yr
    smult = (kn + 1.0) / (kn * dof)
    q = q0 / smult
    logdet_t = logdet + d * math.log(smult)
    return (math.lgamma(0.5 * (dof + d)) - math.lgamma(0.5 * dof)
            - 0.5 * d * (math.log(dof) + LOG_PI)
            - 0.5 * logdet_t
            - 0.5 * (dof + d) * math.log1p(q / dof))


@njit(cache=True, nogil=True)
def _move_log_weights_jit(x, counts, sums, chols, logdets, n_slots, alpha,
                          mu0, kappa0, nu0, chol0, logdet0, zero,
                          cand, lw, ybuf):
    m = 0
    for s in range(n_slots):
        if counts[s] > 0:
            cand[m] = s
            lw[m] = math.log(counts[s]) + _slot_logpdf(
                x, counts[s], sums[s], chols[s], logdets[s],
                mu0, kappa0, nu0, ybuf)
            m += 1
    lw[m] = math.log(alpha) + _slot_logpdf(
        x, 0, zero, chol0, logdet0, mu0, kappa0, nu0, ybuf)
    return m


@njit(cache=True, nogil=True)
def _draw_categorical_jit(lw, m, u):
    # m candidate slots plus the fresh-component entry at index m
    best = lw[0]
    for j in range(1, m + 1):
        if lw[j] > best:
            best = lw[j]
    total = 0.0
    for j in range(m + 1):
        total += math.exp(lw[j] - best)
    r = u * total
    acc = 0.0
    for j in range(m + 1):
        acc += math.exp(lw[j] - best)
        if r < acc:
            return j
    return m


@njit(cache=True, nogil=True)
def _rebuild_slot_jit(X, assign, s, counts, sums, chols, logdets,
                      mu0, kappa0, psi0, psibuf, devbuf):
    n, d = X.shape
    c = 0
    for j in range(d):
        sums[s, j] = 0.0
    for i in range(n):
        if assign[i] == s:
            c += 1
            for j in range(d):
                sums[s, j] += X[i, j]
    counts[s] = c
    kn = kappa0 + c
    for a in range(d):
        for b2 in range(d):
            psibuf[a, b2] = psi0[a, b2]
    # centered scatter accumulated against the component mean
    for i in range(n):
        if assign[i] == s:
            for j in range(d):
                devbuf[j] = X[i, j] - sums[s, j] / c
            for a in range(d):
                for b2 in range(d):
                    psibuf[a, b2] += devbuf[a] * devbuf[b2]
    w = kappa0 * c / kn
    for j in range(d):
        devbuf[j] = sums[s, j] / c - mu0[j]
    for a in range(d):
        for b2 in range(d):
            psibuf[a, b2] += w * devbuf[a] * devbuf[b2]
    jitter = 1e-9
    for _ in range(8):
        if _chol_factor(psibuf, chols[s]):
            logdets[s] = _logdet_from_chol(chols[s])
            return
        for j in range(d):
            psibuf[j, j] += jitter
        jitter *= 10.0
    raise RuntimeError("component scale not factorizable after jitter")


@njit(cache=True, nogil=True)
def _remove_point_jit(X, i, assign, counts, sums, chols, logdets,
                      mu0, kappa0, psi0, vbuf, psibuf, devbuf):
    d = X.shape[1]
    s = assign[i]
    assign[i] = -1
    counts[s] -= 1
    for j in range(d):
        sums[s, j] -= X[i, j]
    if counts[s] > 0:
        kn = kappa0 + counts[s]
        f = math.sqrt(kn / (kn + 1.0))
        for j in range(d):
            vbuf[j] = f * (X[i, j] - (kappa0 * mu0[j] + sums[s, j]) / kn)
        if _chol_downdate_jit(chols[s], vbuf):
            logdets[s] = _logdet_from_chol(chols[s])
        else:
            _rebuild_slot_jit(X, assign, s, counts, sums, chols, logdets,
                              mu0, kappa0, psi0, psibuf, devbuf)


@njit(cache=True, nogil=True)
def _add_point_jit(X, i, t, assign, counts, sums, chols, logdets,
                   mu0, kappa0, chol0, logdet0, fresh, vbuf):
    d = X.shape[1]
    if fresh:
        for a in range(d):
            for b2 in range(d):
                chols[t, a, b2] = chol0[a, b2]
        counts[t] = 0
        for j in range(d):
            sums[t, j] = 0.0
    kn = kappa0 + counts[t]
    f = math.sqrt(kn / (kn + 1.0))
    for j in range(d):
        vbuf[j] = f * (X[i, j] - (kappa0 * mu0[j] + sums[t, j]) / kn)
    _chol_update_jit(chols[t], vbuf)
    counts[t] += 1
    for j in range(d):
        sums[t, j] += X[i, j]
    logdets[t] = _logdet_from_chol(chols[t])
    assign[i] = t


@njit(cache=True, nogil=True)
def _plain_sweep_jit(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                     mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms):
    n, d = X.shape
    cap = counts.shape[0]
    zero = np.zeros(d)
    cand = np.empty(cap, dtype=np.int64)
    lw = np.empty(cap + 1)
    ybuf = np.empty(d)
    vbuf = np.empty(d)
    psibuf = np.empty((d, d))
    devbuf = np.empty(d)
    for i in range(n):
        _remove_point_jit(X, i, assign, counts, sums, chols, logdets,
                          mu0, kappa0, psi0, vbuf, psibuf, devbuf)
        m = _move_log_weights_jit(X[i], counts, sums, chols, logdets,
                                  n_slots, alpha, mu0, kappa0, nu0,
                                  chol0, logdet0, zero, cand, lw, ybuf)
        j = _draw_categorical_jit(lw, m, uniforms[i])
        if j == m:
            _add_point_jit(X, i, n_slots, assign, counts, sums, chols,
                           logdets, mu0, kappa0, chol0, logdet0, True, vbuf)
            n_slots += 1
        else:
            _add_point_jit(X, i, cand[j], assign, counts, sums, chols,
                           logdets, mu0, kappa0, chol0, logdet0, False, vbuf)
    return n_slots


@njit(cache=True, nogil=True)
def _block_sweep_jit(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                     mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms,
                     perm, b):
    n, d = X.shape
    cap = counts.shape[0]
    zero = np.zeros(d)
    cand = np.empty(cap, dtype=np.int64)
    lw = np.empty(cap + 1)
    ybuf = np.empty(d)
    vbuf = np.empty(d)
    psibuf = np.empty((d, d))
    devbuf = np.empty(d)
    targets = np.empty(b, dtype=np.int64)
    pos = 0
    for start in range(0, n, b):
        stop = min(start + b, n)
        for p in range(start, stop):
            _remove_point_jit(X, perm[p], assign, counts, sums, chols,
                              logdets, mu0, kappa0, psi0, vbuf, psibuf,
                              devbuf)
        for p in range(start, stop):
            i = perm[p]
            m = _move_log_weights_jit(X[i], counts, sums, chols, logdets,
                                      n_slots, alpha, mu0, kappa0, nu0,
                                      chol0, logdet0, zero, cand, lw, ybuf)
            j = _draw_categorical_jit(lw, m, uniforms[pos])
            pos += 1
            targets[p - start] = cand[j] if j < m else -1
        for p in range(start, stop):
            i = perm[p]
            t = targets[p - start]
            if t < 0:
                _add_point_jit(X, i, n_slots, assign, counts, sums, chols,
                               logdets, mu0, kappa0, chol0, logdet0, True,
                               vbuf)
                n_slots += 1
            else:
                _add_point_jit(X, i, t, assign, counts, sums, chols, logdets,
                               mu0, kappa0, chol0, logdet0, False, vbuf)
    return n_slots


def plain_sweep(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms):
    """One full pass of single-site collapsed Gibbs; see numpy_backend."""
    return int(_plain_sweep_jit(X, assign, counts, sums, chols, logdets,
                                n_slots, alpha, mu0, kappa0, nu0, psi0,
                                chol0, logdet0, uniforms))


def block_sweep(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms, perm, b):
    """One blocked collapsed Gibbs pass; see numpy_backend."""
    return int(_block_sweep_jit(X, assign, counts, sums, chols, logdets,
                                n_slots, alpha, mu0, kappa0, nu0, psi0,
                                chol0, logdet0, uniforms, perm, b))


def move_log_weights(x, counts, sums, chols, logdets, n_slots, alpha,
                     mu0, kappa0, nu0, chol0, logdet0):
    """Unnormalized log weights for one assignment move; see numpy_backend."""
    d = x.shape[0]
    cand = np.empty(counts.shape[0], dtype=np.int64)
    lw = np.empty(counts.shape[0] + 1)
    ybuf = np.empty(d)
    m = _move_log_weights_jit(x, counts, sums, chols, logdets, n_slots,
                              alpha, mu0, kappa0, nu0, chol0, logdet0,
                              np.zeros(d), cand, lw, ybuf)
    return list(cand[:m]), lw[:m + 1].copy()


def rebuild_slot(X, assign, s, counts, sums, chols, logdets, mu0, kappa0,
                 psi0):
    """Recompute one component's posterior scale factor from scratch."""
    d = X.shape[1]
    _rebuild_slot_jit(X, assign, s, counts, sums, chols, logdets,
                      mu0, kappa0, psi0, np.empty((d, d)), np.empty(d))
