"""Pure numpy/scipy implementations of the sampler hot kernels.

Reference semantics for the numba backend. Both backends expose the same
functions and consume randomness identically (one uniform per assignment
move, supplied by the caller), so a fixed seed gives matching chains up to
floating-point rounding.
"""

import math

import numpy as np
from scipy.linalg import solve_triangular

LOG_PI = math.log(math.pi)

# relative tolerance below which a rank-one downdate is declared failed
_DOWNDATE_RTOL = 1e-14


def chol_update(L, x):
    """Rank-one update of a lower Cholesky factor: L L' + x x'. Destroys x."""
    d = L.shape[0]
    for k in range(d):
        r = math.hypot(L[k, k], x[k])
        c = r / L[k, k]
        s = x[k] / L[k, k]
        L[k, k] = r
        if k + 1 < d:
            L[k + 1:, k] = (L[k + 1:, k] + s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]


def chol_downdate(L, x):
    """Rank-one downdate of a lower Cholesky factor: L L' - x x'. Destroys x.

    Returns False (leaving L partially modified) when the downdate would
    lose positive-definiteness; callers must then rebuild from scratch.
    """
    d = L.shape[0]
    for k in range(d):
        r2 = L[k, k] * L[k, k] - x[k] * x[k]
        if r2 <= _DOWNDATE_RTOL * L[k, k] * L[k, k]:
            return False
        r = math.sqrt(r2)
        c = r / L[k, k]
        s = x[k] / L[k, k]
        L[k, k] = r
        if k + 1 < d:
            L[k + 1:, k] = (L[k + 1:, k] - s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * L[k + 1:, k]
    return True


def _logdet_from_chol(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _slot_logpdf(x, count, ssum, chol, logdet, mu0, kappa0, nu0):
    """Student-t posterior-predictive log-density of x under one component.

    count == 0 with ssum == 0 evaluates the prior predictive.
    """
    d = x.shape[0]
    kn = kappa0 + count
    nun = nu0 + count
    dof = nun - d + 1.0
    mun = (kappa0 * mu0 + ssum) / kn
    y = solve_triangular(chol, x - mun, lower=True, check_finite=False)
    smult = (kn + 1.0) / (kn * dof)
    q = float(y @ y) / smult
    logdet_t = logdet + d * math.log(smult)
    return (math.lgamma(0.5 * (dof + d)) - math.lgamma(0.5 * dof)
            - 0.5 * d * (math.log(dof) + LOG_PI)
            - 0.5 * logdet_t
            - 0.5 * (dof + d) * math.log1p(q / dof))


def move_log_weights(x, counts, sums, chols, logdets, n_slots, alpha,
                     mu0, kappa0, nu0, chol0, logdet0):
    """Unnormalized log weights for one assignment move.

    Returns (slots, lw): candidate occupied slots and their log weights,
    with the fresh-component option appended as the final entry of lw.
    """
    slots = [s for s in range(n_slots) if counts[s] > 0]
    lw = np.empty(len(slots) + 1)
    for j, s in enumerate(slots):
        lw[j] = math.log(counts[s]) + _slot_logpdf(
            x, counts[s], sums[s], chols[s], logdets[s], mu0, kappa0, nu0)
    zero = np.zeros_like(mu0)
    lw[-1] = math.log(alpha) + _slot_logpdf(
        x, 0, zero, chol0, logdet0, mu0, kappa0, nu0)
    return slots, lw


def _draw_categorical(lw, u):
    p = np.exp(lw - lw.max())
    c = np.cumsum(p)
    return min(int(np.searchsorted(c, u * c[-1], side="right")), len(lw) - 1)


def rebuild_slot(X, assign, s, counts, sums, chols, logdets, mu0, kappa0, psi0):
    """Recompute one component's posterior scale factor from scratch."""
    rows = X[assign == s]
    c = rows.shape[0]
    ssum = rows.sum(axis=0)
    counts[s] = c
    sums[s] = ssum
    kn = kappa0 + c
    xbar = ssum / c
    centered = rows - xbar
    dev = xbar - mu0
    psi = psi0 + centered.T @ centered + (kappa0 * c / kn) * np.outer(dev, dev)
    jitter = 1e-9
    for _ in range(8):
        try:
            chols[s] = np.linalg.cholesky(psi)
            logdets[s] = _logdet_from_chol(chols[s])
            return
        except np.linalg.LinAlgError:
            psi = psi + jitter * np.eye(psi.shape[0])
            jitter *= 10.0
    raise np.linalg.LinAlgError("component scale not factorizable after jitter")


def _remove_point(X, i, assign, counts, sums, chols, logdets,
                  mu0, kappa0, psi0):
    x = X[i]
    s = assign[i]
    assign[i] = -1
    counts[s] -= 1
    sums[s] -= x
    if counts[s] > 0:
        kn = kappa0 + counts[s]
        mun = (kappa0 * mu0 + sums[s]) / kn
        v = math.sqrt(kn / (kn + 1.0)) * (x - mun)
        if chol_downdate(chols[s], v):
            logdets[s] = _logdet_from_chol(chols[s])
        else:
            rebuild_slot(X, assign, s, counts, sums, chols, logdets,
                         mu0, kappa0, psi0)


def _add_point(X, i, t, assign, counts, sums, chols, logdets,
               mu0, kappa0, chol0, logdet0, fresh):
    x = X[i]
    if fresh:
        chols[t] = chol0
        counts[t] = 0
        sums[t] = 0.0
    kn = kappa0 + counts[t]
    mun = (kappa0 * mu0 + sums[t]) / kn
    v = math.sqrt(kn / (kn + 1.0)) * (x - mun)
    chol_update(chols[t], v)
    counts[t] += 1
    sums[t] += x
    logdets[t] = _logdet_from_chol(chols[t])
    assign[i] = t


def plain_sweep(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms):
    """One full pass of single-site collapsed Gibbs over all observations.

    Mutates the slot arrays in place; returns the new slot high-water mark.
    Fresh components always take slot n_slots (emptied slots stay dead until
    the caller compacts), so slot order equals creation order.
    """
    n = X.shape[0]
    for i in range(n):
        _remove_point(X, i, assign, counts, sums, chols, logdets,
                      mu0, kappa0, psi0)
        slots, lw = move_log_weights(X[i], counts, sums, chols, logdets,
                                     n_slots, alpha, mu0, kappa0, nu0,
                                     chol0, logdet0)
        j = _draw_categorical(lw, uniforms[i])
        if j == len(slots):
            _add_point(X, i, n_slots, assign, counts, sums, chols, logdets,
                       mu0, kappa0, chol0, logdet0, fresh=True)
            n_slots += 1
        else:
            _add_point(X, i, slots[j], assign, counts, sums, chols, logdets,
                       mu0, kappa0, chol0, logdet0, fresh=False)
    return n_slots


def block_sweep(X, assign, counts, sums, chols, logdets, n_slots, alpha,
                mu0, kappa0, nu0, psi0, chol0, logdet0, uniforms, perm, b):
    """One blocked collapsed Gibbs pass.

    Blocks are consecutive b-sized batches of the supplied permutation (the
    last one may be shorter). All members of a block are removed first, each
    member's assignment is then drawn independently from the conditional
    given the outside-block state, and every fresh-component draw within a
    block creates its own new component.
    """
    n = X.shape[0]
    pos = 0
    for start in range(0, n, b):
        block = perm[start:start + b]
        for i in block:
            _remove_point(X, i, assign, counts, sums, chols, logdets,
                          mu0, kappa0, psi0)
        targets = np.empty(len(block), dtype=np.int64)
        for k, i in enumerate(block):
            slots, lw = move_log_weights(X[i], counts, sums, chols, logdets,
                                         n_slots, alpha, mu0, kappa0, nu0,
                                         chol0, logdet0)
            j = _draw_categorical(lw, uniforms[pos])
            pos += 1
            targets[k] = slots[j] if j < len(slots) else -1
        for k, i in enumerate(block):
            if targets[k] < 0:
                _add_point(X, i, n_slots, assign, counts, sums, chols,
                           logdets, mu0, kappa0, chol0, logdet0, fresh=True)
                n_slots += 1
            else:
                _add_point(X, i, targets[k], assign, counts, sums, chols,
                           logdets, mu0, kappa0, chol0, logdet0, fresh=False)
    return n_slots
