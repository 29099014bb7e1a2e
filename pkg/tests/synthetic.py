"""Shared synthetic constructions for sampler-backed tests.

Recovery-style tests hand-build their priors here: weak location pull
(small pseudo-count) with the scale matrix sized to the data, which lets
chains started from a single component actually nucleate new ones at desk
scale.
"""

import numpy as np

from repdensity import NIWParams


def recovery_prior(X, kappa0=1.0):
    """Moderate data-scaled prior for mixture-recovery constructions."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    nu0 = float(d + 2)
    var = np.maximum(X.var(axis=0), 1e-9)
    return NIWParams(mu0=X.mean(axis=0), kappa0=kappa0, nu0=nu0,
                     psi0=np.diag(var * (nu0 - d - 1.0)))


def antipodal_mixture(rng, n, d, n_components=8, total_var=1.0,
                      within_frac=0.1):
    """Mixture over antipodal sign-pattern corners with matched total variance.

    Component means sit at (+-c, ..., +-c) chosen as antipodal pairs so the
    population mean is zero; per-dimension variance is c^2 + within, with
    c^2 = (1 - within_frac) * total_var. Returns (points, component index).
    """
    assert n_components % 2 == 0
    within = within_frac * total_var
    c = np.sqrt((1.0 - within_frac) * total_var)
    half = n_components // 2
    signs = np.ones((half, d))
    for k in range(half):
        flips = rng.permutation(d)[:rng.integers(0, d + 1)]
        signs[k, flips] = -1.0
    # force distinct rows by flipping one extra coordinate on collisions
    for k in range(1, half):
        while any(np.array_equal(signs[k], signs[j]) for j in range(k)):
            signs[k, rng.integers(0, d)] *= -1.0
    means = np.concatenate([signs, -signs]) * c
    comp = rng.integers(0, n_components, size=n)
    pts = means[comp] + rng.standard_normal((n, d)) * np.sqrt(within)
    return pts, comp


def gaussian_class(rng, n, d, total_var=1.0):
    """Single isotropic Gaussian with the same total variance."""
    return rng.standard_normal((n, d)) * np.sqrt(total_var)
