"""Normal-Inverse-Wishart conjugacy.

Exact posterior updates, incremental add/remove of observations through
rank-one Cholesky updates, and the closed-form multivariate Student-t
posterior predictive (density and sampler).
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import (NumericalError, ParameterError, UnderflowError_,
                     ValidationError)

LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class NIWParams:
    """Hyperparameters of the conjugate base distribution.

    Parameters
    ----------
    mu0 : ndarray (d,)
        Location.
    kappa0 : float
        Positive pseudo-count scaling the location confidence.
    nu0 : float
        Degrees of freedom, must exceed d - 1.
    psi0 : ndarray (d, d)
        Symmetric positive-definite scale matrix.
    """

    mu0: np.ndarray
    kappa0: float
    nu0: float
    psi0: np.ndarray

    def __post_init__(self):
        mu0 = np.ascontiguousarray(self.mu0, dtype=np.float64).reshape(-1)
        psi0 = np.ascontiguousarray(self.psi0, dtype=np.float64)
        d = mu0.shape[0]
        if psi0.shape != (d, d):
            raise ParameterError(
                f"psi0 shape {psi0.shape} does not match dimension {d}")
        if not self.kappa0 > 0:
            raise ParameterError(f"kappa0 must be positive, got {self.kappa0}")
        if not self.nu0 > d - 1:
            raise ParameterError(
                f"nu0 must exceed d - 1 = {d - 1}, got {self.nu0}")
        if not np.allclose(psi0, psi0.T, atol=1e-10):
            raise ParameterError("psi0 must be symmetric")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "kappa0", float(self.kappa0))
        object.__setattr__(self, "nu0", float(self.nu0))
        object.__setattr__(self, "psi0", psi0)
        try:
            np.linalg.cholesky(psi0)
        except np.linalg.LinAlgError:
            raise ParameterError("psi0 is not positive definite") from None

    @property
    def d(self):
        return self.mu0.shape[0]

    @cached_property
    def chol_psi0(self):
        return np.linalg.cholesky(self.psi0)

    @cached_property
    def log_det_psi0(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_psi0))))


class ComponentStats:
    """Sufficient statistics of one mixture component, kept incrementally.

    Stores the observation count, the running sum and the lower Cholesky
    factor of the posterior scale matrix; with count == 0 the posterior
    equals the prior exactly.
    """

    __slots__ = ("count", "sum", "chol_psi", "log_det")

    def __init__(self, count, sum_, chol_psi, log_det):
        self.count = int(count)
        self.sum = np.asarray(sum_, dtype=np.float64)
        self.chol_psi = np.asarray(chol_psi, dtype=np.float64)
        self.log_det = float(log_det)

    @classmethod
    def empty(cls, prior):
        """Statistics of a component with no observations."""
        return cls(0, np.zeros(prior.d), prior.chol_psi0.copy(),
                   prior.log_det_psi0)

    @classmethod
    def from_data(cls, prior, observations):
        """Batch-computed statistics over a set of observations."""
        obs = np.atleast_2d(np.asarray(observations, dtype=np.float64))
        if obs.size == 0:
            return cls.empty(prior)
        post = posterior_update(prior, obs)
        chol = np.linalg.cholesky(post.psi0)
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return cls(obs.shape[0], obs.sum(axis=0), chol, log_det)

    def copy(self):
        return ComponentStats(self.count, self.sum.copy(),
                              self.chol_psi.copy(), self.log_det)

    def posterior(self, prior):
        """Updated hyperparameters (kn, nun, mun, Psi_n) as NIWParams."""
        kn = prior.kappa0 + self.count
        return NIWParams(
            mu0=(prior.kappa0 * prior.mu0 + self.sum) / kn,
            kappa0=kn,
            nu0=prior.nu0 + self.count,
            psi0=self.chol_psi @ self.chol_psi.T,
        )


def posterior_update(prior, observations):
    """Closed-form conjugate update over a batch of observations.

    Standard update: kn = kappa0 + n, nun = nu0 + n,
    mun = (kappa0 mu0 + n xbar) / kn and
    Psi_n = Psi_0 + S + (kappa0 n / kn)(xbar - mu0)(xbar - mu0)' with S the
    scatter about xbar. Empty input returns the prior unchanged.
    """
    obs = np.atleast_2d(np.asarray(observations, dtype=np.float64))
    if obs.size == 0:
        return prior
    n, d = obs.shape
    if d != prior.d:
        raise ParameterError(
            f"observation dimension {d} does not match prior {prior.d}")
    xbar = obs.mean(axis=0)
    centered = obs - xbar
    scatter = centered.T @ centered
    kn = prior.kappa0 + n
    dev = xbar - prior.mu0
    psin = prior.psi0 + scatter + (prior.kappa0 * n / kn) * np.outer(dev, dev)
    psin = 0.5 * (psin + psin.T)
    return NIWParams(
        mu0=(prior.kappa0 * prior.mu0 + n * xbar) / kn,
        kappa0=kn,
        nu0=prior.nu0 + n,
        psi0=psin,
    )


def _check_vector(x, prior):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != prior.d:
        raise ParameterError(
            f"vector dimension {x.shape[0]} does not match prior {prior.d}")
    return x


def add_observation(stats, x, prior):
    """Fold one observation into the statistics (in place; returns stats).

    Rank-one Cholesky update, O(d^2); equivalent to the batch posterior
    over the enlarged set.
    """
    x = _check_vector(x, prior)
    if not np.isfinite(x).all():
        raise ValidationError("observation contains non-finite values")
    kn = prior.kappa0 + stats.count
    mun = (prior.kappa0 * prior.mu0 + stats.sum) / kn
    v = math.sqrt(kn / (kn + 1.0)) * (x - mun)
    kernels.chol_update(stats.chol_psi, v)
    stats.count += 1
    stats.sum += x
    stats.log_det = 2.0 * float(np.sum(np.log(np.diag(stats.chol_psi))))
    return stats


def remove_observation(stats, x, prior):
    """Inverse of add_observation (in place; returns stats).

    Raises UnderflowError_ on an empty component and NumericalError when
    the Cholesky downdate loses positive-definiteness, in which case the
    statistics are left unchanged and the caller should rebuild from the
    batch path.
    """
    x = _check_vector(x, prior)
    if stats.count == 0:
        raise UnderflowError_("cannot remove from an empty component")
    backup = stats.chol_psi.copy()
    new_count = stats.count - 1
    new_sum = stats.sum - x
    kn = prior.kappa0 + new_count
    mun = (prior.kappa0 * prior.mu0 + new_sum) / kn
    v = math.sqrt(kn / (kn + 1.0)) * (x - mun)
    if not kernels.chol_downdate(stats.chol_psi, v):
        stats.chol_psi[...] = backup
        raise NumericalError("rank-one downdate lost positive-definiteness")
    stats.count = new_count
    stats.sum = new_sum
    stats.log_det = 2.0 * float(np.sum(np.log(np.diag(stats.chol_psi))))
    return stats


def studentt_params(stats, prior):
    """Parameters (dof, loc, chol_scale, logdet_scale) of the predictive.

    The posterior predictive is multivariate Student-t with dof
    nun - d + 1, location mun and scale Psi_n (kn + 1) / (kn (nun - d + 1)).
    """
    d = prior.d
    kn = prior.kappa0 + stats.count
    nun = prior.nu0 + stats.count
    dof = nun - d + 1.0
    loc = (prior.kappa0 * prior.mu0 + stats.sum) / kn
    smult = (kn + 1.0) / (kn * dof)
    chol_scale = stats.chol_psi * math.sqrt(smult)
    logdet_scale = stats.log_det + d * math.log(smult)
    return dof, loc, chol_scale, logdet_scale


def mvt_logpdf(x, dof, loc, chol_scale, logdet_scale):
    """Multivariate Student-t log-density; x may be (d,) or (m, d)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = loc.shape[0]
    diff = pts - loc
    y = solve_triangular(chol_scale, diff.T, lower=True, check_finite=False)
    q = np.einsum("ij,ij->j", y, y)
    out = (math.lgamma(0.5 * (dof + d)) - math.lgamma(0.5 * dof)
           - 0.5 * d * (math.log(dof) + LOG_PI)
           - 0.5 * logdet_scale
           - 0.5 * (dof + d) * np.log1p(q / dof))
    return float(out[0]) if single else out


def log_predictive(stats, prior, x):
    """Log posterior-predictive density at x (finite for finite inputs)."""
    x = _check_vector(x, prior)
    return mvt_logpdf(x, *studentt_params(stats, prior))


def sample_predictive(stats, prior, rng):
    """One draw from the Student-t posterior predictive.

    Location-scale construction: a Gaussian draw scaled by the square root
    of dof over an independent chi-square variate.
    """
    dof, loc, chol_scale, _ = studentt_params(stats, prior)
    z = rng.standard_normal(prior.d)
    w = rng.chisquare(dof)
    return loc + (chol_scale @ z) * math.sqrt(dof / w)
