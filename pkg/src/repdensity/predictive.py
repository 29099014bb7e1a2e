"""Monte-Carlo posterior predictive evaluation, sampling and KL estimation.

A fitted model is a set of retained chain snapshots over one training
matrix. Snapshot-conditional densities are Student-t mixtures weighted by
component counts (plus the concentration for a fresh component); the full
predictive averages them in log domain. KL divergences against a tractable
reference or another fitted predictive follow the nested Monte-Carlo
estimator, sampling from each snapshot conditional and scoring with that
same conditional.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InsufficientDataError, ParameterError
from .niw import ComponentStats, mvt_logpdf, studentt_params
from .sampler import run

#: variance floor of the diagonal max-entropy reference
REFERENCE_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class KLConfig:
    """Monte-Carlo budget: samples drawn per retained snapshot."""

    samples_per_snapshot: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_snapshot < 1:
            raise ParameterError("samples_per_snapshot must be >= 1")


@dataclass(frozen=True)
class KLEstimate:
    """KL estimate in nats with its Monte-Carlo standard error."""

    estimate: float
    stderr: float
    n_snapshots: int
    samples_per_snapshot: int
    neg_inf_count: int = 0


@dataclass
class DiagonalGaussian:
    """Max-entropy reference: independent Gaussians per dimension."""

    mean: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        var = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if var.shape != self.mean.shape:
            raise ParameterError("mean and variances shapes differ")
        self.variances = np.maximum(var, REFERENCE_VARIANCE_FLOOR)

    @property
    def d(self):
        return self.mean.shape[0]

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        diff = pts - self.mean
        out = -0.5 * np.sum(diff * diff / self.variances
                            + np.log(2.0 * math.pi * self.variances), axis=1)
        return float(out[0]) if single else out


class _SnapshotMixture:
    """Cached per-snapshot component table: a Student-t mixture."""

    def __init__(self, snapshot, data, prior):
        n = data.shape[0]
        ids = np.unique(snapshot.assignments)
        entries = []
        for cid in ids:
            rows = data[snapshot.assignments == cid]
            entries.append((rows.shape[0],
                            ComponentStats.from_data(prior, rows)))
        entries.append((0, ComponentStats.empty(prior)))

        total = n + snapshot.alpha
        weights = np.array([c for c, _ in entries[:-1]] + [snapshot.alpha])
        weights = weights / total
        assert abs(weights.sum() - 1.0) < 1e-12
        self.log_w = np.log(weights)
        self.dof = np.empty(len(entries))
        self.loc = np.empty((len(entries), prior.d))
        self.chol = np.empty((len(entries), prior.d, prior.d))
        self.logdet = np.empty(len(entries))
        for j, (_, stats) in enumerate(entries):
            dof, loc, chol, logdet = studentt_params(stats, prior)
            self.dof[j] = dof
            self.loc[j] = loc
            self.chol[j] = chol
            self.logdet[j] = logdet

    def logpdf(self, pts):
        lw = np.empty((self.log_w.shape[0], pts.shape[0]))
        for j in range(self.log_w.shape[0]):
            lw[j] = self.log_w[j] + mvt_logpdf(
                pts, self.dof[j], self.loc[j], self.chol[j], self.logdet[j])
        return logsumexp(lw, axis=0)

    def sample(self, m, rng):
        k = self.log_w.shape[0]
        comp = rng.choice(k, size=m, p=np.exp(self.log_w))
        d = self.loc.shape[1]
        out = np.empty((m, d))
        for j in np.unique(comp):
            idx = np.flatnonzero(comp == j)
            z = rng.standard_normal((idx.shape[0], d))
            w = rng.chisquare(self.dof[j], size=idx.shape[0])
            scale = np.sqrt(self.dof[j] / w)[:, None]
            out[idx] = self.loc[j] + (z * scale) @ self.chol[j].T
        return out


class PredictiveModel:
    """Retained chain snapshots bound to their training matrix and prior."""

    def __init__(self, snapshots, data, prior):
        if len(snapshots) < 1:
            raise ParameterError("need at least one snapshot")
        data = np.ascontiguousarray(np.atleast_2d(data), dtype=np.float64)
        for snap in snapshots:
            if snap.assignments.shape[0] != data.shape[0]:
                raise ParameterError(
                    "snapshot assignments do not match the data length")
        if data.shape[1] != prior.d:
            raise ParameterError("data dimension does not match the prior")
        self.snapshots = list(snapshots)
        self.data = data
        self.prior = prior
        self._mixtures = [None] * len(snapshots)

    @property
    def n_snapshots(self):
        return len(self.snapshots)

    @property
    def d(self):
        return self.data.shape[1]

    def _mixture(self, t):
        if self._mixtures[t] is None:
            self._mixtures[t] = _SnapshotMixture(self.snapshots[t],
                                                 self.data, self.prior)
        return self._mixtures[t]

    def conditional_logpdf(self, t, x):
        """Log-density of the t-th snapshot-conditional predictive."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.d:
            raise ParameterError(
                f"query dimension {pts.shape[1]} does not match {self.d}")
        out = self._mixture(t).logpdf(pts)
        return float(out[0]) if single else out

    def logpdf(self, x):
        """Full posterior-predictive log-density: log-mean-exp over snapshots."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.d:
            raise ParameterError(
                f"query dimension {pts.shape[1]} does not match {self.d}")
        per_snap = np.stack([self._mixture(t).logpdf(pts)
                             for t in range(self.n_snapshots)])
        out = logsumexp(per_snap, axis=0) - math.log(self.n_snapshots)
        return float(out[0]) if single else out

    def sample(self, count, rng):
        """Draws stratified evenly across snapshots, with provenance.

        Returns (points, snapshot_index) where the index array records the
        source snapshot of each draw. When count is not a multiple of the
        snapshot count the first snapshots receive one extra draw.
        """
        if count < 1:
            raise ParameterError("count must be >= 1")
        t_count = self.n_snapshots
        base, extra = divmod(count, t_count)
        points = []
        provenance = []
        for t in range(t_count):
            m = base + (1 if t < extra else 0)
            if m == 0:
                continue
            points.append(self._mixture(t).sample(m, rng))
            provenance.append(np.full(m, t, dtype=np.int64))
        return np.concatenate(points), np.concatenate(provenance)


def fit_predictive_model(data, prior, config, validate=False):
    """Run the blocked sampler on data and wrap the retained snapshots."""
    snapshots = run(data, prior, config, validate=validate)
    return PredictiveModel(snapshots, data, prior)


def conditional_predictive_logpdf(model, t, x):
    """Snapshot-conditional predictive log-density (log-sum-exp mixture)."""
    return model.conditional_logpdf(t, x)


def posterior_predictive_logpdf(model, x):
    """Full Monte-Carlo posterior-predictive log-density."""
    return model.logpdf(x)


def sample_posterior_predictive(model, count, rng):
    """Stratified draws from the posterior predictive, with provenance."""
    return model.sample(count, rng)


def max_entropy_reference(data):
    """Diagonal Gaussian matching the data's mean and per-column variances."""
    X = np.atleast_2d(np.asarray(getattr(data, "rows", data),
                                 dtype=np.float64))
    if X.shape[0] < 2:
        raise InsufficientDataError(
            f"need at least 2 rows, got {X.shape[0]}")
    return DiagonalGaussian(mean=X.mean(axis=0), variances=X.var(axis=0))


def _reference_logpdf(q, pts):
    fn = getattr(q, "logpdf", q)
    return np.asarray(fn(pts), dtype=np.float64)


def kl_to_reference(model, q, config):
    """Nested Monte-Carlo KL estimate from the fitted predictive to q.

    For each retained snapshot t, samples_per_snapshot points are drawn
    from the snapshot conditional and scored as log p(x | D, c_t) minus
    log q(x); the estimate averages over all terms. A reference density of
    zero at any sampled point yields an infinite estimate with the
    offending count reported.
    """
    rng = np.random.default_rng(config.seed)
    m = config.samples_per_snapshot
    terms = []
    neg_inf = 0
    for t in range(model.n_snapshots):
        pts = model._mixture(t).sample(m, rng)
        lp = model.conditional_logpdf(t, pts)
        lq = _reference_logpdf(q, pts)
        bad = ~np.isfinite(lq)
        neg_inf += int(bad.sum())
        terms.append(lp - lq)
    terms = np.concatenate(terms)
    if neg_inf:
        return KLEstimate(estimate=math.inf, stderr=math.nan,
                          n_snapshots=model.n_snapshots,
                          samples_per_snapshot=m, neg_inf_count=neg_inf)
    stderr = (float(terms.std(ddof=1)) / math.sqrt(terms.shape[0])
              if terms.shape[0] > 1 else 0.)
    return KLEstimate(estimate=float(terms.mean()), stderr=stderr,
                      n_snapshots=model.n_snapshots, samples_per_snapshot=m)


def kl_between_predictives(p_model, q_model, config):
    """KL estimate from one fitted predictive to another (asymmetric)."""
    if p_model.d != q_model.d:
        raise ParameterError("models disagree on dimension")
    return kl_to_reference(p_model, q_model, config)
