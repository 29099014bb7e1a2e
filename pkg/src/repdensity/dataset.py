"""Representation datasets: validation, SVD reduction, prior construction."""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ParameterError, ValidationError
from .niw import NIWParams

#: variance floor keeping data-derived priors positive definite
PRIOR_VARIANCE_FLOOR = 1e-9


def _as_matrix(data):
    if isinstance(data, RepresentationDataset):
        return np.asarray(data.rows, dtype=np.float64)
    out = np.asarray(data, dtype=np.float64)
    if out.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got shape {out.shape}")
    return out


@dataclass
class RepresentationDataset:
    """n x d matrix of pooled activations with per-row class labels.

    Parameters
    ----------
    rows : ndarray (n, d)
        One pooled activation vector per input observation.
    labels : ndarray (n,)
        Non-negative class id per row.
    stage : str
        Free-text tag naming the network stage the rows were tapped from.
    precision : int
        Element width in bytes: 4 (float32) or 8 (float64).
    """

    rows: np.ndarray
    labels: np.ndarray
    stage: str = ""
    precision: int = 8

    def __post_init__(self):
        if self.precision not in (4, 8):
            raise ParameterError(
                f"precision must be 4 or 8, got {self.precision}")
        dtype = np.float32 if self.precision == 4 else np.float64
        rows = np.ascontiguousarray(self.rows, dtype=dtype)
        if rows.ndim != 2:
            raise ValidationError(f"rows must be 2-D, got shape {rows.shape}")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != rows.shape[0]:
            raise ValidationError(
                f"labels length {labels.shape} does not match "
                f"{rows.shape[0]} rows")
        if labels.size and np.min(labels) < 0:
            raise ValidationError("class ids must be non-negative")
        self.rows = rows
        self.labels = np.ascontiguousarray(labels, dtype=np.uint32)
        finite = np.isfinite(rows).all(axis=1)
        if not finite.all():
            bad = int(np.flatnonzero(~finite)[0])
            raise ValidationError(f"non-finite value in row {bad}")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def class_ids(self):
        """Sorted unique class ids present in the dataset."""
        return np.unique(self.labels)


@dataclass
class SvdProjection:
    """Centered projection onto leading right-singular vectors."""

    center: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    variance_captured: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.basis = np.asarray(self.basis, dtype=np.float64)
        self.singular_values = np.asarray(self.singular_values,
                                          dtype=np.float64)
        gram = self.basis.T @ self.basis
        if not np.allclose(gram, np.eye(self.basis.shape[1]), atol=1e-8):
            raise ValidationError("basis columns are not orthonormal")
        if np.any(np.diff(self.singular_values) > 1e-12):
            raise ValidationError("singular values must be non-increasing")
        if not (-1e-12 <= self.variance_captured <= 1.0 + 1e-12):
            raise ValidationError("variance_captured outside [0, 1]")

    def apply(self, rows):
        """Project rows: (rows - center) @ basis."""
        return (np.asarray(rows, dtype=np.float64) - self.center) @ self.basis

    def reconstruct(self, projected):
        """Map projected rows back into the original space."""
        return np.asarray(projected, dtype=np.float64) @ self.basis.T + self.center


def svd_reduce(data, target):
    """Center a dataset and project it onto leading right-singular vectors.

    Parameters
    ----------
    data : RepresentationDataset
    target : int or float
        Either the retained dimension count, or a variance fraction in
        (0, 1]; the fraction selects the smallest count whose captured
        variance reaches it.

    Returns
    -------
    (RepresentationDataset, SvdProjection)
        The projected dataset (float64) and the reusable projection.
    """
    X = _as_matrix(data)
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 rows, got {n}")
    center = X.mean(axis=0)
    Xc = X - center
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    ssq = s * s
    cum = np.cumsum(ssq)
    total = cum[-1] if cum.size else 0.0

    if isinstance(target, (int, np.integer)) and not isinstance(target, bool):
        dprime = int(target)
        if dprime < 1 or dprime > d:
            raise ParameterError(
                f"target dimension {dprime} outside [1, {d}]")
    elif isinstance(target, float):
        if not 0.0 < target <= 1.0:
            raise ParameterError(
                f"variance fraction {target} outside (0, 1]")
        if total == 0.0:
            dprime = 1
        else:
            dprime = int(np.searchsorted(cum / total, target) + 1)
            dprime = min(dprime, d)
    else:
        raise ParameterError(f"unsupported target {target!r}")

    if dprime > s.shape[0]:
        # rank-deficient request beyond min(n, d): take the orthonormal
        # complement from the full decomposition, singular values are zero
        _, _, vt = np.linalg.svd(Xc, full_matrices=True)
        sing = np.zeros(dprime)
        sing[:s.shape[0]] = s
    else:
        sing = s[:dprime].copy()

    basis = vt[:dprime].T.copy()
    captured = 1.0 if total == 0.0 else float(
        cum[min(dprime, len(cum)) - 1] / total)
    projection = SvdProjection(center=center, basis=basis,
                               singular_values=sing,
                               variance_captured=captured)
    reduced = RepresentationDataset(rows=Xc @ basis,
                                    labels=data.labels.copy(),
                                    stage=data.stage,
                                    precision=8)
    return reduced, projection


def derive_prior(data):
    """Data-derived, weakly informative conjugate prior.

    The location is the column mean, the pseudo-count is 0.01, the degrees
    of freedom are d + 2, and the scale matrix is the diagonal of floored
    per-dimension population variances times (nu0 - d - 1), so the
    prior-expected component covariance matches the empirical diagonal.
    """
    X = _as_matrix(data)
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 rows, got {n}")
    mu0 = X.mean(axis=0)
    var = np.maximum(X.var(axis=0), PRIOR_VARIANCE_FLOOR)
    nu0 = float(d + 2)
    psi0 = np.diag(var * (nu0 - d - 1.0))
    return NIWParams(mu0=mu0, kappa0=0.01, nu0=nu0, psi0=psi0)


def split_by_class(data):
    """Partition a dataset by class id, preserving within-class row order.

    Returns a dict mapping class id to a single-class dataset; the union of
    the outputs is exactly the input rows.
    """
    out = {}
    for cid in data.class_ids():
        mask = data.labels == cid
        out[int(cid)] = RepresentationDataset(
            rows=data.rows[mask].copy(),
            labels=data.labels[mask].copy(),
            stage=data.stage,
            precision=data.precision,
        )
    return out


def class_row_indices(data):
    """Original row positions per class id, aligned with split_by_class."""
    return {int(cid): np.flatnonzero(data.labels == cid)
            for cid in data.class_ids()}
