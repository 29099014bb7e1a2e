"""Attack-agnostic certification statistics for randomized smoothing.

Monte-Carlo class selection, exact one-sided Clopper-Pearson lower
confidence bounds, the abstention rule, and certified radii against a
pluggable black-box classifier. The classifier is any callable taking an
(m, d) batch of noisy points and returning m integer class ids.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, ndtri

from .errors import ParameterError
from .analysis import f_scores


@dataclass(frozen=True)
class CertifyConfig:
    """Certification budget: noise level, selection and estimation sample
    counts, and the allowed failure probability."""

    sigma: float = 0.5
    n0: int = 100
    n: int = 100000
    alpha: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.n0 < 1 or self.n < 1:
            raise ParameterError("sample counts must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class CertifyOutcome:
    """Either an abstention or a certified (class, radius) pair."""

    abstain: bool
    class_id: int | None
    radius: float | None
    p_lower: float

    def __post_init__(self):
        if not self.abstain:
            if self.radius is None or self.class_id is None:
                raise ParameterError(
                    "non-abstaining outcome needs a class and radius")
            if not self.p_lower > 0.5:
                raise ParameterError(
                    "certified outcome requires p_lower > 0.5")
        elif self.radius is not None:
            raise ParameterError("abstaining outcome cannot carry a radius")


def clopper_pearson_lower(successes, trials, alpha):
    """Exact one-sided lower confidence bound on a binomial proportion.

    The alpha-quantile of Beta(k, n - k + 1), found by bisecting the
    regularized incomplete beta function to 1e-12; returns 0 when k == 0.
    """
    k, n = int(successes), int(trials)
    if n < 1 or not 0 <= k <= n:
        raise ParameterError(f"invalid counts k={successes}, n={trials}")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if betainc(k, n - k + 1, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sample_votes(classifier, x, count, sigma, rng, batch_size):
    """Noisy evaluations of the classifier; returns a vote Counter-style dict."""
    votes = {}
    done = 0
    while done < count:
        m = min(batch_size, count - done)
        noisy = x + sigma * rng.standard_normal((m, x.shape[0]))
        preds = np.asarray(classifier(noisy)).reshape(-1)
        if preds.shape[0] != m:
            raise ParameterError(
                f"classifier returned {preds.shape[0]} labels for a batch "
                f"of {m}")
        ids, counts = np.unique(preds, return_counts=True)
        for cid, c in zip(ids, counts):
            votes[int(cid)] = votes.get(int(cid), 0) + int(c)
        done += m
    return votes


def certify(classifier, x, config, rng=None, batch_size=1000):
    """Certify one input against a black-box classifier.

    Draws n0 noisy evaluations to pick the top class, n fresh evaluations
    to bound its probability from below, and abstains unless the bound
    exceeds one half; otherwise the certified radius is sigma times the
    standard-normal quantile of the bound.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    votes = _sample_votes(classifier, x, config.n0, config.sigma, rng,
                          batch_size)
    top = min(c for c in votes if votes[c] == max(votes.values()))
    votes = _sample_votes(classifier, x, config.n, config.sigma, rng,
                          batch_size)
    k = votes.get(top, 0)
    p_lower = clopper_pearson_lower(k, config.n, config.alpha)
    if p_lower <= 0.5:
        return CertifyOutcome(abstain=True, class_id=None, radius=None,
                              p_lower=p_lower)
    radius = config.sigma * float(ndtri(p_lower))
    return CertifyOutcome(abstain=False, class_id=top, radius=radius,
                          p_lower=p_lower)


def certification_report(outcomes, bin_labels, truth_labels, n_bins=None):
    """Per-bin certification statistics.

    Radius statistics exclude abstentions; the classification rate counts
    them in its denominator. Two F-score conventions are reported: one
    treating abstentions as errors, one restricted to certified points.
    Empty bins produce NaN statistics rather than an error.

    Returns a list of per-bin dicts ready for CSV emission.
    """
    bin_labels = np.asarray(bin_labels, dtype=np.int64)
    truth_labels = np.asarray(truth_labels, dtype=np.int64)
    if not (len(outcomes) == bin_labels.shape[0] == truth_labels.shape[0]):
        raise ParameterError("outcomes, bins and truth must align")
    if n_bins is None:
        n_bins = int(bin_labels.max()) + 1 if bin_labels.size else 0

    abstain = np.asarray([o.abstain for o in outcomes], dtype=bool)
    radius = np.asarray([o.radius if not o.abstain else math.nan
                         for o in outcomes])
    pred = np.asarray([o.class_id if not o.abstain else -1
                       for o in outcomes], dtype=np.int64)

    rows = []
    for b in range(n_bins):
        sel = bin_labels == b
        total = int(sel.sum())
        row = {"bin": b, "count": total}
        if total == 0:
            row.update(rate=math.nan, radius_mean=math.nan,
                       radius_std=math.nan, f_abstain_as_error=math.nan,
                       f_certified_only=math.nan)
            rows.append(row)
            continue
        certified = sel & ~abstain
        n_cert = int(certified.sum())
        row["rate"] = n_cert / total
        if n_cert:
            row["radius_mean"] = float(radius[certified].mean())
            row["radius_std"] = float(radius[certified].std())
        else:
            row["radius_mean"] = math.nan
            row["radius_std"] = math.nan
        classes = np.unique(truth_labels[sel])
        _, row["f_abstain_as_error"] = f_scores(truth_labels[sel], pred[sel],
                                                classes)
        if n_cert:
            _, row["f_certified_only"] = f_scores(truth_labels[certified],
                                                  pred[certified], classes)
        else:
            row["f_certified_only"] = math.nan
        rows.append(row)
    return rows
