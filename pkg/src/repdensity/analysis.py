"""Analyses over fitted per-class predictive models.

Per-class log-density structure, low/high-density group detection, density
binning, memorization-score aggregation from trial records, between-class
KL matrices and generative classification.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigurationError, EmptySubsetError, ParameterError,
                     UndefinedScoreError, ValidationError)
from .predictive import KLConfig, kl_between_predictives


@dataclass
class ClassDensityReport:
    """Per-class log-density statistics plus the per-example records.

    Class arrays are sorted ascending by mean log-density; example records
    keep their construction order.
    """

    class_ids: np.ndarray
    class_means: np.ndarray
    class_stds: np.ndarray
    example_ids: np.ndarray
    example_classes: np.ndarray
    log_densities: np.ndarray


@dataclass
class TrialRecords:
    """Inclusion and correctness masks across training trials.

    Both arrays are (n_trials, n_examples) booleans; correctness is
    evaluated for every example in every trial, included or not.
    """

    inclusion: np.ndarray
    correctness: np.ndarray

    def __post_init__(self):
        self.inclusion = np.atleast_2d(np.asarray(self.inclusion, dtype=bool))
        self.correctness = np.atleast_2d(np.asarray(self.correctness,
                                                    dtype=bool))
        if self.inclusion.shape != self.correctness.shape:
            raise ValidationError(
                f"mask shapes differ: {self.inclusion.shape} vs "
                f"{self.correctness.shape}")

    @property
    def n_trials(self):
        return self.inclusion.shape[0]

    @property
    def n_examples(self):
        return self.inclusion.shape[1]


@dataclass
class DensityGroups:
    """Two-way split of classes by mean log-density."""

    labels: np.ndarray          # 0 = low-density group, 1 = high-density
    threshold: float | None     # midpoint of the boundary pair
    separation: float           # between/within variance ratio
    unimodal: bool              # all means equal, no split possible

    @property
    def low_indices(self):
        return np.flatnonzero(self.labels == 0)

    @property
    def high_indices(self):
        return np.flatnonzero(self.labels == 1)


@dataclass
class DensityBinning:
    """Contiguous bins over examples sorted by log-density."""

    bin_example_ids: list
    mean_logp: np.ndarray
    std_logp: np.ndarray
    mean_mem: np.ndarray
    std_mem: np.ndarray
    low_frac: np.ndarray
    high_frac: np.ndarray

    @property
    def bins(self):
        return len(self.bin_example_ids)


@dataclass
class KLMatrix:
    """Asymmetric between-class KL estimates with per-entry standard errors."""

    class_ids: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    offdiag_mean: float
    offdiag_std: float


@dataclass
class GenerativeClassification:
    """Predictions of the density-plus-prior classifier."""

    predicted: np.ndarray
    class_ids: np.ndarray
    per_class_f: np.ndarray | None = None
    macro_f: float | None = None


@dataclass
class SubsetSelection:
    """Aligned memorized / least-memorized / random example subsets."""

    memorized: np.ndarray
    least: np.ndarray
    random: np.ndarray
    eligible_classes: np.ndarray = field(default_factory=lambda: np.array([]))


def class_log_density_stats(models, per_class, ids=None):
    """Score every example under its own class model and summarize.

    Parameters
    ----------
    models : mapping class id -> PredictiveModel
    per_class : mapping class id -> dataset or (n_c, d) matrix
    ids : optional mapping class id -> original example ids; defaults to a
        contiguous enumeration in ascending class order.

    Classes come back sorted ascending by mean log-density.
    """
    class_list = sorted(int(c) for c in per_class)
    missing = [c for c in class_list if c not in models]
    if missing:
        raise ConfigurationError(f"classes without a model: {missing}")

    ex_ids, ex_classes, logps = [], [], []
    means, stds = [], []
    offset = 0
    for cid in class_list:
        rows = per_class[cid]
        rows = np.atleast_2d(np.asarray(getattr(rows, "rows", rows),
                                        dtype=np.float64))
        lp = np.atleast_1d(models[cid].logpdf(rows))
        if ids is not None:
            cur = np.asarray(ids[cid], dtype=np.int64)
            if cur.shape[0] != rows.shape[0]:
                raise ParameterError(
                    f"ids for class {cid} do not match its row count")
        else:
            cur = np.arange(offset, offset + rows.shape[0], dtype=np.int64)
        offset += rows.shape[0]
        ex_ids.append(cur)
        ex_classes.append(np.full(rows.shape[0], cid, dtype=np.int64))
        logps.append(lp)
        means.append(float(lp.mean()))
        stds.append(float(lp.std()))

    order = np.argsort(means, kind="stable")
    return ClassDensityReport(
        class_ids=np.asarray(class_list, dtype=np.int64)[order],
        class_means=np.asarray(means)[order],
        class_stds=np.asarray(stds)[order],
        example_ids=np.concatenate(ex_ids),
        example_classes=np.concatenate(ex_classes),
        log_densities=np.concatenate(logps),
    )


def detect_density_groups(class_means):
    """Exact 1-D two-means split of class mean log-densities.

    Scans every boundary of the sorted means and keeps the split with the
    smallest within-group sum of squares. The separation score is the
    between/within variance ratio; values below 1.0 should be read as "no
    bimodal structure". Equal means yield a single group flagged unimodal.
    """
    means = np.asarray(class_means, dtype=np.float64).reshape(-1)
    m = means.shape[0]
    if m < 2:
        raise ParameterError("need at least 2 classes to split")
    if np.all(means == means[0]):
        return DensityGroups(labels=np.zeros(m, dtype=np.int8),
                             threshold=None, separation=0.0, unimodal=True)

    order = np.argsort(means, kind="stable")
    x = means[order]
    s1 = np.cumsum(x)
    s2 = np.cumsum(x * x)
    total_sse = s2[-1] - s1[-1] ** 2 / m

    best_j, best_sse = 1, math.inf
    for j in range(1, m):
        lo_sse = s2[j - 1] - s1[j - 1] ** 2 / j
        hi_n = m - j
        hi_s1 = s1[-1] - s1[j - 1]
        hi_sse = (s2[-1] - s2[j - 1]) - hi_s1 ** 2 / hi_n
        sse = lo_sse + hi_sse
        if sse < best_sse:
            best_sse, best_j = sse, j

    labels = np.ones(m, dtype=np.int8)
    labels[order[:best_j]] = 0
    threshold = 0.5 * (x[best_j - 1] + x[best_j])
    within = max(best_sse, 0.0)
    between = max(total_sse - within, 0.0)
    separation = math.inf if within == 0.0 else between / within
    return DensityGroups(labels=labels, threshold=float(threshold),
                         separation=float(separation), unimodal=False)


def memorization_from_trials(records):
    """Per-example memorization scores from trial masks.

    Score = empirical P[correct | included] - P[correct | excluded],
    exact frequency counts. Raises UndefinedScoreError listing every
    example that was never included or never excluded.
    """
    inc = records.inclusion
    cor = records.correctness
    n_inc = inc.sum(axis=0)
    n_exc = records.n_trials - n_inc
    bad = np.flatnonzero((n_inc == 0) | (n_exc == 0))
    if bad.size:
        raise UndefinedScoreError(
            f"{bad.size} examples lack both included and excluded trials",
            example_ids=bad.tolist())
    correct_inc = (inc & cor).sum(axis=0)
    correct_exc = (~inc & cor).sum(axis=0)
    return correct_inc / n_inc - correct_exc / n_exc


def density_bins(report, memorization, class_groups, bins=50):
    """Split examples sorted by log-density into equally sized bins.

    When n is not a multiple of the bin count, the first (lowest-density)
    bins each absorb one extra example. memorization is positionally
    aligned with the report's example records and may be None;
    class_groups maps class id to 0 (low) or 1 (high) and may be None.
    """
    n = report.example_ids.shape[0]
    if bins < 1 or bins > n:
        raise ParameterError(f"bin count {bins} outside [1, {n}]")
    order = np.argsort(report.log_densities, kind="stable")

    base, extra = divmod(n, bins)
    sizes = np.full(bins, base, dtype=np.int64)
    sizes[:extra] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])

    mem = None if memorization is None else np.asarray(memorization,
                                                       dtype=np.float64)
    if mem is not None and mem.shape[0] != n:
        raise ParameterError("memorization scores not aligned with report")

    if class_groups is not None:
        group_of = np.array([class_groups[int(c)]
                             for c in report.example_classes], dtype=np.int8)

    ids, mean_lp, std_lp = [], [], []
    mean_mem, std_mem, low_frac, high_frac = [], [], [], []
    for b in range(bins):
        sel = order[bounds[b]:bounds[b + 1]]
        ids.append(report.example_ids[sel])
        lp = report.log_densities[sel]
        mean_lp.append(lp.mean())
        std_lp.append(lp.std())
        if mem is not None:
            mean_mem.append(mem[sel].mean())
            std_mem.append(mem[sel].std())
        else:
            mean_mem.append(math.nan)
            std_mem.append(math.nan)
        if class_groups is not None:
            low_frac.append(float((group_of[sel] == 0).mean()))
            high_frac.append(float((group_of[sel] == 1).mean()))
        else:
            low_frac.append(math.nan)
            high_frac.append(math.nan)

    return DensityBinning(
        bin_example_ids=ids,
        mean_logp=np.asarray(mean_lp),
        std_logp=np.asarray(std_lp),
        mean_mem=np.asarray(mean_mem),
        std_mem=np.asarray(std_mem),
        low_frac=np.asarray(low_frac),
        high_frac=np.asarray(high_frac),
    )


def between_class_kl_matrix(models, config, min_class_size=100):
    """Full asymmetric KL matrix over classes with enough representatives.

    Entry (i, j) estimates the divergence from class i's predictive to
    class j's. The diagonal is computed too (small-positive by the nested
    estimator's construction). Per-entry seeds derive deterministically
    from the config seed, so entries may be computed in any order.
    """
    eligible = sorted(int(c) for c, m in models.items()
                      if m.data.shape[0] >= min_class_size)
    if len(eligible) < 2:
        raise ParameterError(
            f"need at least 2 classes with >= {min_class_size} rows, "
            f"got {len(eligible)}")
    m = len(eligible)
    est = np.empty((m, m))
    se = np.empty((m, m))
    for i, ci in enumerate(eligible):
        for j, cj in enumerate(eligible):
            seed = int(np.random.SeedSequence(
                [int(config.seed), i, j]).generate_state(1)[0])
            cfg = KLConfig(samples_per_snapshot=config.samples_per_snapshot,
                           seed=seed)
            out = kl_between_predictives(models[ci], models[cj], cfg)
            est[i, j] = out.estimate
            se[i, j] = out.stderr
    off = ~np.eye(m, dtype=bool)
    return KLMatrix(class_ids=np.asarray(eligible, dtype=np.int64),
                    estimates=est, stderrs=se,
                    offdiag_mean=float(est[off].mean()),
                    offdiag_std=float(est[off].std()))


def f_scores(truth, predicted, class_ids):
    """Per-class F-scores and their macro average.

    A class with zero precision-plus-recall contributes an F of 0.
    """
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    out = np.empty(len(class_ids))
    for k, c in enumerate(class_ids):
        tp = int(np.sum((predicted == c) & (truth == c)))
        fp = int(np.sum((predicted == c) & (truth != c)))
        fn = int(np.sum((predicted != c) & (truth == c)))
        denom = 2 * tp + fp + fn
        out[k] = 2 * tp / denom if denom else 0.0
    return out, float(out.mean())


def generative_classify(models, priors, queries, truth=None):
    """Assign each query to the class maximizing log-density plus log-prior.

    Ties break toward the smallest class id. Per-class and macro F-scores
    are filled in when ground truth is supplied.
    """
    class_list = np.asarray(sorted(int(c) for c in models), dtype=np.int64)
    pri = np.asarray([priors[int(c)] for c in class_list], dtype=np.float64)
    if abs(pri.sum() - 1.0) > 1e-9:
        raise ParameterError(f"priors sum to {pri.sum()}, expected 1")

    pts = np.atleast_2d(np.asarray(getattr(queries, "rows", queries),
                                   dtype=np.float64))
    with np.errstate(divide="ignore"):
        log_pri = np.log(pri)
    scores = np.stack([models[int(c)].logpdf(pts) + log_pri[k]
                       for k, c in enumerate(class_list)])
    predicted = class_list[np.argmax(scores, axis=0)]

    result = GenerativeClassification(predicted=predicted,
                                      class_ids=class_list)
    if truth is not None:
        per_class, macro = f_scores(np.asarray(truth), predicted, class_list)
        result.per_class_f = per_class
        result.macro_f = macro
    return result


def select_memorization_subsets(scores, labels, threshold=0.9,
                                min_class_size=100, seed=0):
    """Memorized, least-memorized and random example subsets of equal size.

    Memorized examples are those with score strictly above the threshold;
    the least subset takes the same count with the smallest scores; the
    random subset is drawn uniformly from the full pool with the given
    seed. eligible_classes lists the classes holding at least
    min_class_size members in every subset.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(getattr(labels, "labels", labels)).reshape(-1)
    if scores.shape[0] != labels.shape[0]:
        raise ParameterError("scores not aligned with labels")

    memorized = np.flatnonzero(scores > threshold)
    if memorized.size == 0:
        raise EmptySubsetError(
            f"no examples with memorization score above {threshold}")
    k = memorized.size
    least = np.argsort(scores, kind="stable")[:k]
    rng = np.random.default_rng(seed)
    random = np.sort(rng.choice(scores.shape[0], size=k, replace=False))

    eligible = []
    for cid in np.unique(labels):
        if all(int(np.sum(labels[sub] == cid)) >= min_class_size
               for sub in (memorized, least, random)):
            eligible.append(int(cid))
    return SubsetSelection(memorized=memorized, least=least, random=random,
                           eligible_classes=np.asarray(eligible,
                                                       dtype=np.int64))
