"""Command-line entry point.

Subcommands wire configuration files to the library modules and emit
plot-ready CSV/JSON artifacts plus a manifest recording the effective
configuration, library versions and output checksums. Configuration files
use INI syntax; see the README for the full key reference.

Exit codes: 0 success, 1 validation/runtime failure (with a machine-
readable error JSON on stdout), 2 usage error.
"""

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import platform
import shlex
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .analysis import (between_class_kl_matrix, class_log_density_stats,
                       density_bins, detect_density_groups,
                       generative_classify, memorization_from_trials,
                       TrialRecords)
from .certify import CertifyConfig, certify
from .dataset import class_row_indices, derive_prior, split_by_class, svd_reduce
from .errors import (ConfigurationError, ParameterError, RepdensityError,
                     ValidationError)
from .io import (load_representations, read_representation_fields,
                 read_snapshot_archive, read_trial_records,
                 write_representations, write_snapshot_archive)
from .predictive import (KLConfig, PredictiveModel, fit_predictive_model,
                         kl_between_predictives, kl_to_reference,
                         max_entropy_reference)
from .sampler import SamplerConfig, run

DEFAULT_SVD_TARGETS = {"stage1": 16, "stage2": 16, "stage3": 64, "stage4": 64}


@dataclass
class RunConfig:
    """Effective run configuration after merging file values and defaults."""

    seed: int = 0
    output_dir: str = "."
    parallel_classes: int = 1
    svd_targets: dict = field(default_factory=lambda: dict(DEFAULT_SVD_TARGETS))
    sweeps: int = 400
    burn_in: int = 320
    thin: int = 4
    block_size: int = 4
    resample_alpha: bool = True
    kl_samples: int = 1024
    certify_sigma: float = 0.5
    certify_n0: int = 100
    certify_n: int = 100000
    certify_alpha: float = 0.001
    min_class_size: int = 100
    memorization_threshold: float = 0.9
    bins: int = 50

    def sampler_config(self, seed=None):
        return SamplerConfig(sweeps=self.sweeps, burn_in=self.burn_in,
                             thin=self.thin, block_size=self.block_size,
                             seed=self.seed if seed is None else seed,
                             resample_alpha=self.resample_alpha)

    def certify_config(self):
        return CertifyConfig(sigma=self.certify_sigma, n0=self.certify_n0,
                             n=self.certify_n, alpha=self.certify_alpha,
                             seed=self.seed)

    def as_dict(self):
        return {
            "seed": self.seed, "output_dir": self.output_dir,
            "parallel_classes": self.parallel_classes,
            "svd_targets": dict(self.svd_targets),
            "sampler": {"sweeps": self.sweeps, "burn_in": self.burn_in,
                        "thin": self.thin, "block_size": self.block_size,
                        "resample_alpha": self.resample_alpha},
            "kl": {"samples_per_snapshot": self.kl_samples},
            "certify": {"sigma": self.certify_sigma, "n0": self.certify_n0,
                        "n": self.certify_n, "alpha": self.certify_alpha},
            "analysis": {"min_class_size": self.min_class_size,
                         "memorization_threshold": self.memorization_threshold,
                         "bins": self.bins},
        }


_SECTION_KEYS = {
    "run": {"seed": int, "output_dir": str, "parallel_classes": int},
    "svd": None,  # free-form stage -> dimension map
    "sampler": {"sweeps": int, "burn_in": int, "thin": int,
                "block_size": int, "resample_alpha": None},
    "kl": {"samples_per_snapshot": int},
    "certify": {"sigma": float, "n0": int, "n": int, "alpha": float},
    "analysis": {"min_class_size": int, "memorization_threshold": float,
                 "bins": int},
}


def load_run_config(path=None):
    """Parse an INI config file; unknown sections or keys are rejected."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigurationError(f"unknown config section [{section}]")
        if section == "svd":
            cfg.svd_targets = {k: parser.getint(section, k)
                               for k in parser[section]}
            continue
        keys = _SECTION_KEYS[section]
        for key in parser[section]:
            if key not in keys:
                raise ConfigurationError(
                    f"unknown key '{key}' in section [{section}]")
    g = parser
    if g.has_section("run"):
        cfg.seed = g.getint("run", "seed", fallback=cfg.seed)
        cfg.output_dir = g.get("run", "output_dir", fallback=cfg.output_dir)
        cfg.parallel_classes = g.getint("run", "parallel_classes",
                                        fallback=cfg.parallel_classes)
    if g.has_section("sampler"):
        cfg.sweeps = g.getint("sampler", "sweeps", fallback=cfg.sweeps)
        cfg.burn_in = g.getint("sampler", "burn_in", fallback=cfg.burn_in)
        cfg.thin = g.getint("sampler", "thin", fallback=cfg.thin)
        cfg.block_size = g.getint("sampler", "block_size",
                                  fallback=cfg.block_size)
        cfg.resample_alpha = g.getboolean("sampler", "resample_alpha",
                                          fallback=cfg.resample_alpha)
    if g.has_section("kl"):
        cfg.kl_samples = g.getint("kl", "samples_per_snapshot",
                                  fallback=cfg.kl_samples)
    if g.has_section("certify"):
        cfg.certify_sigma = g.getfloat("certify", "sigma",
                                       fallback=cfg.certify_sigma)
        cfg.certify_n0 = g.getint("certify", "n0", fallback=cfg.certify_n0)
        cfg.certify_n = g.getint("certify", "n", fallback=cfg.certify_n)
        cfg.certify_alpha = g.getfloat("certify", "alpha",
                                       fallback=cfg.certify_alpha)
    if g.has_section("analysis"):
        cfg.min_class_size = g.getint("analysis", "min_class_size",
                                      fallback=cfg.min_class_size)
        cfg.memorization_threshold = g.getfloat(
            "analysis", "memorization_threshold",
            fallback=cfg.memorization_threshold)
        cfg.bins = g.getint("analysis", "bins", fallback=cfg.bins)
    return cfg


def _derive_seed(seed, *keys):
    return int(np.random.SeedSequence(
        [int(seed)] + [int(k) for k in keys]).generate_state(1)[0])


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(manifest_path, command, config_dict, outputs,
                    details=None):
    cfg_json = json.dumps(config_dict, sort_keys=True)
    manifest = {
        "command": command,
        "config": config_dict,
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "versions": {
            "repdensity": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
            "python": platform.python_version(),
        },
        "outputs": {str(name): _sha256(path) for name, path in outputs},
        "details": details or {},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _class_subset(data, class_id):
    if class_id is None:
        return data.rows, np.arange(data.n)
    mask = data.labels == class_id
    if not mask.any():
        raise ParameterError(f"class {class_id} not present in the dataset")
    return data.rows[mask], np.flatnonzero(mask)


def _rebuild_model(archive_path, repr_path, class_id):
    snapshots, n, d = read_snapshot_archive(archive_path)
    data = load_representations(repr_path)
    rows, _ = _class_subset(data, class_id)
    if rows.shape[0] != n:
        raise ParameterError(
            f"archive was fit on {n} rows but the selection has "
            f"{rows.shape[0]}; pass the matching --class")
    if rows.shape[1] != d:
        raise ParameterError(
            f"archive dimension {d} does not match the file's {rows.shape[1]}")
    prior = derive_prior(rows)
    return PredictiveModel(snapshots, rows, prior), data


def _max_workers(requested):
    cap = os.environ.get("REPDENSITY_THREADS")
    workers = max(1, int(requested))
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def _fit_class_models(per_class, cfg, parallel=1):
    def fit_one(item):
        cid, ds = item
        scfg = cfg.sampler_config(seed=_derive_seed(cfg.seed, cid))
        prior = derive_prior(ds)
        return cid, fit_predictive_model(ds.rows, prior, scfg)

    items = sorted(per_class.items())
    workers = _max_workers(parallel)
    if workers == 1:
        fitted = [fit_one(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(fit_one, items))
    return dict(fitted)


def _read_scores_csv(path, n):
    scores = np.full(n, np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["example_id", "score"]:
            raise ValidationError(
                f"{path}: expected header 'example_id,score'")
        for row in reader:
            idx = int(row[0])
            if not 0 <= idx < n:
                raise ValidationError(f"{path}: example id {idx} out of range")
            scores[idx] = float(row[1])
    if np.isnan(scores).any():
        missing = int(np.isnan(scores).sum())
        raise ValidationError(f"{path}: scores missing for {missing} examples")
    return scores


class _SubprocessClassifier:
    """Adapter for the external classifier protocol.

    Each batch is one frame on the child's stdin: a little-endian u64 row
    count followed by the rows as float64; the child answers with one class
    id per line. The child is told the dimensionality by its own argv.
    """

    def __init__(self, command):
        self.proc = subprocess.Popen(shlex.split(command),
                                     stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE)

    def __call__(self, batch):
        batch = np.ascontiguousarray(batch, dtype="<f8")
        m = batch.shape[0]
        self.proc.stdin.write(np.uint64(m).tobytes())
        self.proc.stdin.write(batch.tobytes())
        self.proc.stdin.flush()
        out = np.empty(m, dtype=np.int64)
        for i in range(m):
            line = self.proc.stdout.readline()
            if not line:
                raise RepdensityError("classifier subprocess closed its output")
            out[i] = int(line)
        return out

    def close(self):
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait(timeout=30)


def _cmd_inspect(args):
    fields = read_representation_fields(args.file)
    labels = fields["labels"]
    rows = fields["rows"]
    ids, counts = np.unique(labels, return_counts=True)
    finite_mask = np.isfinite(rows).all(axis=1)
    report = {
        "n": fields["n"],
        "d": fields["d"],
        "stage": fields["stage"],
        "precision": fields["precision"],
        "classes": {str(int(i)): int(c) for i, c in zip(ids, counts)},
        "finite": bool(finite_mask.all()),
    }
    if not report["finite"]:
        report["first_non_finite_row"] = int(np.flatnonzero(~finite_mask)[0])
    print(json.dumps(report, sort_keys=True))
    return 0


def _cmd_reduce(args):
    cfg = load_run_config(args.config)
    data = load_representations(args.input)
    if args.dim is not None:
        target = args.dim
    elif args.variance is not None:
        target = args.variance
    elif data.stage in cfg.svd_targets:
        target = cfg.svd_targets[data.stage]
    else:
        raise ConfigurationError(
            f"no --dim/--variance given and stage {data.stage!r} has no "
            "configured target")
    reduced, projection = svd_reduce(data, target)
    write_representations(reduced, args.out)
    _write_manifest(str(args.out) + ".manifest.json", "reduce",
                    cfg.as_dict(), [(os.path.basename(args.out), args.out)],
                    details={"input": str(args.input),
                             "dim": int(projection.basis.shape[1]),
                             "variance_captured":
                                 projection.variance_captured})
    return 0


def _cmd_fit(args):
    cfg = load_run_config(args.config)
    data = load_representations(args.input)
    rows, _ = _class_subset(data, args.class_id)
    seed = (cfg.seed if args.class_id is None
            else _derive_seed(cfg.seed, args.class_id))
    scfg = cfg.sampler_config(seed=seed)
    prior = derive_prior(rows)
    snapshots = run(rows, prior, scfg)
    write_snapshot_archive(snapshots, rows.shape[1], args.out)
    _write_manifest(str(args.out) + ".manifest.json", "fit", cfg.as_dict(),
                    [(os.path.basename(args.out), args.out)],
                    details={"input": str(args.input),
                             "class": args.class_id,
                             "n": int(rows.shape[0]),
                             "snapshots": len(snapshots)})
    return 0


def _cmd_density(args):
    model, data = _rebuild_model(args.model, args.repr, args.class_id)
    logp = model.logpdf(data.rows)
    rows = [(i, int(data.labels[i]), float(logp[i])) for i in range(data.n)]
    _write_csv(args.out, ["example_id", "class_id", "log_density"], rows)
    _write_manifest(str(args.out) + ".manifest.json", "density",
                    {"model": str(args.model), "repr": str(args.repr),
                     "class": args.class_id},
                    [(os.path.basename(args.out), args.out)])
    return 0


def _cmd_kl(args):
    p_model, _ = _rebuild_model(args.p, args.p_repr, args.p_class)
    config = KLConfig(samples_per_snapshot=args.m, seed=args.seed)
    if args.q == "maxent":
        reference = max_entropy_reference(p_model.data)
        estimate = kl_to_reference(p_model, reference, config)
    else:
        q_repr = args.q_repr if args.q_repr is not None else args.p_repr
        q_model, _ = _rebuild_model(args.q, q_repr, args.q_class)
        estimate = kl_between_predictives(p_model, q_model, config)
    print(json.dumps({
        "estimate": estimate.estimate,
        "stderr": estimate.stderr,
        "n_snapshots": estimate.n_snapshots,
        "samples_per_snapshot": estimate.samples_per_snapshot,
        "neg_inf_count": estimate.neg_inf_count,
    }, sort_keys=True))
    return 0


def _cmd_analyze(args):
    cfg = load_run_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_representations(args.repr)
    per_class = split_by_class(data)
    ids = class_row_indices(data)
    models = _fit_class_models(per_class, cfg,
                               parallel=args.parallel_classes)

    report = class_log_density_stats(models, per_class, ids=ids)
    groups = detect_density_groups(report.class_means)
    group_of = {int(c): int(g)
                for c, g in zip(report.class_ids, groups.labels)}

    outputs = []
    stats_path = out_dir / "class_stats.csv"
    _write_csv(stats_path, ["class", "mean", "std", "group"],
               [(int(c), float(m), float(s),
                 "low" if group_of[int(c)] == 0 else "high")
                for c, m, s in zip(report.class_ids, report.class_means,
                                   report.class_stds)])
    outputs.append(("class_stats.csv", stats_path))

    scores = None
    if args.memorization and args.trials:
        raise ConfigurationError(
            "pass either --memorization or --trials, not both")
    if args.memorization:
        scores = _read_scores_csv(args.memorization, data.n)
    elif args.trials:
        inclusion, correctness = read_trial_records(args.trials)
        records = TrialRecords(inclusion=inclusion, correctness=correctness)
        if records.n_examples != data.n:
            raise ValidationError(
                f"trial records cover {records.n_examples} examples, "
                f"dataset has {data.n}")
        scores = memorization_from_trials(records)
    aligned = None if scores is None else scores[report.example_ids]

    binning = density_bins(report, aligned, group_of, bins=cfg.bins)
    bins_path = out_dir / "bins.csv"
    _write_csv(bins_path,
               ["bin", "mean_logp", "std_logp", "mean_mem", "std_mem",
                "low_frac", "high_frac"],
               [(b, binning.mean_logp[b], binning.std_logp[b],
                 binning.mean_mem[b], binning.std_mem[b],
                 binning.low_frac[b], binning.high_frac[b])
                for b in range(binning.bins)])
    outputs.append(("bins.csv", bins_path))

    queries = load_representations(args.queries) if args.queries else data
    counts = {int(c): int((data.labels == c).sum()) for c in data.class_ids()}
    priors = {c: counts[c] / data.n for c in counts}
    result = generative_classify(models, priors, queries.rows,
                                 truth=queries.labels.astype(np.int64))
    pred_path = out_dir / "predictions.csv"
    _write_csv(pred_path, ["example_id", "truth", "predicted"],
               [(i, int(queries.labels[i]), int(result.predicted[i]))
                for i in range(queries.n)])
    outputs.append(("predictions.csv", pred_path))

    details = {"classes": len(per_class),
               "group_separation": groups.separation,
               "macro_f": result.macro_f}
    if args.kl_matrix:
        kcfg = KLConfig(samples_per_snapshot=cfg.kl_samples, seed=cfg.seed)
        matrix = between_class_kl_matrix(models, kcfg,
                                         min_class_size=cfg.min_class_size)
        kl_path = out_dir / "kl_matrix.csv"
        rows = [(int(matrix.class_ids[i]), int(matrix.class_ids[j]),
                 matrix.estimates[i, j], matrix.stderrs[i, j])
                for i in range(len(matrix.class_ids))
                for j in range(len(matrix.class_ids))]
        _write_csv(kl_path, ["from", "to", "estimate", "stderr"], rows)
        outputs.append(("kl_matrix.csv", kl_path))
        details["kl_offdiag_mean"] = matrix.offdiag_mean
        details["kl_offdiag_std"] = matrix.offdiag_std

    _write_manifest(out_dir / "manifest.json", "analyze", cfg.as_dict(),
                    outputs, details=details)
    return 0


def _cmd_classify(args):
    cfg = load_run_config(args.config)
    train = load_representations(args.train)
    queries = load_representations(args.queries)
    per_class = split_by_class(train)
    models = _fit_class_models(per_class, cfg,
                               parallel=args.parallel_classes)
    counts = {int(c): int((train.labels == c).sum())
              for c in train.class_ids()}
    priors = {c: counts[c] / train.n for c in counts}
    result = generative_classify(models, priors, queries.rows,
                                 truth=queries.labels.astype(np.int64))
    _write_csv(args.out, ["example_id", "truth", "predicted"],
               [(i, int(queries.labels[i]), int(result.predicted[i]))
                for i in range(queries.n)])
    _write_manifest(str(args.out) + ".manifest.json", "classify",
                    cfg.as_dict(),
                    [(os.path.basename(args.out), args.out)],
                    details={"macro_f": result.macro_f})
    print(json.dumps({"macro_f": result.macro_f}))
    return 0


def _cmd_certify(args):
    cfg = load_run_config(args.config)
    points = load_representations(args.points)
    ccfg = cfg.certify_config()
    classifier = _SubprocessClassifier(args.classifier)
    rows = []
    try:
        for i in range(points.n):
            rng = np.random.default_rng(_derive_seed(cfg.seed, i))
            outcome = certify(classifier, points.rows[i], ccfg, rng=rng,
                              batch_size=args.batch_size)
            rows.append((i, int(outcome.abstain), outcome.class_id,
                         outcome.p_lower, outcome.radius))
    finally:
        classifier.close()
    _write_csv(args.out, ["example_id", "abstain", "class", "p_lower",
                          "radius"], rows)
    _write_manifest(str(args.out) + ".manifest.json", "certify",
                    cfg.as_dict(),
                    [(os.path.basename(args.out), args.out)],
                    details={"points": str(args.points),
                             "classifier": args.classifier})
    return 0


def _cmd_mem_scores(args):
    inclusion, correctness = read_trial_records(args.trials)
    records = TrialRecords(inclusion=inclusion, correctness=correctness)
    scores = memorization_from_trials(records)
    _write_csv(args.out, ["example_id", "score"],
               [(i, float(scores[i])) for i in range(records.n_examples)])
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="repdensity",
        description="Class-conditional density models for neural "
                    "representations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="summarize a representation file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("reduce", help="center and SVD-project a file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--variance", type=float)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("fit", help="run the blocked sampler on one class")
    p.add_argument("--input", required=True)
    p.add_argument("--class", dest="class_id", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("density", help="per-row log-densities under a model")
    p.add_argument("--model", required=True)
    p.add_argument("--repr", required=True)
    p.add_argument("--class", dest="class_id", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("kl", help="KL estimate against a reference")
    p.add_argument("--p", required=True)
    p.add_argument("--p-repr", required=True)
    p.add_argument("--p-class", dest="p_class", type=int)
    p.add_argument("--q", required=True,
                   help="snapshot archive path or 'maxent'")
    p.add_argument("--q-repr")
    p.add_argument("--q-class", dest="q_class", type=int)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_kl)

    p = sub.add_parser("analyze", help="full per-class analysis pipeline")
    p.add_argument("--repr", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--memorization", help="CSV of example_id,score")
    p.add_argument("--trials", help="trial records file")
    p.add_argument("--queries", help="representation file to classify")
    p.add_argument("--kl-matrix", action="store_true")
    p.add_argument("--parallel-classes", type=int, default=1)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("classify", help="generative classification")
    p.add_argument("--train", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel-classes", type=int, default=1)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("certify", help="randomized-smoothing certification")
    p.add_argument("--config")
    p.add_argument("--points", required=True)
    p.add_argument("--classifier", required=True,
                   help="subprocess command reading batched vectors")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=1000)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("mem-scores",
                       help="aggregate memorization scores from trials")
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mem_scores)

    return parser


def _emit_error(kind, message, **extra):
    payload = {"error": {"kind": kind, "message": message, **extra}}
    print(json.dumps(payload, sort_keys=True))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RepdensityError as exc:
        _emit_error(exc.kind, str(exc))
        return 1
    except FileNotFoundError as exc:
        _emit_error("missing_file", str(exc),
                    path=str(exc.filename) if exc.filename else "")
        return 1


if __name__ == "__main__":
    sys.exit(main())
