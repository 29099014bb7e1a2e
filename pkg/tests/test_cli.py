"""End-to-end CLI contracts: artifacts, manifests, exit codes."""

import csv
import json
import sys

import numpy as np
import pytest

from repdensity import RepresentationDataset, write_representations
from repdensity.cli import main
from repdensity.io import load_representations, write_trial_records

CONFIG = """
[run]
seed = 7

[sampler]
sweeps = 20
burn_in = 10
thin = 2
block_size = 4

[kl]
samples_per_snapshot = 128

[analysis]
min_class_size = 10
bins = 5

[certify]
sigma = 0.5
n0 = 20
n = 400
alpha = 0.01
"""

CLASSIFIER_SCRIPT = """
import struct
import sys

import numpy as np

d = int(sys.argv[1])
while True:
    header = sys.stdin.buffer.read(8)
    if len(header) < 8:
        break
    (m,) = struct.unpack("<Q", header)
    raw = sys.stdin.buffer.read(m * d * 8)
    pts = np.frombuffer(raw, dtype="<f8").reshape(m, d)
    out = (pts[:, 0] > 0).astype(int)
    sys.stdout.write("".join(f"{c}\\n" for c in out))
    sys.stdout.flush()
"""


@pytest.fixture
def workdir(tmp_path):
    rng = np.random.default_rng(0)
    rows = np.concatenate([rng.normal(-3, 1, size=(40, 2)),
                           rng.normal(3, 1, size=(40, 2)),
                           rng.normal((0.0, 6.0), 1, size=(40, 2))])
    labels = np.repeat([0, 1, 2], 40)
    data = RepresentationDataset(rows=rows, labels=labels, stage="stage3")
    repr_path = tmp_path / "train.repr"
    write_representations(data, repr_path)
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(CONFIG)
    return tmp_path, repr_path, cfg_path


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_inspect_reports_shape_and_classes(workdir, capsys):
    _, repr_path, _ = workdir
    assert main(["inspect", str(repr_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n"] == 120
    assert report["d"] == 2
    assert report["stage"] == "stage3"
    assert report["classes"] == {"0": 40, "1": 40, "2": 40}
    assert report["finite"] is True


def test_inspect_flags_non_finite(workdir, capsys):
    tmp, _, _ = workdir
    rows = np.zeros((3, 2))
    rows[1, 0] = np.inf
    bad = RepresentationDataset.__new__(RepresentationDataset)
    bad.rows = rows
    bad.labels = np.zeros(3, dtype=np.uint32)
    bad.stage = ""
    bad.precision = 8
    path = tmp / "bad.repr"
    write_representations(bad, path)
    assert main(["inspect", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["finite"] is False
    assert report["first_non_finite_row"] == 1


def test_missing_input_exits_one_with_error_json(tmp_path, capsys):
    missing = tmp_path / "nope.repr"
    assert main(["inspect", str(missing)]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert "nope.repr" in payload["error"]["message"] + \
        payload["error"].get("path", "")


def test_unknown_flag_exits_two(workdir, capsys):
    _, repr_path, _ = workdir
    assert main(["inspect", str(repr_path), "--bogus"]) == 2
    capsys.readouterr()


def test_unknown_subcommand_exits_two(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_reduce_writes_projection(workdir, capsys):
    tmp, repr_path, cfg = workdir
    out = tmp / "reduced.repr"
    assert main(["reduce", "--input", str(repr_path), "--out", str(out),
                 "--dim", "1"]) == 0
    reduced = load_representations(out)
    assert reduced.d == 1
    assert reduced.n == 120
    manifest = json.loads((tmp / "reduced.repr.manifest.json").read_text())
    assert manifest["details"]["dim"] == 1
    assert 0 < manifest["details"]["variance_captured"] <= 1


def test_reduce_uses_stage_defaults_from_config(workdir, tmp_path, capsys):
    tmp, repr_path, _ = workdir
    cfg = tmp / "svd.cfg"
    cfg.write_text("[svd]\nstage3 = 2\n")
    out = tmp / "reduced2.repr"
    assert main(["reduce", "--input", str(repr_path), "--out", str(out),
                 "--config", str(cfg)]) == 0
    assert load_representations(out).d == 2


def test_fit_density_pipeline(workdir, capsys):
    tmp, repr_path, cfg = workdir
    archive = tmp / "class0.dpss"
    assert main(["fit", "--input", str(repr_path), "--class", "0",
                 "--config", str(cfg), "--out", str(archive)]) == 0
    capsys.readouterr()
    dens = tmp / "dens.csv"
    assert main(["density", "--model", str(archive), "--repr",
                 str(repr_path), "--class", "0", "--out", str(dens)]) == 0
    rows = _read_csv(dens)
    assert len(rows) == 120
    # in-class rows score higher under the class-0 model on average
    lp = np.array([float(r["log_density"]) for r in rows])
    cls = np.array([int(r["class_id"]) for r in rows])
    assert lp[cls == 0].mean() > lp[cls != 0].mean()


def test_density_wrong_class_selection_fails(workdir, capsys):
    tmp, repr_path, cfg = workdir
    archive = tmp / "class0b.dpss"
    main(["fit", "--input", str(repr_path), "--class", "0",
          "--config", str(cfg), "--out", str(archive)])
    capsys.readouterr()
    assert main(["density", "--model", str(archive), "--repr",
                 str(repr_path), "--out", str(tmp / "x.csv")]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["error"]["kind"] == "parameter"


def test_manifest_determinism_excluding_timestamp(workdir, capsys):
    tmp, repr_path, cfg = workdir
    out = tmp / "chain.dpss"
    manifest_path = tmp / "chain.dpss.manifest.json"
    main(["fit", "--input", str(repr_path), "--class", "1",
          "--config", str(cfg), "--out", str(out)])
    first_archive = out.read_bytes()
    first_manifest = manifest_path.read_bytes()
    main(["fit", "--input", str(repr_path), "--class", "1",
          "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    assert out.read_bytes() == first_archive
    ma = json.loads(first_manifest)
    mb = json.loads(manifest_path.read_text())
    ma.pop("timestamp")
    mb.pop("timestamp")
    assert json.dumps(ma, sort_keys=True) == json.dumps(mb, sort_keys=True)


def test_kl_maxent_json(workdir, capsys):
    tmp, repr_path, cfg = workdir
    archive = tmp / "class2.dpss"
    main(["fit", "--input", str(repr_path), "--class", "2",
          "--config", str(cfg), "--out", str(archive)])
    capsys.readouterr()
    assert main(["kl", "--p", str(archive), "--p-repr", str(repr_path),
                 "--p-class", "2", "--q", "maxent", "--m", "128",
                 "--seed", "5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) >= {"estimate", "stderr", "n_snapshots",
                            "samples_per_snapshot"}
    assert payload["estimate"] > -3 * payload["stderr"]


def test_kl_between_archives(workdir, capsys):
    tmp, repr_path, cfg = workdir
    a, b = tmp / "p.dpss", tmp / "q.dpss"
    main(["fit", "--input", str(repr_path), "--class", "0",
          "--config", str(cfg), "--out", str(a)])
    main(["fit", "--input", str(repr_path), "--class", "1",
          "--config", str(cfg), "--out", str(b)])
    capsys.readouterr()
    assert main(["kl", "--p", str(a), "--p-repr", str(repr_path),
                 "--p-class", "0", "--q", str(b), "--q-repr",
                 str(repr_path), "--q-class", "1", "--m", "128"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["estimate"] > 1.0


def test_analyze_emits_all_artifacts(workdir, capsys):
    tmp, repr_path, cfg = workdir
    rng = np.random.default_rng(1)
    inclusion = rng.random((30, 120)) < 0.5
    inclusion[0], inclusion[1] = True, False
    correctness = rng.random((30, 120)) < 0.7
    trials = tmp / "trials.trls"
    write_trial_records(inclusion, correctness, trials)

    out_dir = tmp / "analysis"
    assert main(["analyze", "--repr", str(repr_path), "--config", str(cfg),
                 "--out-dir", str(out_dir), "--trials", str(trials),
                 "--kl-matrix", "--parallel-classes", "2"]) == 0
    capsys.readouterr()

    stats = _read_csv(out_dir / "class_stats.csv")
    assert len(stats) == 3
    assert {r["group"] for r in stats} <= {"low", "high"}
    means = [float(r["mean"]) for r in stats]
    assert means == sorted(means)

    bins = _read_csv(out_dir / "bins.csv")
    assert len(bins) == 5
    assert all(r["mean_mem"] not in ("", "nan") for r in bins)

    kl = _read_csv(out_dir / "kl_matrix.csv")
    assert len(kl) == 9

    preds = _read_csv(out_dir / "predictions.csv")
    assert len(preds) == 120
    agree = np.mean([r["truth"] == r["predicted"] for r in preds])
    assert agree > 0.9

    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"class_stats.csv", "bins.csv",
                                        "kl_matrix.csv", "predictions.csv"}


def test_classify_reports_macro_f(workdir, capsys):
    tmp, repr_path, cfg = workdir
    rng = np.random.default_rng(2)
    rows = np.concatenate([rng.normal(-3, 1, size=(10, 2)),
                           rng.normal(3, 1, size=(10, 2)),
                           rng.normal((0.0, 6.0), 1, size=(10, 2))])
    queries = RepresentationDataset(rows=rows,
                                    labels=np.repeat([0, 1, 2], 10))
    qpath = tmp / "queries.repr"
    write_representations(queries, qpath)
    out = tmp / "pred.csv"
    assert main(["classify", "--train", str(repr_path), "--queries",
                 str(qpath), "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["macro_f"] > 0.9
    assert len(_read_csv(out)) == 30


def test_certify_with_subprocess_classifier(workdir, capsys):
    tmp, _, cfg = workdir
    rng = np.random.default_rng(3)
    pts = RepresentationDataset(
        rows=np.array([[4.0, 0.0], [-4.0, 0.0], [0.05, 0.0]]),
        labels=np.array([1, 0, 1]))
    ppath = tmp / "points.repr"
    write_representations(pts, ppath)
    script = tmp / "clf.py"
    script.write_text(CLASSIFIER_SCRIPT)
    out = tmp / "cert.csv"
    cmd = f"{sys.executable} {script} 2"
    assert main(["certify", "--config", str(cfg), "--points", str(ppath),
                 "--classifier", cmd, "--out", str(out),
                 "--batch-size", "200"]) == 0
    capsys.readouterr()
    rows = _read_csv(out)
    assert len(rows) == 3
    # far from the boundary: certified with the matching class
    assert rows[0]["abstain"] == "0" and rows[0]["class"] == "1"
    assert rows[1]["abstain"] == "0" and rows[1]["class"] == "0"
    assert float(rows[0]["radius"]) > 0.5
    # near the boundary: the noisy vote is split, so it abstains
    assert rows[2]["abstain"] == "1"
    assert rows[2]["class"] == ""


def test_mem_scores_roundtrip(workdir, capsys):
    tmp, _, _ = workdir
    inclusion = np.array([[True, False], [False, True], [True, True],
                          [False, False]])
    correctness = np.array([[True, False], [False, True], [True, False],
                            [False, False]])
    trials = tmp / "t.trls"
    write_trial_records(inclusion, correctness, trials)
    out = tmp / "scores.csv"
    assert main(["mem-scores", "--trials", str(trials), "--out",
                 str(out)]) == 0
    rows = _read_csv(out)
    assert len(rows) == 2
    # example 0: included twice (both correct), excluded twice (none) -> 1
    assert float(rows[0]["score"]) == pytest.approx(1.0)


def test_thread_env_caps_workers(monkeypatch):
    from repdensity.cli import _max_workers
    monkeypatch.delenv("REPDENSITY_THREADS", raising=False)
    assert _max_workers(4) == 4
    monkeypatch.setenv("REPDENSITY_THREADS", "2")
    assert _max_workers(4) == 2
    assert _max_workers(1) == 1


def test_subcommands_do_not_mutate_inputs(workdir, capsys):
    tmp, repr_path, cfg = workdir
    before = repr_path.read_bytes()
    main(["analyze", "--repr", str(repr_path), "--config", str(cfg),
          "--out-dir", str(tmp / "ro")])
    capsys.readouterr()
    assert repr_path.read_bytes() == before


def test_bad_config_key_rejected(workdir, capsys):
    tmp, repr_path, _ = workdir
    cfg = tmp / "bad.cfg"
    cfg.write_text("[sampler]\nsweepz = 10\n")
    assert main(["fit", "--input", str(repr_path), "--config", str(cfg),
                 "--out", str(tmp / "x.dpss")]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["error"]["kind"] == "configuration"
