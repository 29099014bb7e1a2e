"""Binary file formats (all little-endian).

Representation file:   "REPR" | version u16 | precision u8 (4=f32, 8=f64) |
                       reserved u8 | n u64 | d u64 | stage length u16 +
                       UTF-8 bytes | labels n x u32 | row-major floats.
Trial records:         "TRLS" | version u16 | n_examples u64 | n_trials u64 |
                       per trial an inclusion bitmask then a correctness
                       bitmask, each ceil(n/8) bytes, big-endian bit order.
Snapshot archive:      "DPSS" | version u16 | n u64 | d u64 | count u64 |
                       per snapshot alpha f64 + assignments n x u64.
"""

import struct

import numpy as np

from .dataset import RepresentationDataset
from .errors import CorruptionError, FormatError
from .sampler import ChainSnapshot

REPR_MAGIC = b"REPR"
TRLS_MAGIC = b"TRLS"
DPSS_MAGIC = b"DPSS"
FORMAT_VERSION = 1


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, size, what):
        if self.off + size > len(self.buf):
            raise CorruptionError(
                f"{self.path}: truncated while reading {what} "
                f"(need {size} bytes at offset {self.off}, "
                f"have {len(self.buf) - self.off})")
        out = self.buf[self.off:self.off + size]
        self.off += size
        return out

    def unpack(self, fmt, what):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt),
                                                  what))

    def array(self, dtype, count, what):
        dt = np.dtype(dtype)
        raw = self.take(dt.itemsize * count, what)
        return np.frombuffer(raw, dtype=dt, count=count).copy()

    def expect_end(self):
        if self.off != len(self.buf):
            raise CorruptionError(
                f"{self.path}: {len(self.buf) - self.off} trailing bytes "
                "after declared payload")


def _check_magic(reader, magic):
    got = bytes(reader.take(4, "magic"))
    if got != magic:
        raise FormatError(
            f"{reader.path}: bad magic {got!r}, expected {magic!r}")
    (version,) = reader.unpack("H", "version")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{reader.path}: unsupported version {version}")


def write_representations(data, path):
    """Write a RepresentationDataset; round-trips bit-exactly."""
    stage = data.stage.encode("utf-8")
    n, d = data.rows.shape
    with open(path, "wb") as fh:
        fh.write(REPR_MAGIC)
        fh.write(struct.pack("<HBBQQ", FORMAT_VERSION, data.precision, 0,
                             n, d))
        fh.write(struct.pack("<H", len(stage)))
        fh.write(stage)
        fh.write(np.ascontiguousarray(data.labels, dtype="<u4").tobytes())
        fdt = "<f4" if data.precision == 4 else "<f8"
        fh.write(np.ascontiguousarray(data.rows, dtype=fdt).tobytes())


def read_representation_fields(path):
    """Structurally parse a representation file without value validation.

    Returns a dict with n, d, precision, stage, labels and rows; used by
    `inspect`, which reports finiteness instead of rejecting it.
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), str(path))
    _check_magic(reader, REPR_MAGIC)
    precision, _reserved, n, d = reader.unpack("BBQQ", "header")
    if precision not in (4, 8):
        raise FormatError(f"{path}: unsupported precision marker {precision}")
    (stage_len,) = reader.unpack("H", "stage length")
    try:
        stage = bytes(reader.take(stage_len, "stage tag")).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptionError(f"{path}: undecodable stage tag") from exc
    labels = reader.array("<u4", n, "labels")
    fdt = "<f4" if precision == 4 else "<f8"
    rows = reader.array(fdt, n * d, "rows").reshape(n, d)
    reader.expect_end()
    return {"n": n, "d": d, "precision": precision, "stage": stage,
            "labels": labels, "rows": rows}


def load_representations(path):
    """Read and validate a representation file.

    Raises FormatError on a bad header, CorruptionError on a truncated
    payload, and ValidationError naming the first non-finite row.
    """
    fields = read_representation_fields(path)
    return RepresentationDataset(rows=fields["rows"],
                                 labels=fields["labels"],
                                 stage=fields["stage"],
                                 precision=fields["precision"])


def write_trial_records(inclusion, correctness, path):
    """Write trial masks: two (n_trials, n_examples) boolean arrays."""
    inclusion = np.atleast_2d(np.asarray(inclusion, dtype=bool))
    correctness = np.atleast_2d(np.asarray(correctness, dtype=bool))
    if inclusion.shape != correctness.shape:
        raise CorruptionError("inclusion and correctness shapes differ")
    n_trials, n_examples = inclusion.shape
    with open(path, "wb") as fh:
        fh.write(TRLS_MAGIC)
        fh.write(struct.pack("<HQQ", FORMAT_VERSION, n_examples, n_trials))
        for t in range(n_trials):
            fh.write(np.packbits(inclusion[t]).tobytes())
            fh.write(np.packbits(correctness[t]).tobytes())


def read_trial_records(path):
    """Read trial masks; returns (inclusion, correctness) boolean arrays."""
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), str(path))
    _check_magic(reader, TRLS_MAGIC)
    n_examples, n_trials = reader.unpack("QQ", "trial header")
    mask_bytes = (n_examples + 7) // 8
    inclusion = np.empty((n_trials, n_examples), dtype=bool)
    correctness = np.empty((n_trials, n_examples), dtype=bool)
    for t in range(n_trials):
        for name, target in (("inclusion", inclusion),
                             ("correctness", correctness)):
            raw = reader.array(np.uint8, mask_bytes, f"trial {t} {name}")
            target[t] = np.unpackbits(raw)[:n_examples].astype(bool)
    reader.expect_end()
    return inclusion, correctness


def write_snapshot_archive(snapshots, d, path):
    """Write retained chain snapshots plus the training-matrix shape."""
    if not snapshots:
        raise CorruptionError("refusing to write an empty snapshot archive")
    n = snapshots[0].assignments.shape[0]
    with open(path, "wb") as fh:
        fh.write(DPSS_MAGIC)
        fh.write(struct.pack("<HQQQ", FORMAT_VERSION, n, d, len(snapshots)))
        for snap in snapshots:
            if snap.assignments.shape[0] != n:
                raise CorruptionError("snapshots disagree on n")
            fh.write(struct.pack("<d", snap.alpha))
            fh.write(np.ascontiguousarray(snap.assignments,
                                          dtype="<u8").tobytes())


def read_snapshot_archive(path):
    """Read a snapshot archive; returns (snapshots, n, d).

    Archives do not persist sweep indices; snapshots are renumbered
    ordinally on read.
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), str(path))
    _check_magic(reader, DPSS_MAGIC)
    n, d, count = reader.unpack("QQQ", "archive header")
    snapshots = []
    for i in range(count):
        (alpha,) = reader.unpack("d", f"snapshot {i} alpha")
        assignments = reader.array("<u8", n, f"snapshot {i} assignments")
        snapshots.append(ChainSnapshot(assignments=assignments, alpha=alpha,
                                       step_index=i))
    reader.expect_end()
    return snapshots, n, d
