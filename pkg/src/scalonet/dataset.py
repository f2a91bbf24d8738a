"""ECG record ingestion, normalization, and the labeled dataset manifest.

Records arrive either as little-endian float64 binary or as
newline-delimited decimal text. The manifest is a CSV with a header row:
``record_id,path,label,provenance`` (UTF-8, LF line endings); reading a
manifest and writing it back reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

from scalonet.errors import DataError
from scalonet.util import atomic_write_text


class ClassLabel(enum.IntEnum):
    """The three target conditions, in fixed index order."""

    ARR = 0
    NSR = 1
    CHF = 2

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name]
        except KeyError:
            raise DataError(f"unknown class label {name!r}") from None


CLASS_NAMES = tuple(label.name for label in ClassLabel)
NUM_CLASSES = len(CLASS_NAMES)

RAW_BINARY = "raw-binary-f64"
DELIMITED_TEXT = "delimited-text"


@dataclass
class Signal:
    """One ECG recording: samples, sampling rate, optional label."""

    samples: np.ndarray
    fs: float
    label: ClassLabel | None = None
    record_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DataError(f"signal {self.record_id!r} must be a non-empty 1-D sequence")
        if not self.fs > 0:
            raise DataError(f"signal {self.record_id!r} has non-positive sampling rate")

    @property
    def duration(self) -> float:
        return (self.samples.size - 1) / self.fs


def load_record(path, fmt: str, fs: float, label=None, record_id=None) -> Signal:
    """Parse a raw record file; no normalization is applied."""
    rid = record_id if record_id is not None else os.path.splitext(os.path.basename(path))[0]
    try:
        if fmt == RAW_BINARY:
            samples = np.fromfile(path, dtype="<f8")
        elif fmt == DELIMITED_TEXT:
            with open(path, "r", encoding="utf-8") as fh:
                tokens = fh.read().split()
            samples = np.array([float(tok) for tok in tokens], dtype=np.float64)
        else:
            raise DataError(f"unknown record format {fmt!r}")
    except OSError as exc:
        raise DataError(f"cannot read record {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"malformed numeric content in {path}: {exc}") from exc
    if samples.size == 0:
        raise DataError(f"zero-length record: {path}")
    if not np.all(np.isfinite(samples)):
        raise DataError(f"non-finite samples in {path}")
    return Signal(samples, fs, label=label, record_id=rid)


def normalize(s: Signal) -> Signal:
    """Scale by the record's max absolute value; all-zero records pass through."""
    peak = np.max(np.abs(s.samples))
    if peak == 0.0:
        return replace(s, samples=s.samples.copy())
    return replace(s, samples=s.samples / peak)


def resample(s: Signal, target_fs: float) -> Signal:
    """Linear interpolation onto a uniform grid at target_fs over the same span."""
    if not target_fs > 0:
        raise DataError("target_fs must be positive")
    if target_fs == s.fs:
        return replace(s, samples=s.samples.copy())
    n_out = int(np.floor(s.duration * target_fs + 1e-9)) + 1
    t_old = np.arange(s.samples.size) / s.fs
    t_new = np.arange(n_out) / target_fs
    return replace(s, samples=np.interp(t_new, t_old, s.samples), fs=float(target_fs))


def fix_length(s: Signal, n: int) -> Signal:
    """Truncate or zero-pad at the tail to exactly n samples."""
    if n <= 0:
        raise DataError("target length must be positive")
    cur = s.samples.size
    if cur == n:
        return replace(s, samples=s.samples.copy())
    if cur > n:
        return replace(s, samples=s.samples[:n].copy())
    out = np.zeros(n, dtype=np.float64)
    out[:cur] = s.samples
    return replace(s, samples=out)


PROVENANCE_ORIGINAL = "original"
PROVENANCE_AUGMENTED = "augmented"


@dataclass(frozen=True)
class ManifestEntry:
    record_id: str
    path: str
    label: ClassLabel
    provenance: str = PROVENANCE_ORIGINAL


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.record_id in seen:
                raise DataError(f"duplicate record_id {e.record_id!r}")
            seen.add(e.record_id)

    def __len__(self):
        return len(self.entries)

    def counts(self) -> dict[str, int]:
        c = {name: 0 for name in CLASS_NAMES}
        for e in self.entries:
            c[e.label.name] += 1
        return c

    def labels(self) -> np.ndarray:
        return np.array([int(e.label) for e in self.entries], dtype=np.int64)

    def originals(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.provenance == PROVENANCE_ORIGINAL]


def build_manifest(root, class_map: dict[str, ClassLabel] | None = None) -> DatasetManifest:
    """Scan a directory tree with one subdirectory per class.

    Files are listed in class-label order, sorted by name within a class;
    the record_id is the file stem.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise DataError(f"dataset root {root} does not exist")
    if class_map is None:
        class_map = {name: ClassLabel[name] for name in CLASS_NAMES}
    subdirs = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    unknown = [d for d in subdirs if d not in class_map]
    if unknown:
        raise DataError(f"unknown subdirectory name(s): {', '.join(unknown)}")
    by_label = sorted(class_map.items(), key=lambda kv: int(kv[1]))
    entries = []
    for dirname, label in by_label:
        cdir = os.path.join(root, dirname)
        if not os.path.isdir(cdir):
            continue
        for fname in sorted(os.listdir(cdir)):
            fpath = os.path.join(cdir, fname)
            if not os.path.isfile(fpath):
                continue
            rid = os.path.splitext(fname)[0]
            entries.append(
                ManifestEntry(rid, os.path.join(dirname, fname), label, PROVENANCE_ORIGINAL)
            )
    return DatasetManifest(entries)


_MANIFEST_HEADER = ["record_id", "path", "label", "provenance"]


def manifest_to_text(manifest: DatasetManifest) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_MANIFEST_HEADER)
    for e in manifest.entries:
        writer.writerow([e.record_id, e.path, e.label.name, e.provenance])
    return buf.getvalue()


def write_manifest(manifest: DatasetManifest, path):
    atomic_write_text(path, manifest_to_text(manifest))


def read_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not rows or rows[0] != _MANIFEST_HEADER:
        raise DataError(f"manifest {path} is missing the expected header row")
    entries = []
    for row in rows[1:]:
        if len(row) != 4:
            raise DataError(f"manifest {path}: malformed row {row!r}")
        rid, rel, label, prov = row
        if prov not in (PROVENANCE_ORIGINAL, PROVENANCE_AUGMENTED):
            raise DataError(f"manifest {path}: unknown provenance {prov!r}")
        entries.append(ManifestEntry(rid, rel, ClassLabel.from_name(label), prov))
    return DatasetManifest(entries)
