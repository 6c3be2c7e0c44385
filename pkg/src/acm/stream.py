"""Feature-file ingestion, chronological splits and synthetic drifting streams."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from acm.core import StreamRecord
from acm.errors import (
    BadMagic,
    EmptyInput,
    InvalidConfig,
    LabelOutOfRange,
    NonFiniteFeature,
    TruncatedFile,
)

FEATURE_MAGIC = b"ACMF1\0"
_HEADER = struct.Struct("<IQI")  # dim, record count, class count
HEADER_SIZE = len(FEATURE_MAGIC) + _HEADER.size


def record_dtype(dim: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("timestamp", "<i8"), ("label", "<u4"),
                     ("feature", "<f4", (dim,))])


def write_feature_file(path, records: Sequence[StreamRecord], num_classes: int,
                       dim: int | None = None) -> None:
    if dim is None:
        if not records:
            raise EmptyInput("cannot infer dim from zero records")
        dim = len(records[0].feature)
    arr = np.zeros(len(records), record_dtype(dim))
    for i, r in enumerate(records):
        if not 0 <= r.label < num_classes:
            raise LabelOutOfRange(f"record {r.id}: label {r.label} >= {num_classes}")
        arr[i] = (r.id, r.timestamp, r.label, r.feature)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(_HEADER.pack(dim, len(records), num_classes))
        fh.write(arr.tobytes())


def read_feature_header(buf: bytes) -> tuple[int, int, int]:
    if buf[:len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise BadMagic("not a feature file")
    if len(buf) < HEADER_SIZE:
        raise TruncatedFile("header truncated")
    return _HEADER.unpack_from(buf, len(FEATURE_MAGIC))


def load_feature_file(path) -> list[StreamRecord]:
    buf = Path(path).read_bytes()
    dim, count, num_classes = read_feature_header(buf)
    dt = record_dtype(dim)
    expected = HEADER_SIZE + count * dt.itemsize
    if len(buf) != expected:
        raise TruncatedFile(f"expected {expected} bytes for {count} records, found {len(buf)}")
    arr = np.frombuffer(buf, dt, count, HEADER_SIZE)
    bad = np.flatnonzero(arr["label"] >= num_classes)
    if bad.size:
        raise LabelOutOfRange(f"record {int(arr['id'][bad[0]])} has label "
                               f"{int(arr['label'][bad[0]])} >= {num_classes}")
    feats = np.array(arr["feature"], dtype=np.float32)
    if not np.all(np.isfinite(feats)):
        row = int(np.flatnonzero(~np.isfinite(feats).all(axis=1))[0])
        raise NonFiniteFeature(f"record {int(arr['id'][row])} has a non-finite feature")
    ids = arr["id"].astype(np.int64)
    if np.unique(ids).size != ids.size:
        raise InvalidConfig("duplicate record ids")
    return [StreamRecord(int(i), int(t), int(y), f)
            for i, t, y, f in zip(ids, arr["timestamp"], arr["label"], feats)]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    dim: int
    count: int
    num_classes: int


def read_manifest(path) -> list[ManifestEntry]:
    """One dataset per line: ``path dim count classes``; '#' starts a comment."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        p, dim, count, classes = line.split()
        out.append(ManifestEntry(p, int(dim), int(count), int(classes)))
    return out


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    Path(path).write_text("".join(f"{e.path} {e.dim} {e.count} {e.num_classes}\n"
                                  for e in entries))


@dataclass(frozen=True)
class SplitSpec:
    pretrain_fraction: float = 0.2
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for f in (self.pretrain_fraction, self.test_fraction):
            if not 0.0 <= f < 1.0:
                raise InvalidConfig("fractions must lie in [0, 1)")
        if self.pretrain_fraction + self.test_fraction >= 1.0:
            raise InvalidConfig("fractions must sum to less than 1")


def chronological_split(records: Sequence[StreamRecord], spec: SplitSpec = SplitSpec()
                        ) -> tuple[list[StreamRecord], list[StreamRecord], list[StreamRecord]]:
    """Split into (pretrain, online, test).

    The test set is a seeded uniform sample across all time, drawn first; the
    pretrain set is the earliest part of what remains.
    """
    if not records:
        raise EmptyInput("nothing to split")
    ordered = sorted(records, key=lambda r: (r.timestamp, r.id))
    n = len(ordered)
    n_test = int(np.floor(spec.test_fraction * n))
    rng = np.random.default_rng(spec.seed)
    test_pos = np.zeros(n, bool)
    test_pos[rng.choice(n, size=n_test, replace=False)] = True
    test = [r for r, t in zip(ordered, test_pos) if t]
    rest = [r for r, t in zip(ordered, test_pos) if not t]
    n_pre = int(np.floor(spec.pretrain_fraction * len(rest)))
    return rest[:n_pre], rest[n_pre:], test


class DriftMode(enum.Enum):
    CLASS_INCREMENTAL = "class_incremental"
    MEAN_ROTATION = "mean_rotation"


@dataclass(frozen=True)
class DriftConfig:
    """Synthetic non-stationary stream of clustered unit vectors.

    Each class owns ``modes_per_class`` cluster centres.  A sample is its
    centre plus isotropic Gaussian noise of total scale ``sigma`` (per-axis
    standard deviation sigma / sqrt(dim)), projected back to the unit sphere.

    CLASS_INCREMENTAL: class c first appears at ``arrivals[c]`` (default: evenly
    spread over the first ``arrival_span`` fraction of the stream); each step
    draws uniformly among classes that have arrived.
    MEAN_ROTATION: every class is active from the start and every centre turns
    through ``rotation`` radians, at constant speed, over the stream.
    """

    num_classes: int = 10
    dim: int = 32
    samples: int = 1000
    mode: DriftMode = DriftMode.CLASS_INCREMENTAL
    sigma: float = 0.1
    modes_per_class: int = 1
    arrival_span: float = 1.0
    arrivals: tuple[int, ...] | None = None
    rotation: float = np.pi / 2
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", DriftMode(self.mode))
        if self.arrivals is not None:
            object.__setattr__(self, "arrivals", tuple(int(a) for a in self.arrivals))
        if self.num_classes < 1 or self.dim < 2 or self.samples < 1 or self.modes_per_class < 1:
            raise InvalidConfig("num_classes, samples and modes_per_class must be >= 1, dim >= 2")
        if self.sigma < 0:
            raise InvalidConfig("sigma must be non-negative")
        if not 0.0 <= self.arrival_span <= 1.0:
            raise InvalidConfig("arrival_span must lie in [0, 1]")
        if self.arrivals is not None:
            if len(self.arrivals) != self.num_classes:
                raise InvalidConfig("need one arrival step per class")
            if min(self.arrivals) != 0:
                raise InvalidConfig("some class must be active at step 0")

    def arrival_steps(self) -> np.ndarray:
        if self.arrivals is not None:
            return np.asarray(self.arrivals, np.int64)
        span = self.arrival_span * self.samples
        return np.floor(np.arange(self.num_classes) * span / self.num_classes).astype(np.int64)


def _unit_rows(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def generate_drift_stream(config: DriftConfig) -> list[StreamRecord]:
    c = config
    rng = np.random.default_rng(c.seed)
    centres = _unit_rows(rng.standard_normal((c.num_classes, c.modes_per_class, c.dim)))
    if c.mode is DriftMode.MEAN_ROTATION:
        other = rng.standard_normal(centres.shape)
        other -= np.sum(other * centres, axis=-1, keepdims=True) * centres
        other = _unit_rows(other)
        arrivals = np.zeros(c.num_classes, np.int64)
    else:
        arrivals = c.arrival_steps()
    order = np.argsort(arrivals, kind="stable")
    sorted_arrivals = arrivals[order]
    records = []
    for t in range(c.samples):
        active = int(np.searchsorted(sorted_arrivals, t, side="right"))
        label = int(order[rng.integers(active)])
        mode = int(rng.integers(c.modes_per_class))
        centre = centres[label, mode]
        if c.mode is DriftMode.MEAN_ROTATION:
            theta = c.rotation * t / c.samples
            centre = np.cos(theta) * centre + np.sin(theta) * other[label, mode]
        noise = rng.standard_normal(c.dim) * (c.sigma / np.sqrt(c.dim))
        x = centre + noise
        norm = np.linalg.norm(x)
        feature = (x / norm if norm > 0 else centre).astype(np.float32)
        records.append(StreamRecord(t, t, label, feature))
    return records
