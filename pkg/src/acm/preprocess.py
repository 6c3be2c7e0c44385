"""Feature preprocessing: projection, online standardisation, normalisation.

Pipeline order is fixed: project -> standardise -> L2-normalise, so every
learner receives unit vectors.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from acm.core import FEATURE_DTYPE, ZERO_NORM, l2_normalize
from acm.errors import BadMagic, DimMismatch, InvalidConfig, NotFitted, TruncatedFile

WEIGHTS_MAGIC = b"ACMW1\0"


@dataclass
class RunningMoments:
    """Welford accumulator for per-dimension mean and population variance."""

    dim: int
    eps: float = 1e-8
    count: int = 0
    mean: np.ndarray = field(default=None)
    m2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim, np.float64)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim, np.float64)

    @property
    def variance(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.dim, np.float64)
        return self.m2 / self.count

    def update(self, x) -> "RunningMoments":
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {x.shape}")
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        return self

    def transform(self, x) -> np.ndarray:
        if self.count == 0:
            raise NotFitted("scaler has seen no samples")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {x.shape}")
        return ((x - self.mean) / np.sqrt(self.variance + self.eps)).astype(FEATURE_DTYPE)

    def copy(self) -> "RunningMoments":
        return RunningMoments(self.dim, self.eps, self.count, self.mean.copy(), self.m2.copy())


def scaler_update(s: RunningMoments, x) -> RunningMoments:
    return s.update(x)


def scaler_transform(s: RunningMoments, x) -> np.ndarray:
    return s.transform(x)


class ProjectionKind(enum.IntEnum):
    AFFINE = 0
    MLP2 = 1
    RANDOM = 2


@dataclass
class ProjectionWeights:
    """A stored feature map: one affine layer, or two with a ReLU between.

    ``matrices[i]`` has shape (out, in) and maps column vectors; biases match
    the output width of their layer.  Batch-norm layers are expected to be
    folded into these affine maps by whatever exported them.
    """

    kind: ProjectionKind
    matrices: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.kind = ProjectionKind(self.kind)
        self.matrices = [np.asarray(w, dtype=np.float32) for w in self.matrices]
        self.biases = [np.asarray(b, dtype=np.float32) for b in self.biases]
        want = 2 if self.kind is ProjectionKind.MLP2 else 1
        if len(self.matrices) != want or len(self.biases) != want:
            raise InvalidConfig(f"{self.kind.name} needs {want} layer(s)")
        for i, (w, b) in enumerate(zip(self.matrices, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidConfig(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i and w.shape[1] != self.matrices[i - 1].shape[0]:
                raise InvalidConfig(f"layer {i} input does not match previous output")

    @property
    def in_dim(self) -> int:
        return self.matrices[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrices[-1].shape[0]

    @classmethod
    def random(cls, in_dim: int, out_dim: int, seed: int = 0) -> "ProjectionWeights":
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((out_dim, in_dim)) / np.sqrt(out_dim)
        return cls(ProjectionKind.RANDOM, [w], [np.zeros(out_dim)])

    @classmethod
    def identity(cls, dim: int) -> "ProjectionWeights":
        return cls(ProjectionKind.AFFINE, [np.eye(dim)], [np.zeros(dim)])

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float32)
        if x.shape[-1] != self.in_dim:
            raise DimMismatch(f"expected dim {self.in_dim}, got {x.shape[-1]}")
        h = x @ self.matrices[0].T + self.biases[0]
        if self.kind is ProjectionKind.MLP2:
            h = np.maximum(h, 0.0) @ self.matrices[1].T + self.biases[1]
        return h.astype(FEATURE_DTYPE)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ProjectionWeights":
        return cls.from_bytes(Path(path).read_bytes())

    def to_bytes(self) -> bytes:
        parts = [WEIGHTS_MAGIC, struct.pack("<II", int(self.kind), len(self.matrices))]
        for w, b in zip(self.matrices, self.biases):
            parts.append(struct.pack("<II", *w.shape))
            parts.append(w.astype("<f4").tobytes())
            parts.append(b.astype("<f4").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ProjectionWeights":
        if buf[:6] != WEIGHTS_MAGIC:
            raise BadMagic("not a projection weights file")
        off = 6
        try:
            kind, layers = struct.unpack_from("<II", buf, off)
            off += 8
            mats, biases = [], []
            for _ in range(layers):
                rows, cols = struct.unpack_from("<II", buf, off)
                off += 8
                need = 4 * (rows * cols + rows)
                if len(buf) < off + need:
                    raise TruncatedFile("weights truncated")
                mats.append(np.frombuffer(buf, "<f4", rows * cols, off).reshape(rows, cols))
                off += 4 * rows * cols
                biases.append(np.frombuffer(buf, "<f4", rows, off))
                off += 4 * rows
        except struct.error as exc:
            raise TruncatedFile("weights header truncated") from exc
        if off != len(buf):
            raise TruncatedFile("trailing bytes after weights")
        return cls(ProjectionKind(kind), mats, biases)


def project(w: ProjectionWeights, x) -> np.ndarray:
    return w.apply(x)


class Preprocessor:
    """Stateful project -> scale -> normalise pipeline.

    The scaler keeps learning from every feature it sees (labels are never
    involved).  Until it has two samples its statistics are degenerate, so
    standardisation is skipped and only normalisation applies.  The same
    fallback is used when standardising leaves nothing, as happens while
    every sample seen so far is identical.
    """

    def __init__(self, in_dim: int, projection: ProjectionWeights | None = None,
                 use_scaler: bool = True, eps: float = 1e-8):
        if projection is not None and projection.in_dim != in_dim:
            raise DimMismatch(f"projection expects {projection.in_dim}, features have {in_dim}")
        self.in_dim = in_dim
        self.projection = projection
        self.out_dim = projection.out_dim if projection is not None else in_dim
        self.scaler = RunningMoments(self.out_dim, eps) if use_scaler else None

    def _project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=FEATURE_DTYPE)
        if x.shape != (self.in_dim,):
            raise DimMismatch(f"expected dim {self.in_dim}, got shape {x.shape}")
        return self.projection.apply(x) if self.projection is not None else x

    def observe(self, x) -> None:
        """Fold a raw feature into the scaler statistics."""
        if self.scaler is not None:
            self.scaler.update(self._project(x))

    def transform(self, x) -> np.ndarray:
        """Map a raw feature to a unit vector using the current statistics."""
        h = self._project(x)
        if self.scaler is not None and self.scaler.count >= 2:
            z = self.scaler.transform(h)
            if np.linalg.norm(z) >= ZERO_NORM:
                h = z
        return l2_normalize(h)

    def __call__(self, x, update: bool = True) -> np.ndarray:
        if update:
            self.observe(x)
        return self.transform(x)
