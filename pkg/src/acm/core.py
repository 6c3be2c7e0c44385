"""Shared value types and vector math.

Every learner works on L2-normalised float32 feature vectors compared with
cosine distance.  On the unit sphere ``1 - <u, v> == 0.5 * ||u - v||^2``; the
second form is what gets computed because it is exactly zero for identical
vectors and never negative under rounding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from acm.errors import DimMismatch, ZeroVector

FEATURE_DTYPE = np.float32
ABSTAIN = -1

ZERO_NORM = 1e-12


def as_feature(values, dim: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a finite 1-d float32 array, optionally checking its width."""
    v = np.ascontiguousarray(values, dtype=FEATURE_DTYPE)
    if v.ndim != 1:
        raise DimMismatch(f"feature must be 1-d, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimMismatch(f"expected dim {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("feature contains NaN or Inf")
    return v


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v)
    norm = float(np.linalg.norm(v.astype(np.float64)))
    if norm < ZERO_NORM:
        raise ZeroVector("cannot normalise a zero vector")
    return (v.astype(np.float64) / norm).astype(FEATURE_DTYPE)


def cosine_distance(u, v) -> float:
    """Cosine distance between two unit vectors, in [0, 2]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"shapes differ: {u.shape} vs {v.shape}")
    diff = u - v
    return float(min(2.0, 0.5 * np.dot(diff, diff)))


@dataclass(frozen=True)
class StreamRecord:
    id: int
    timestamp: int
    label: int
    feature: np.ndarray

    def with_feature(self, feature: np.ndarray) -> "StreamRecord":
        return StreamRecord(self.id, self.timestamp, self.label, feature)


@dataclass(frozen=True)
class NeighborHit:
    entry_id: int
    label: int
    distance: float


@dataclass(frozen=True)
class PredictionOutcome:
    timestep: int
    predicted: int
    truth: int
    correct: bool
    predict_latency: int
    learn_latency: int
    current_k: int | None = None


def null_clock() -> int:
    """Clock that always reads zero; makes latency columns reproducible."""
    return 0


class OnlineClassifier:
    """Predict-then-learn protocol shared by every method.

    ``classify`` only ever sees the feature, so the label of the record being
    predicted cannot leak into the prediction.
    """

    def classify(self, z) -> int:
        raise NotImplementedError

    def learn(self, z, y: int) -> None:
        raise NotImplementedError

    @property
    def current_k(self) -> int | None:
        return None

    @property
    def size(self) -> int:
        """Number of stored samples (memory footprint proxy)."""
        return 0

    def step(self, record: StreamRecord, timestep: int, clock=None) -> PredictionOutcome:
        clock = clock or time.perf_counter_ns
        z = record.feature
        t0 = clock()
        predicted = self.classify(z)
        t1 = clock()
        self.learn(z, record.label)
        t2 = clock()
        return PredictionOutcome(
            timestep=timestep,
            predicted=int(predicted),
            truth=int(record.label),
            correct=predicted == record.label,
            predict_latency=t1 - t0,
            learn_latency=t2 - t1,
            current_k=self.current_k,
        )
