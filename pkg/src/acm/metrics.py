"""Evaluation metrics: running online accuracy, information retention, and
near-future accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from acm.core import PredictionOutcome, StreamRecord
from acm.errors import DelayTooLarge, EmptyLog, EmptyTestSet


@dataclass
class OutcomeLog:
    """Per-step outcomes of one online run.

    ``delayed[i]`` optionally records whether the model state right after
    step i classified the record ``delay`` steps later correctly.
    """

    outcomes: list[PredictionOutcome] = field(default_factory=list)
    delay: int | None = None
    delayed: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def append(self, outcome: PredictionOutcome) -> None:
        if self.outcomes and outcome.timestep <= self.outcomes[-1].timestep:
            raise ValueError("timesteps must be strictly increasing")
        self.outcomes.append(outcome)

    @property
    def correct(self) -> np.ndarray:
        return np.fromiter((o.correct for o in self.outcomes), bool, len(self.outcomes))


def _flags(log) -> np.ndarray:
    if isinstance(log, OutcomeLog):
        return log.correct
    items = list(log)
    if items and isinstance(items[0], PredictionOutcome):
        return np.array([o.correct for o in items], bool)
    return np.asarray(items, bool)


def running_mean(flags) -> np.ndarray:
    flags = np.asarray(flags, np.float64)
    return np.cumsum(flags) / np.arange(1, len(flags) + 1)


def online_accuracy(log) -> np.ndarray:
    """a_t for t = 1..T: fraction correct among the first t predictions.

    Accepts an :class:`OutcomeLog`, a list of outcomes, or raw correct flags.
    """
    flags = _flags(log)
    if flags.size == 0:
        raise EmptyLog("online accuracy of an empty log")
    return running_mean(flags)


@dataclass
class RetentionResult:
    ir_h: float
    h: int
    overall: float
    bucket_edges: np.ndarray
    bucket_accuracy: np.ndarray  # NaN where a bucket holds no test records
    bucket_counts: np.ndarray


def retention_from_flags(timestamps, correct, h: int, buckets: int = 20) -> RetentionResult:
    """Retention statistics from per-test-record correctness, in any order."""
    ts = np.asarray(timestamps, np.int64)
    flags = np.asarray(correct, bool)
    if ts.size == 0:
        raise EmptyTestSet("no test records")
    if not 1 <= h <= ts.size:
        raise ValueError(f"h must lie in [1, {ts.size}], got {h}")
    order = np.argsort(ts, kind="stable")
    ts, flags = ts[order], flags[order]
    lo, hi = int(ts[0]), int(ts[-1])
    span = hi - lo
    if span == 0:
        which = np.zeros(ts.size, np.int64)
    else:
        # integer arithmetic keeps bucket membership exact
        which = np.minimum((ts - lo) * buckets // span, buckets - 1)
    counts = np.bincount(which, minlength=buckets)
    hits = np.bincount(which, weights=flags.astype(np.float64), minlength=buckets)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
    edges = lo + span * np.arange(buckets + 1) / buckets
    return RetentionResult(
        ir_h=float(flags[-h:].mean()),
        h=h,
        overall=float(flags.mean()),
        bucket_edges=edges,
        bucket_accuracy=acc,
        bucket_counts=counts,
    )


def information_retention(model, test: Sequence[StreamRecord], h: int | None = None,
                          buckets: int = 20) -> RetentionResult:
    """Evaluate a frozen model on preprocessed test records.

    ``model`` needs only a ``classify(feature)`` method; nothing is learned.
    ``h`` defaults to the full test set.
    """
    if not test:
        raise EmptyTestSet("no test records")
    h = len(test) if h is None else h
    ts = [r.timestamp for r in test]
    correct = [model.classify(r.feature) == r.label for r in test]
    return retention_from_flags(ts, correct, h, buckets)


def near_future_accuracy(log: OutcomeLog, delay: int) -> np.ndarray:
    """Running mean of delayed correctness: model after step t on record t + delay.

    The result has ``len(log) - delay`` entries; later steps have no target.
    """
    if delay < 1:
        raise ValueError("delay must be >= 1")
    if delay >= len(log):
        raise DelayTooLarge(f"delay {delay} leaves no targets in a log of {len(log)}")
    if log.delay != delay:
        raise ValueError(f"log holds delayed evaluations for delay {log.delay}, not {delay}")
    if len(log.delayed) != len(log) - delay:
        raise ValueError("delayed evaluations are incomplete")
    return running_mean(log.delayed)
