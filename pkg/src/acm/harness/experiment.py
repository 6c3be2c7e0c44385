"""End-to-end online runs: pretrain, predict-then-learn stream, frozen test sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from acm.baselines import LinearSGD, Loss, NearestClassMean, StreamingLDA
from acm.core import OnlineClassifier, StreamRecord, null_clock
from acm.harness.config import ExperimentConfig, Method
from acm.learner import AcmConfig, AcmLearner
from acm.metrics import (
    OutcomeLog,
    RetentionResult,
    information_retention,
    near_future_accuracy,
    online_accuracy,
)
from acm.preprocess import Preprocessor, ProjectionWeights
from acm.stream import chronological_split, generate_drift_stream, load_feature_file

log = logging.getLogger(__name__)


def build_method(method: Method, dim: int, params: dict, seed: int = 0) -> OnlineClassifier:
    params = dict(params)
    if method in (Method.ACM, Method.BRUTE_KNN):
        hnsw = dict(params.pop("hnsw", {}) or {})
        hnsw.setdefault("rng_seed", seed)
        if method is Method.BRUTE_KNN:
            params["memory"] = "brute"
        return AcmLearner(dim, AcmConfig(hnsw=hnsw, **params))
    if method is Method.NCM:
        return NearestClassMean(dim, **params)
    if method is Method.SLDA:
        return StreamingLDA(dim, **params)
    if method is Method.SGD_LOGISTIC:
        return LinearSGD(dim, Loss.LOGISTIC, **params)
    if method is Method.SGD_HINGE:
        return LinearSGD(dim, Loss.HINGE, **params)
    raise ValueError(f"unknown method {method}")


def _percentile(values: np.ndarray, q: float) -> float | None:
    return float(np.percentile(values, q)) if values.size else None


def summarize_rows(rows: OutcomeLog | list) -> dict:
    """Summary fields that are recomputable from the step rows alone."""
    outcomes = list(rows)
    n = len(outcomes)
    pred = np.array([o.predict_latency for o in outcomes], np.int64)
    learn = np.array([o.learn_latency for o in outcomes], np.int64)
    correct = sum(1 for o in outcomes if o.correct)
    return {
        "steps": n,
        "correct": correct,
        "online_accuracy": correct / n if n else None,
        "predict_ns_median": _percentile(pred, 50),
        "predict_ns_p99": _percentile(pred, 99),
        "learn_ns_median": _percentile(learn, 50),
        "learn_ns_p99": _percentile(learn, 99),
        "final_k": outcomes[-1].current_k if n else None,
    }


@dataclass
class RunReport:
    config: ExperimentConfig
    log: OutcomeLog
    retention: RetentionResult | None
    memory_count: int
    split_sizes: dict[str, int]
    wall_seconds: float
    interrupted: bool = False

    @property
    def summary(self) -> dict:
        s = summarize_rows(self.log)
        s["method"] = self.config.method.value
        s["peak_memory_count"] = self.memory_count
        s["split_sizes"] = dict(self.split_sizes)
        s["interrupted"] = self.interrupted
        delay = self.config.metrics.delay
        s["delay"] = delay
        s["near_future_accuracy"] = None
        if delay is not None and len(self.log) > delay and not self.interrupted:
            s["near_future_accuracy"] = float(near_future_accuracy(self.log, delay)[-1])
        r = self.retention
        s["ir_h"] = r.ir_h if r else None
        s["h"] = r.h if r else None
        s["test_accuracy"] = r.overall if r else None
        s["ir_buckets"] = ([None if np.isnan(a) else float(a) for a in r.bucket_accuracy]
                           if r else None)
        s["ir_bucket_counts"] = [int(c) for c in r.bucket_counts] if r else None
        s["wall_seconds"] = self.wall_seconds
        return s

    def accuracy_curve(self) -> np.ndarray:
        if not len(self.log):
            return np.zeros(0)
        return online_accuracy(self.log)


def load_records(config: ExperimentConfig) -> list[StreamRecord]:
    if config.feature_file is not None:
        return load_feature_file(config.feature_file)
    return generate_drift_stream(config.drift)


def make_preprocessor(config: ExperimentConfig, in_dim: int) -> Preprocessor:
    pc = config.preprocess
    projection = None
    if pc.projection_path:
        projection = ProjectionWeights.load(pc.projection_path)
    elif pc.target_dim:
        projection = ProjectionWeights.random(in_dim, pc.target_dim, seed=config.seed)
    return Preprocessor(in_dim, projection, use_scaler=pc.scaler)


def run_experiment(config: ExperimentConfig, records: list[StreamRecord] | None = None) -> RunReport:
    """Run one method over one stream.

    Pretrain records fit the scaler and warm-start the method without being
    logged.  Online records are then handled one at a time, prediction
    strictly before the label is revealed.  Finally the frozen model is
    scored on the test split.  Ctrl-C during the online phase stops the run
    and returns what was logged so far.
    """
    started = time.perf_counter()
    records = load_records(config) if records is None else records
    pretrain, online, test = chronological_split(records, config.split)
    in_dim = len(records[0].feature)
    pre = make_preprocessor(config, in_dim)
    method = build_method(config.method, pre.out_dim, config.method_params, config.seed)
    clock = null_clock if config.timing == "none" else time.perf_counter_ns

    for r in pretrain:
        pre.observe(r.feature)
    for r in pretrain:
        method.learn(pre.transform(r.feature), r.label)

    delay = config.metrics.delay
    outcomes = OutcomeLog(delay=delay)
    interrupted = False
    try:
        for t, r in enumerate(online, start=1):
            pre.observe(r.feature)
            outcomes.append(method.step(r.with_feature(pre.transform(r.feature)), t, clock))
            if delay is not None and t - 1 + delay < len(online):
                target = online[t - 1 + delay]
                outcomes.delayed.append(method.classify(pre.transform(target.feature)) == target.label)
    except KeyboardInterrupt:
        interrupted = True
        log.warning("interrupted after %d online steps", len(outcomes))

    retention = None
    if test and not interrupted:
        frozen = [r.with_feature(pre.transform(r.feature)) for r in test]
        h = config.metrics.h if config.metrics.h is not None else len(frozen)
        retention = information_retention(method, frozen, min(h, len(frozen)),
                                          config.metrics.buckets)

    return RunReport(
        config=config,
        log=outcomes,
        retention=retention,
        memory_count=method.size,
        split_sizes={"pretrain": len(pretrain), "online": len(online), "test": len(test)},
        wall_seconds=time.perf_counter() - started,
        interrupted=interrupted,
    )
