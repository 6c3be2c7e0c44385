"""Search-latency scaling benchmark: HNSW against a linear scan."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from acm.ann import BruteForceIndex, HnswIndex, HnswParams

log = logging.getLogger(__name__)


@dataclass
class BenchRow:
    n: int
    dim: int
    trials: int
    hnsw_median_ns: float
    hnsw_p99_ns: float
    brute_median_ns: float | None
    brute_p99_ns: float | None
    recall_at_10: float | None
    build_seconds: float
    threads: int
    hnsw_qps: float


def random_unit_vectors(n: int, dim: int, rng: np.random.Generator, clusters: int = 0,
                        spread: float = 0.5, chunk: int = 100_000) -> np.ndarray:
    """``n`` random unit vectors, isotropic or drawn around ``clusters`` centres.

    Clustered draws add Gaussian noise of total scale ``spread`` to a random
    centre before normalising.
    """
    out = np.empty((n, dim), np.float32)
    centres = None
    if clusters:
        centres = rng.standard_normal((clusters, dim))
        centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        x = rng.standard_normal((hi - lo, dim))
        if centres is not None:
            x = centres[rng.integers(clusters, size=hi - lo)] + x * (spread / np.sqrt(dim))
        out[lo:hi] = x / np.linalg.norm(x, axis=1, keepdims=True)
    return out


def _timed(fn, queries) -> np.ndarray:
    ts = np.empty(len(queries), np.int64)
    for i, q in enumerate(queries):
        t0 = time.perf_counter_ns()
        fn(q)
        ts[i] = time.perf_counter_ns() - t0
    return ts


def bench_index(sizes, dim: int = 64, trials: int = 200, params: HnswParams | None = None,
                k: int = 10, ef: int | None = None, seed: int = 0, clusters: int = 0,
                spread: float = 0.5, brute: bool = True, brute_trials: int | None = None,
                threads: int = 1, warmup: int = 20) -> list[BenchRow]:
    """Grow one index through ascending ``sizes`` and time queries at each size.

    Queries come from the same distribution as the data.  At each size the
    median and 99th percentile of single-query latency are reported, for
    HNSW and (optionally) an exact scan of the same vectors.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    rng = np.random.default_rng(seed)
    data = random_unit_vectors(sizes[-1], dim, rng, clusters, spread)
    queries = random_unit_vectors(trials + warmup, dim, rng, clusters, spread)
    params = params or HnswParams(rng_seed=seed)
    index = HnswIndex(dim, params, capacity=sizes[-1])
    rows = []
    built = 0
    build_time = 0.0
    for n in sizes:
        t0 = time.perf_counter()
        for i in range(built, n):
            index.insert(data[i], i)
        build_time += time.perf_counter() - t0
        built = n
        search = lambda q: index.search_ids(q, k, ef)  # noqa: E731
        for q in queries[:warmup]:
            search(q)
        h = _timed(search, queries[warmup:])
        qps = _throughput(search, queries[warmup:], threads)
        row = BenchRow(n, dim, trials, float(np.median(h)), float(np.percentile(h, 99)),
                       None, None, None, build_time, threads, qps)
        if brute:
            flat = BruteForceIndex.from_arrays(index.vectors, index.labels)
            bq = queries[warmup:warmup + (brute_trials or trials)]
            flat.search_ids(queries[0], k)
            b = _timed(lambda q: flat.search_ids(q, k), bq)
            row.brute_median_ns = float(np.median(b))
            row.brute_p99_ns = float(np.percentile(b, 99))
            found = 0
            for q in bq:
                truth = set(flat.search_ids(q, k)[0].tolist())
                found += len(truth & set(index.search_ids(q, k, ef)[0].tolist()))
            row.recall_at_10 = found / (k * len(bq))
        log.info("n=%d hnsw median %.1fus brute median %s", n, row.hnsw_median_ns / 1e3,
                 row.brute_median_ns and f"{row.brute_median_ns / 1e3:.1f}us")
        rows.append(row)
    return rows


def _throughput(search, queries, threads: int) -> float:
    """Queries per second with ``threads`` concurrent readers on the frozen index."""
    t0 = time.perf_counter()
    if threads <= 1:
        for q in queries:
            search(q)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(search, queries))
    return len(queries) / (time.perf_counter() - t0)


def write_bench_table(rows: list[BenchRow], path) -> None:
    path = Path(path)
    dicts = [asdict(r) for r in rows]
    if path.suffix == ".json":
        path.write_text(json.dumps(dicts, indent=2) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(dicts[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(dicts)
