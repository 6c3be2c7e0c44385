"""Hierarchical navigable small-world graph index."""

from __future__ import annotations

import enum
import math
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from acm.ann import _kernels as K
from acm.ann.brute import BruteForceIndex
from acm.core import FEATURE_DTYPE, NeighborHit
from acm.errors import BadMagic, DimMismatch, EmptyIndex, InvalidConfig, TruncatedFile

SNAPSHOT_MAGIC = b"ACMIDX1\0"


class SelectStrategy(enum.Enum):
    SIMPLE = "simple"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class HnswParams:
    m: int = 100
    m0: int | None = None
    ef_construction: int = 500
    ef_search: int = 500
    level_multiplier: float | None = None
    rng_seed: int = 0
    strategy: SelectStrategy = SelectStrategy.HEURISTIC

    def __post_init__(self):
        if self.m < 2:
            raise InvalidConfig("m must be >= 2")
        if self.m0 is None:
            object.__setattr__(self, "m0", 2 * self.m)
        if self.level_multiplier is None:
            object.__setattr__(self, "level_multiplier", 1.0 / math.log(self.m))
        if self.m0 < self.m:
            raise InvalidConfig("m0 must be >= m")
        if self.ef_construction < self.m:
            raise InvalidConfig("ef_construction must be >= m")
        if self.ef_search < 1:
            raise InvalidConfig("ef_search must be >= 1")
        if self.level_multiplier < 0:
            raise InvalidConfig("level_multiplier must be >= 0")
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", SelectStrategy(self.strategy))


def level_from_uniform(u: float, level_multiplier: float) -> int:
    """Map U in (0, 1] to floor(-ln(U) * mL)."""
    if level_multiplier == 0.0:
        return 0
    return int(math.floor(-math.log(u) * level_multiplier))


def assign_level(rng: np.random.Generator, level_multiplier: float) -> int:
    # 1 - random() lies in (0, 1], so the log is always finite
    return level_from_uniform(1.0 - rng.random(), level_multiplier)


def select_neighbors(base, candidates, m: int,
                     strategy: SelectStrategy = SelectStrategy.HEURISTIC) -> list[int]:
    """Prune ``candidates`` (rows of vectors, sorted by distance to ``base``).

    Returns positions into ``candidates`` of the kept entries.
    """
    cand = np.ascontiguousarray(candidates, dtype=FEATURE_DTYPE)
    base = np.ascontiguousarray(base, dtype=FEATURE_DTYPE)
    n = cand.shape[0]
    if strategy is SelectStrategy.SIMPLE or n == 0:
        return list(range(min(m, n)))
    dists = np.empty(n, np.float32)
    K.all_dists(cand, n, base, dists)
    out = np.empty(max(m, 1), np.int64)
    kept = K.select_heuristic(cand, base, dists, np.arange(n, dtype=np.int64), m, out)
    return out[:kept].tolist()


class HnswIndex:
    """Append-only approximate nearest-neighbour index over unit vectors.

    Single writer, many readers: ``search`` may run concurrently from several
    threads, ``insert`` must not overlap with anything.
    """

    def __init__(self, dim: int, params: HnswParams | None = None, capacity: int = 1024):
        if dim < 1:
            raise InvalidConfig("dim must be positive")
        self.dim = dim
        self.params = params or HnswParams()
        self.count = 0
        self.entry_point = -1
        self.max_level = -1
        self._rng = np.random.default_rng(self.params.rng_seed)
        capacity = max(capacity, 16)
        self._data = np.zeros((capacity, dim), FEATURE_DTYPE)
        self._labels = np.zeros(capacity, np.int64)
        self._levels = np.zeros(capacity, np.int32)
        self._links0 = np.zeros((capacity, self.params.m0 + 1), np.int32)
        self._upper_row = np.full(capacity, -1, np.int64)
        self._upper = np.zeros((max(capacity // self.params.m, 16), self.params.m + 1), np.int32)
        self._upper_used = 0
        self._visited = np.zeros(capacity, np.int32)
        self._vstate = np.zeros(1, np.int64)
        self._local = threading.local()

    def __len__(self) -> int:
        return self.count

    @property
    def labels(self) -> np.ndarray:
        return self._labels[:self.count]

    @property
    def vectors(self) -> np.ndarray:
        return self._data[:self.count]

    def level_of(self, node: int) -> int:
        return int(self._levels[node])

    def neighbors(self, node: int, layer: int) -> np.ndarray:
        if not 0 <= node < self.count or not 0 <= layer <= self._levels[node]:
            raise IndexError(f"node {node} has no layer {layer}")
        return K._neighbors(self._links0, self._upper_row, self._upper, node, layer).copy()

    def _grow(self, need_rows: int):
        cap = self._data.shape[0]
        if self.count >= cap:
            new = cap * 2
            self._data = _resize(self._data, new)
            self._labels = _resize(self._labels, new)
            self._levels = _resize(self._levels, new)
            self._links0 = _resize(self._links0, new)
            self._upper_row = _resize(self._upper_row, new, fill=-1)
            self._visited = np.zeros(new, np.int32)
            self._vstate[0] = 0
        if self._upper_used + need_rows > self._upper.shape[0]:
            new = max(self._upper.shape[0] * 2, self._upper_used + need_rows)
            self._upper = _resize(self._upper, new)

    def insert(self, feature, label: int) -> int:
        v = np.asarray(feature, dtype=FEATURE_DTYPE)
        if v.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {v.shape}")
        level = assign_level(self._rng, self.params.level_multiplier)
        self._grow(level)
        q = self.count
        self._data[q] = v
        self._labels[q] = label
        self._levels[q] = level
        self._links0[q, 0] = 0
        if level > 0:
            self._upper_row[q] = self._upper_used
            self._upper[self._upper_used:self._upper_used + level, 0] = 0
            self._upper_used += level
        p = self.params
        self.entry_point, self.max_level = K.insert_node(
            self._data, self._levels, self._links0, self._upper_row, self._upper,
            q, self.entry_point, self.max_level, p.m, p.m0, p.ef_construction,
            p.strategy is SelectStrategy.HEURISTIC, self._visited, self._vstate)
        self.count += 1
        return q

    def _visit_buffers(self):
        # each reader thread owns its visited-tag array
        if threading.current_thread() is threading.main_thread():
            return self._visited, self._vstate
        loc = self._local
        if getattr(loc, "visited", None) is None or loc.visited.shape[0] < self._visited.shape[0]:
            loc.visited = np.zeros(self._visited.shape[0], np.int32)
            loc.vstate = np.zeros(1, np.int64)
        return loc.visited, loc.vstate

    def search_ids(self, query, k: int, ef: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`search` but returns raw (ids, distances) arrays."""
        if self.count == 0:
            raise EmptyIndex("search on an empty index")
        if k < 1:
            raise ValueError("k must be positive")
        q = np.asarray(query, dtype=FEATURE_DTYPE)
        if q.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {q.shape}")
        ef = self.params.ef_search if ef is None else ef
        visited, vstate = self._visit_buffers()
        dists, ids = K.knn_query(self._data, self._links0, self._upper_row, self._upper,
                                 self.entry_point, self.max_level, q, k, max(ef, k),
                                 visited, vstate)
        if len(ids) < min(k, self.count):
            # only heavily duplicated data can strand nodes; finish with an exact scan
            return BruteForceIndex.from_arrays(self.vectors, self.labels).search_ids(q, k)
        return ids, dists

    def search(self, query, k: int, ef: int | None = None) -> list[NeighborHit]:
        ids, dists = self.search_ids(query, k, ef)
        labels = self._labels
        return [NeighborHit(int(i), int(labels[i]), float(d)) for i, d in zip(ids, dists)]

    def check_invariants(self) -> None:
        """Walk the whole graph and raise AssertionError on any structural defect."""
        n = self.count
        if n == 0:
            assert self.entry_point == -1
            return
        levels = self._levels[:n]
        assert 0 <= self.entry_point < n
        assert levels[self.entry_point] == self.max_level == levels.max()
        for node in range(n):
            for layer in range(int(levels[node]) + 1):
                nbrs = K._neighbors(self._links0, self._upper_row, self._upper, node, layer)
                bound = self.params.m0 if layer == 0 else self.params.m
                assert len(nbrs) <= bound, (node, layer, len(nbrs))
                assert len(set(nbrs.tolist())) == len(nbrs), (node, layer, "duplicate link")
                for e in nbrs:
                    assert 0 <= e < n and e != node, (node, layer, e)
                    assert levels[e] >= layer, (node, layer, e, "link to missing layer")
            if levels[node] > 0:
                assert self._upper_row[node] >= 0

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "HnswIndex":
        return cls.from_bytes(Path(path).read_bytes())

    def to_bytes(self) -> bytes:
        p = self.params
        n = self.count
        parts = [SNAPSHOT_MAGIC,
                 struct.pack("<IIIIdqB", p.m, p.m0, p.ef_construction, p.ef_search,
                             p.level_multiplier, p.rng_seed,
                             0 if p.strategy is SelectStrategy.HEURISTIC else 1),
                 struct.pack("<QIqi", n, self.dim, self.entry_point, self.max_level)]
        rec = np.zeros(n, dtype=[("level", "<u4"), ("label", "<i8"),
                                 ("feature", "<f4", (self.dim,))])
        rec["level"] = self._levels[:n]
        rec["label"] = self._labels[:n]
        rec["feature"] = self._data[:n]
        parts.append(rec.tobytes())
        for node in range(n):
            for layer in range(int(self._levels[node]) + 1):
                nbrs = K._neighbors(self._links0, self._upper_row, self._upper, node, layer)
                parts.append(struct.pack("<I", len(nbrs)))
                parts.append(nbrs.astype("<u4").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "HnswIndex":
        if buf[:8] != SNAPSHOT_MAGIC:
            raise BadMagic("not an index snapshot")
        off = 8
        head = struct.Struct("<IIIIdqB")
        meta = struct.Struct("<QIqi")
        if len(buf) < off + head.size + meta.size:
            raise TruncatedFile("snapshot header truncated")
        m, m0, efc, efs, ml, seed, strat = head.unpack_from(buf, off)
        off += head.size
        n, dim, entry, max_level = meta.unpack_from(buf, off)
        off += meta.size
        params = HnswParams(m=m, m0=m0, ef_construction=efc, ef_search=efs,
                            level_multiplier=ml, rng_seed=seed,
                            strategy=SelectStrategy.HEURISTIC if strat == 0 else SelectStrategy.SIMPLE)
        idx = cls(dim, params, capacity=max(n, 16))
        dt = np.dtype([("level", "<u4"), ("label", "<i8"), ("feature", "<f4", (dim,))])
        if len(buf) < off + n * dt.itemsize:
            raise TruncatedFile("snapshot node records truncated")
        rec = np.frombuffer(buf, dtype=dt, count=n, offset=off)
        off += n * dt.itemsize
        idx._data[:n] = rec["feature"]
        idx._labels[:n] = rec["label"]
        idx._levels[:n] = rec["level"]
        total_upper = int(rec["level"].astype(np.int64).sum())
        idx._grow(total_upper)
        for node in range(n):
            lv = int(rec["level"][node])
            if lv > 0:
                idx._upper_row[node] = idx._upper_used
                idx._upper_used += lv
            for layer in range(lv + 1):
                if len(buf) < off + 4:
                    raise TruncatedFile("snapshot adjacency truncated")
                (cnt,) = struct.unpack_from("<I", buf, off)
                off += 4
                if len(buf) < off + 4 * cnt:
                    raise TruncatedFile("snapshot adjacency truncated")
                ids = np.frombuffer(buf, dtype="<u4", count=cnt, offset=off).astype(np.int64)
                off += 4 * cnt
                K._set_neighbors(idx._links0, idx._upper_row, idx._upper, node, layer, ids, cnt)
        if off != len(buf):
            raise TruncatedFile("trailing bytes after snapshot")
        idx.count = n
        idx.entry_point = entry
        idx.max_level = max_level
        # replay the level draws so later inserts continue the same sequence
        if n:
            idx._rng.random(n)
        return idx


def _resize(arr: np.ndarray, rows: int, fill=0) -> np.ndarray:
    out = np.full((rows,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[:arr.shape[0]] = arr
    return out
