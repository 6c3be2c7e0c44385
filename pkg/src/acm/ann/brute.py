"""Exact linear-scan index, used as a baseline method and as the HNSW oracle."""

from __future__ import annotations

import numpy as np

from acm.ann import _kernels as K
from acm.core import FEATURE_DTYPE, NeighborHit
from acm.errors import DimMismatch, EmptyIndex


class BruteForceIndex:
    def __init__(self, dim: int, capacity: int = 1024):
        self.dim = dim
        self.count = 0
        self._data = np.zeros((max(capacity, 16), dim), FEATURE_DTYPE)
        self._labels = np.zeros(max(capacity, 16), np.int64)

    @classmethod
    def from_arrays(cls, vectors: np.ndarray, labels: np.ndarray) -> "BruteForceIndex":
        """Wrap existing arrays without copying; the index is then read-only."""
        idx = cls.__new__(cls)
        idx.dim = vectors.shape[1]
        idx.count = vectors.shape[0]
        idx._data = np.ascontiguousarray(vectors, dtype=FEATURE_DTYPE)
        idx._labels = np.asarray(labels, dtype=np.int64)
        return idx

    def __len__(self) -> int:
        return self.count

    @property
    def vectors(self) -> np.ndarray:
        return self._data[:self.count]

    @property
    def labels(self) -> np.ndarray:
        return self._labels[:self.count]

    def insert(self, feature, label: int) -> int:
        v = np.asarray(feature, dtype=FEATURE_DTYPE)
        if v.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {v.shape}")
        if self.count == self._data.shape[0]:
            grow = self._data.shape[0]
            self._data = np.concatenate([self._data, np.zeros_like(self._data[:grow])])
            self._labels = np.concatenate([self._labels, np.zeros_like(self._labels[:grow])])
        self._data[self.count] = v
        self._labels[self.count] = label
        self.count += 1
        return self.count - 1

    def add_batch(self, features, labels) -> None:
        for f, y in zip(features, labels):
            self.insert(f, int(y))

    def distances(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=FEATURE_DTYPE)
        if q.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {q.shape}")
        out = np.empty(self.count, np.float32)
        K.all_dists(self._data, self.count, q, out)
        return out

    def search_ids(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        if self.count == 0:
            raise EmptyIndex("search on an empty index")
        d = self.distances(query)
        k = min(k, self.count)
        if k < self.count:
            # everything at or below the k-th smallest distance, so ties survive
            kth = np.partition(d, k - 1)[k - 1]
            pool = np.flatnonzero(d <= kth)
        else:
            pool = np.arange(self.count)
        order = np.lexsort((pool, d[pool]))[:k]
        ids = pool[order]
        return ids, d[ids]

    def search(self, query, k: int) -> list[NeighborHit]:
        ids, dists = self.search_ids(query, k)
        return [NeighborHit(int(i), int(self._labels[i]), float(x)) for i, x in zip(ids, dists)]


def brute_search(index: BruteForceIndex, query, k: int) -> list[NeighborHit]:
    return index.search(query, k)
