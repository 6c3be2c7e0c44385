"""Adaptive continual memory: a kNN classifier over an append-only memory.

Each step retrieves the k nearest stored features, predicts by majority vote,
then stores the labelled feature.  Every ``recalib_interval`` steps the
neighbour count is re-chosen by replaying the most recent samples against
the memory with themselves left out.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from acm.ann import BruteForceIndex, HnswIndex, HnswParams
from acm.core import ABSTAIN, NeighborHit, OnlineClassifier
from acm.errors import BadMagic, DimMismatch, InsufficientMemory, InvalidConfig, TruncatedFile

LEARNER_MAGIC = b"ACMLRN1\0"
EXACT_MATCH_TOL = 1e-9


def candidate_ks(k_max: int) -> list[int]:
    ks = []
    k = 1
    while k <= k_max:
        ks.append(k)
        k *= 2
    return ks


@dataclass
class AcmConfig:
    k_initial: int = 16
    k_max: int = 512
    recalib_interval: int = 1000
    recalib_window: int = 1000
    recalibrate: bool = True
    leave_one_out: bool = True
    exact_match_shortcircuit: bool = False
    memory: str = "hnsw"  # or "brute" for exact search
    hnsw: HnswParams = field(default_factory=HnswParams)

    def __post_init__(self):
        if isinstance(self.hnsw, dict):
            self.hnsw = HnswParams(**self.hnsw)
        if not 1 <= self.k_initial <= self.k_max:
            raise InvalidConfig("need 1 <= k_initial <= k_max")
        if self.recalib_interval < 1 or self.recalib_window < 1:
            raise InvalidConfig("recalibration interval and window must be positive")
        if self.memory not in ("hnsw", "brute"):
            raise InvalidConfig(f"unknown memory backend {self.memory!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hnsw"]["strategy"] = self.hnsw.strategy.value
        return d


def majority_vote(labels) -> int:
    """Most frequent label; ties go to the label seen first (the nearest).

    ``labels`` must be ordered by ascending distance.
    """
    winners = prefix_winners(labels)
    return winners[-1] if winners else ABSTAIN


def prefix_winners(labels) -> list[int]:
    """Majority-vote winner for every prefix of ``labels``."""
    counts: dict[int, int] = {}
    first: dict[int, int] = {}
    best = ABSTAIN
    best_count = 0
    out = []
    for pos, lab in enumerate(labels):
        lab = int(lab)
        c = counts.get(lab, 0) + 1
        counts[lab] = c
        if c == 1:
            first[lab] = pos
        if c > best_count or (c == best_count and first[lab] < first[best]):
            best = lab
            best_count = c
        out.append(best)
    return out


class AcmLearner(OnlineClassifier):
    def __init__(self, dim: int, config: AcmConfig | None = None):
        self.dim = dim
        self.config = config or AcmConfig()
        if self.config.memory == "hnsw":
            self.memory = HnswIndex(dim, self.config.hnsw)
        else:
            self.memory = BruteForceIndex(dim)
        self._k = self.config.k_initial
        self.recent: deque[int] = deque(maxlen=self.config.recalib_window)
        self.steps_since_recalib = 0
        self.last_recalibration: dict[int, float] | None = None

    @property
    def k(self) -> int:
        """Neighbour count actually used, never above the memory size."""
        return max(1, min(self._k, self.memory.count))

    @property
    def current_k(self) -> int:
        return self.k

    @property
    def size(self) -> int:
        return self.memory.count

    def _check(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float32)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        return z

    def _vote(self, ids, dists) -> int:
        labels = self.memory.labels[ids]
        if self.config.exact_match_shortcircuit and dists[0] <= EXACT_MATCH_TOL:
            return int(labels[0])
        return majority_vote(labels)

    def predict(self, z) -> tuple[int, list[NeighborHit]]:
        z = self._check(z)
        if self.memory.count == 0:
            return ABSTAIN, []
        ids, dists = self.memory.search_ids(z, self.k)
        labels = self.memory.labels
        hits = [NeighborHit(int(i), int(labels[i]), float(d)) for i, d in zip(ids, dists)]
        return self._vote(ids, dists), hits

    def classify(self, z) -> int:
        z = self._check(z)
        if self.memory.count == 0:
            return ABSTAIN
        ids, dists = self.memory.search_ids(z, self.k)
        return self._vote(ids, dists)

    def learn(self, z, y: int) -> "AcmLearner":
        z = self._check(z)
        entry = self.memory.insert(z, int(y))
        self.recent.append(entry)
        self.steps_since_recalib += 1
        cfg = self.config
        if (cfg.recalibrate and self.steps_since_recalib >= cfg.recalib_interval
                and self.memory.count > cfg.k_max):
            self.recalibrate_k()
        return self

    def simulated_accuracy(self) -> dict[int, float]:
        """Replay the recent window against memory; accuracy for each candidate k."""
        cfg = self.config
        if not self.recent:
            raise InsufficientMemory("no recent samples to replay")
        ks = candidate_ks(cfg.k_max)
        fetch = cfg.k_max + 1 if cfg.leave_one_out else cfg.k_max
        fetch = min(fetch, self.memory.count)
        correct = np.zeros(len(ks), np.int64)
        vectors, labels = self.memory.vectors, self.memory.labels
        for entry in self.recent:
            ids, _ = self.memory.search_ids(vectors[entry], fetch)
            if cfg.leave_one_out:
                own = np.flatnonzero(ids == entry)
                ids = np.delete(ids, own[0]) if own.size else ids[:cfg.k_max]
            winners = prefix_winners(labels[ids])
            truth = labels[entry]
            for j, k in enumerate(ks):
                if winners[min(k, len(winners)) - 1] == truth:
                    correct[j] += 1
        return {k: c / len(self.recent) for k, c in zip(ks, correct)}

    def recalibrate_k(self) -> int:
        if self.memory.count <= self.config.k_max:
            raise InsufficientMemory(
                f"need more than {self.config.k_max} stored samples, have {self.memory.count}")
        acc = self.simulated_accuracy()
        # strict > keeps the smallest k among ties; keys are ascending
        best_k, best_acc = None, -1.0
        for k, a in acc.items():
            if a > best_acc:
                best_k, best_acc = k, a
        self._k = best_k
        self.steps_since_recalib = 0
        self.last_recalibration = acc
        return best_k

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        if not isinstance(self.memory, HnswIndex):
            raise InvalidConfig("only HNSW-backed learners can be saved")
        meta = json.dumps({
            "dim": self.dim,
            "config": self.config.to_dict(),
            "k": self._k,
            "steps_since_recalib": self.steps_since_recalib,
            "recent": list(self.recent),
        }, sort_keys=True).encode()
        Path(path).write_bytes(LEARNER_MAGIC + struct.pack("<Q", len(meta)) + meta
                               + self.memory.to_bytes())

    @classmethod
    def load(cls, path) -> "AcmLearner":
        buf = Path(path).read_bytes()
        if buf[:8] != LEARNER_MAGIC:
            raise BadMagic("not a learner snapshot")
        if len(buf) < 16:
            raise TruncatedFile("learner header truncated")
        (n,) = struct.unpack_from("<Q", buf, 8)
        meta = json.loads(buf[16:16 + n])
        learner = cls(meta["dim"], AcmConfig(**meta["config"]))
        learner.memory = HnswIndex.from_bytes(buf[16 + n:])
        learner._k = meta["k"]
        learner.steps_since_recalib = meta["steps_since_recalib"]
        learner.recent.extend(meta["recent"])
        return learner
