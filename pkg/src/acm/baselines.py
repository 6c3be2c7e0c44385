"""Streaming classifiers over fixed features, used as comparison methods.

All of them break argmax ties toward the lowest class id.
"""

from __future__ import annotations

import enum

import numpy as np

from acm.core import ABSTAIN, OnlineClassifier
from acm.errors import DimMismatch, InvalidConfig


def _argmax_lowest_class(scores: np.ndarray, classes: np.ndarray) -> int:
    best = scores.max()
    return int(classes[scores == best].min())


class _ClassTable:
    """Maps arbitrary class ids to dense rows, keeping rows in arrival order."""

    def __init__(self):
        self.row_of: dict[int, int] = {}
        self.ids: list[int] = []

    def __len__(self):
        return len(self.ids)

    def row(self, y: int) -> tuple[int, bool]:
        r = self.row_of.get(y)
        if r is not None:
            return r, False
        r = len(self.ids)
        self.row_of[y] = r
        self.ids.append(y)
        return r, True

    def array(self) -> np.ndarray:
        return np.asarray(self.ids, dtype=np.int64)


class NearestClassMean(OnlineClassifier):
    """Running per-class mean; predicts the class with the most cosine-similar mean."""

    def __init__(self, dim: int):
        self.dim = dim
        self.classes = _ClassTable()
        self.sums = np.zeros((0, dim), np.float64)
        self.counts = np.zeros(0, np.int64)
        self._unit_means: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def means(self) -> np.ndarray:
        return self.sums / self.counts[:, None]

    def learn(self, z, y: int) -> "NearestClassMean":
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        r, new = self.classes.row(int(y))
        if new:
            self.sums = np.vstack([self.sums, np.zeros(self.dim)])
            self.counts = np.append(self.counts, 0)
        self.sums[r] += z
        self.counts[r] += 1
        self._unit_means = None
        return self

    def classify(self, z) -> int:
        if not len(self.classes):
            return ABSTAIN
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        if self._unit_means is None:
            norms = np.linalg.norm(self.sums, axis=1, keepdims=True)
            # the direction of a sum equals that of the mean
            self._unit_means = np.divide(self.sums, norms, out=np.zeros_like(self.sums),
                                         where=norms > 0)
        return _argmax_lowest_class(self._unit_means @ z, self.classes.array())


def ncm_update(state: NearestClassMean, z, y: int) -> NearestClassMean:
    return state.learn(z, y)


def ncm_predict(state: NearestClassMean, z) -> int:
    return state.classify(z)


class StreamingLDA(OnlineClassifier):
    """Class means plus one shared streaming covariance, shrunk toward identity.

    ``covariance="within"`` pools each sample's deviation from its own class
    mean (the usual LDA covariance); ``"total"`` uses deviation from the
    running global mean.  Both are exact single-pass updates.
    """

    def __init__(self, dim: int, shrinkage: float = 1e-4, refresh_interval: int = 100,
                 covariance: str = "within"):
        if not 0.0 <= shrinkage <= 1.0:
            raise InvalidConfig("shrinkage must lie in [0, 1]")
        if covariance not in ("within", "total"):
            raise InvalidConfig(f"unknown covariance mode {covariance!r}")
        self.dim = dim
        self.shrinkage = shrinkage
        self.refresh_interval = refresh_interval
        self.covariance_mode = covariance
        self.classes = _ClassTable()
        self.means = np.zeros((0, dim), np.float64)
        self.counts = np.zeros(0, np.int64)
        self.n = 0
        self.scatter = np.zeros((dim, dim), np.float64)
        self.global_mean = np.zeros(dim, np.float64)
        self.precision: np.ndarray | None = None
        self.stale = 0
        self._w: np.ndarray | None = None
        self._b: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def covariance(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros((self.dim, self.dim))
        return self.scatter / self.n

    def learn(self, z, y: int) -> "StreamingLDA":
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        r, new = self.classes.row(int(y))
        if new:
            self.means = np.vstack([self.means, np.zeros(self.dim)])
            self.counts = np.append(self.counts, 0)
        if self.covariance_mode == "within":
            nc = self.counts[r]
            delta = z - self.means[r]
            self.scatter += (nc / (nc + 1.0)) * np.outer(delta, delta)
        else:
            delta = z - self.global_mean
            self.scatter += (self.n / (self.n + 1.0)) * np.outer(delta, delta)
        self.n += 1
        self.global_mean += (z - self.global_mean) / self.n
        self.counts[r] += 1
        self.means[r] += (z - self.means[r]) / self.counts[r]
        self.stale += 1
        self._w = None
        return self

    def refresh(self) -> "StreamingLDA":
        lam = self.shrinkage
        shrunk = (1.0 - lam) * self.covariance + lam * np.eye(self.dim)
        self.precision = np.linalg.inv(shrunk)
        self.stale = 0
        self._w = None
        return self

    def scores(self, z) -> np.ndarray:
        if self.precision is None or self.stale >= self.refresh_interval:
            self.refresh()
        if self._w is None:
            self._w = self.means @ self.precision
            self._b = -0.5 * np.einsum("ij,ij->i", self.means, self._w)
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        return self._w @ z + self._b

    def classify(self, z) -> int:
        if not len(self.classes):
            return ABSTAIN
        return _argmax_lowest_class(self.scores(z), self.classes.array())


def slda_update(state: StreamingLDA, z, y: int) -> StreamingLDA:
    return state.learn(z, y)


def slda_predict(state: StreamingLDA, z) -> int:
    return state.classify(z)


def slda_refresh(state: StreamingLDA) -> StreamingLDA:
    return state.refresh()


class Loss(enum.Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"


class LinearSGD(OnlineClassifier):
    """One-sample SGD on a multiclass linear model with a growing class set."""

    def __init__(self, dim: int, loss: Loss | str = Loss.LOGISTIC, learning_rate: float = 1e-2):
        self.dim = dim
        self.loss = Loss(loss)
        self.learning_rate = learning_rate
        self.classes = _ClassTable()
        self.weights = np.zeros((0, dim), np.float64)
        self.bias = np.zeros(0, np.float64)

    @property
    def size(self) -> int:
        return len(self.classes)

    def scores(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimMismatch(f"expected dim {self.dim}, got shape {z.shape}")
        return self.weights @ z + self.bias

    def classify(self, z) -> int:
        if not len(self.classes):
            return ABSTAIN
        return _argmax_lowest_class(self.scores(z), self.classes.array())

    def learn(self, z, y: int) -> "LinearSGD":
        z = np.asarray(z, dtype=np.float64)
        r, new = self.classes.row(int(y))
        if new:
            self.weights = np.vstack([self.weights, np.zeros(self.dim)])
            self.bias = np.append(self.bias, 0.0)
        s = self.scores(z)
        eta = self.learning_rate
        if self.loss is Loss.LOGISTIC:
            p = np.exp(s - s.max())
            p /= p.sum()
            p[r] -= 1.0
            self.weights -= eta * np.outer(p, z)
            self.bias -= eta * p
        else:
            target = -np.ones(len(s))
            target[r] = 1.0
            violated = target * s < 1.0
            self.weights[violated] += eta * np.outer(target[violated], z)
            self.bias[violated] += eta * target[violated]
        return self


def sgd_update(state: LinearSGD, z, y: int) -> LinearSGD:
    return state.learn(z, y)


def sgd_predict(state: LinearSGD, z) -> int:
    return state.classify(z)
