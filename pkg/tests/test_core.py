import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acm.core import ABSTAIN, OnlineClassifier, StreamRecord, cosine_distance, l2_normalize, null_clock
from acm.errors import DimMismatch, ZeroVector

finite_vecs = arrays(np.float64, st.integers(2, 16),
                     elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


class TestNormalize:
    def test_already_unit(self):
        np.testing.assert_allclose(l2_normalize([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-7)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            l2_normalize([0.0, 0.0])

    def test_returns_float32(self):
        assert l2_normalize([1.0, 2.0]).dtype == np.float32

    @given(finite_vecs)
    def test_unit_norm_and_idempotent(self, v):
        if np.linalg.norm(v) < 1e-6:
            return
        u = l2_normalize(v)
        assert abs(np.linalg.norm(u.astype(np.float64)) - 1.0) < 1e-6
        np.testing.assert_allclose(l2_normalize(u), u, atol=1e-6)
        # direction preserved
        assert np.dot(u, v) > 0


class TestCosineDistance:
    def test_identical(self):
        assert cosine_distance([0.6, 0.8], [0.6, 0.8]) == 0.0

    def test_orthogonal(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_antipodal(self):
        assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            cosine_distance([1.0, 0.0], [1.0, 0.0, 0.0])

    @given(finite_vecs, st.data())
    @settings(max_examples=50)
    def test_symmetric_and_matches_inner_product(self, v, data):
        w = data.draw(arrays(np.float64, v.shape[0],
                             elements=st.floats(-1e3, 1e3, allow_nan=False)))
        if np.linalg.norm(v) < 1e-6 or np.linalg.norm(w) < 1e-6:
            return
        u, x = l2_normalize(v), l2_normalize(w)
        d = cosine_distance(u, x)
        assert d == pytest.approx(cosine_distance(x, u), abs=1e-12)
        assert 0.0 <= d <= 2.0
        exact = 1.0 - np.dot(u.astype(np.float64), x.astype(np.float64))
        assert d == pytest.approx(exact, abs=1e-6)


class _Echo(OnlineClassifier):
    def __init__(self):
        self.seen = []

    def classify(self, z):
        return self.seen[-1] if self.seen else ABSTAIN

    def learn(self, z, y):
        self.seen.append(y)


def test_step_orders_predict_before_learn():
    c = _Echo()
    rec = StreamRecord(0, 0, 3, np.zeros(2, np.float32))
    first = c.step(rec, 1, clock=null_clock)
    assert first.predicted == ABSTAIN and not first.correct
    second = c.step(rec, 2, clock=null_clock)
    assert second.correct and second.predict_latency == 0 and second.learn_latency == 0
