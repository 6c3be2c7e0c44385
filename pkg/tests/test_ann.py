import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acm.ann import (
    BruteForceIndex,
    HnswIndex,
    HnswParams,
    SelectStrategy,
    assign_level,
    brute_search,
    level_from_uniform,
    select_neighbors,
)
from acm.errors import BadMagic, DimMismatch, EmptyIndex, InvalidConfig, TruncatedFile

from conftest import unit_rows

SMALL = HnswParams(m=8, ef_construction=32, ef_search=64, rng_seed=7)


def build(data, params=SMALL):
    idx = HnswIndex(data.shape[1], params)
    for i, v in enumerate(data):
        idx.insert(v, i % 5)
    return idx


def naive_knn(data, q, k):
    """O(n*k) selection: repeatedly take the smallest (distance, id) not yet taken."""
    d = 0.5 * ((data.astype(np.float64) - q) ** 2).sum(axis=1)
    taken = []
    for _ in range(min(k, len(data))):
        best = None
        for i in range(len(data)):
            if i in taken:
                continue
            if best is None or d[i] < d[best] or (d[i] == d[best] and i < best):
                best = i
        taken.append(best)
    return taken


class TestParams:
    def test_defaults(self):
        p = HnswParams()
        assert (p.m, p.m0, p.ef_construction, p.ef_search) == (100, 200, 500, 500)
        assert p.level_multiplier == pytest.approx(1 / math.log(100))

    @pytest.mark.parametrize("kw", [dict(m=1), dict(m=10, ef_construction=5), dict(ef_search=0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfig):
            HnswParams(**kw)


class TestAssignLevel:
    def test_boundary_uniform_gives_level_zero(self):
        assert level_from_uniform(1.0, 0.5) == 0

    def test_zero_multiplier(self):
        rng = np.random.default_rng(0)
        assert all(assign_level(rng, 0.0) == 0 for _ in range(1000))

    def test_monte_carlo_mean(self):
        # floor(Exp * mL) is geometric: E = 1 / (exp(1/mL) - 1)
        ml = 1 / math.log(2)
        rng = np.random.default_rng(1)
        draws = np.array([assign_level(rng, ml) for _ in range(100_000)])
        expected = 1 / (math.exp(1 / ml) - 1)
        assert draws.mean() == pytest.approx(expected, rel=0.05)

    def test_unfloored_draw_mean_is_multiplier(self):
        ml = 1 / math.log(100)
        rng = np.random.default_rng(2)
        raw = -np.log(1.0 - rng.random(100_000)) * ml
        assert raw.mean() == pytest.approx(ml, rel=0.05)

    def test_upper_layer_fraction(self):
        rng = np.random.default_rng(3)
        ml = 1 / math.log(16)
        draws = np.array([assign_level(rng, ml) for _ in range(100_000)])
        assert (draws >= 1).mean() == pytest.approx(1 / 16, rel=0.05)


class TestSelectNeighbors:
    @staticmethod
    def arc(angles, dim=4):
        v = np.zeros((len(angles), dim), np.float32)
        v[:, 0] = np.cos(angles)
        v[:, 1] = np.sin(angles)
        return v

    def test_simple_keeps_all_when_few(self):
        cand = self.arc([0.1, 0.2, 0.3])
        assert select_neighbors(self.arc([0.0])[0], cand, 5, SelectStrategy.SIMPLE) == [0, 1, 2]

    def test_simple_truncates(self):
        cand = self.arc([0.1, 0.2, 0.3])
        assert select_neighbors(self.arc([0.0])[0], cand, 2, SelectStrategy.SIMPLE) == [0, 1]

    def test_heuristic_drops_occluded_point(self):
        base = self.arc([0.0])[0]
        cand = self.arc([0.3, 0.6])  # the middle point shadows the far one
        assert select_neighbors(base, cand, 5) == [0]

    def test_heuristic_keeps_points_in_different_directions(self):
        base = self.arc([0.0])[0]
        cand = self.arc([0.3, -0.31])
        assert select_neighbors(base, cand, 5) == [0, 1]

    @given(st.integers(0, 10_000), st.integers(1, 30), st.integers(1, 12))
    @settings(max_examples=40, deadline=None)
    def test_heuristic_subset_of_candidates(self, seed, n, m):
        rng = np.random.default_rng(seed)
        base = unit_rows(rng, 1, 8)[0]
        cand = unit_rows(rng, n, 8)
        d = 0.5 * ((cand - base) ** 2).sum(axis=1)
        cand = cand[np.argsort(d, kind="stable")]
        kept = select_neighbors(base, cand, m)
        assert len(kept) <= m
        assert kept == sorted(set(kept))
        assert all(0 <= i < n for i in kept)
        assert kept[0] == 0  # the closest candidate is never occluded


class TestInsertSearch:
    def test_first_insert_is_entry_point(self, rng):
        idx = HnswIndex(8, SMALL)
        assert idx.insert(unit_rows(rng, 1, 8)[0], 3) == 0
        assert idx.entry_point == 0 and idx.count == 1

    def test_single_element_returned_for_any_query(self, rng):
        idx = HnswIndex(8, SMALL)
        idx.insert(unit_rows(rng, 1, 8)[0], 3)
        hits = idx.search(unit_rows(rng, 1, 8)[0], k=5)
        assert len(hits) == 1 and hits[0].entry_id == 0 and hits[0].label == 3

    def test_self_retrieval_distance_zero(self, rng):
        data = unit_rows(rng, 500, 16)
        idx = build(data)
        hit = idx.search(data[123], k=1)[0]
        assert hit.entry_id == 123 and hit.distance == 0.0

    def test_empty_index(self):
        with pytest.raises(EmptyIndex):
            HnswIndex(4, SMALL).search(np.ones(4, np.float32) / 2, 1)

    def test_dim_mismatch(self, rng):
        idx = HnswIndex(8, SMALL)
        with pytest.raises(DimMismatch):
            idx.insert(np.ones(4, np.float32), 0)
        idx.insert(unit_rows(rng, 1, 8)[0], 0)
        with pytest.raises(DimMismatch):
            idx.search(np.ones(4, np.float32), 1)

    def test_result_contract(self, rng):
        data = unit_rows(rng, 800, 16)
        idx = build(data)
        for q in unit_rows(rng, 30, 16):
            hits = idx.search(q, 20)
            assert len(hits) == 20
            d = [h.distance for h in hits]
            assert d == sorted(d)
            assert len({h.entry_id for h in hits}) == 20
            assert all(0 <= h.entry_id < 800 for h in hits)
        assert len(idx.search(data[0], 5000, ef=5000)) == 800

    def test_invariants_hold_while_growing(self, rng):
        data = unit_rows(rng, 3000, 12)
        idx = HnswIndex(12, SMALL)
        for i, v in enumerate(data):
            idx.insert(v, 0)
            if i in (0, 1, 10, 100, 999, 2999):
                idx.check_invariants()

    def test_duplicates_are_distinct_nodes(self, rng):
        v = unit_rows(rng, 1, 8)[0]
        idx = HnswIndex(8, SMALL)
        for y in range(20):
            idx.insert(v, y)
        hits = idx.search(v, 20)
        assert [h.entry_id for h in hits] == list(range(20))
        idx.check_invariants()

    def test_recall_against_brute_force(self, rng):
        data = unit_rows(rng, 3000, 16)
        idx = build(data, HnswParams(m=16, ef_construction=100, ef_search=100, rng_seed=1))
        flat = BruteForceIndex(16)
        flat.add_batch(data, range(3000))
        found = 0
        queries = unit_rows(rng, 100, 16)
        for q in queries:
            found += len(set(idx.search_ids(q, 10)[0]) & set(flat.search_ids(q, 10)[0]))
        assert found / 1000 >= 0.95

    def test_deterministic(self, rng):
        data = unit_rows(rng, 600, 8)
        a, b = build(data), build(data)
        assert a.to_bytes() == b.to_bytes()
        q = unit_rows(rng, 1, 8)[0]
        assert a.search(q, 10) == b.search(q, 10)

    def test_seed_changes_graph(self, rng):
        data = unit_rows(rng, 600, 8)
        a = build(data)
        b = build(data, HnswParams(m=8, ef_construction=32, ef_search=64, rng_seed=8))
        assert a.to_bytes() != b.to_bytes()

    def test_concurrent_readers_match_serial(self, rng):
        from concurrent.futures import ThreadPoolExecutor

        data = unit_rows(rng, 1000, 8)
        idx = build(data)
        queries = unit_rows(rng, 64, 8)
        serial = [idx.search_ids(q, 5)[0].tolist() for q in queries]
        with ThreadPoolExecutor(4) as pool:
            parallel = list(pool.map(lambda q: idx.search_ids(q, 5)[0].tolist(), queries))
        assert serial == parallel


class TestSnapshot:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        idx = build(unit_rows(rng, 700, 8))
        path = tmp_path / "x.idx"
        idx.save(path)
        loaded = HnswIndex.load(path)
        assert loaded.to_bytes() == path.read_bytes()
        loaded.check_invariants()
        q = unit_rows(rng, 1, 8)[0]
        assert loaded.search(q, 7) == idx.search(q, 7)

    def test_layout(self, rng):
        idx = build(unit_rows(rng, 10, 4))
        buf = idx.to_bytes()
        assert buf[:8] == b"ACMIDX1\0"

    def test_continued_inserts_match(self, rng):
        data = unit_rows(rng, 400, 8)
        a = build(data[:300])
        b = HnswIndex.from_bytes(a.to_bytes())
        for i, v in enumerate(data[300:], start=300):
            a.insert(v, i % 5)
            b.insert(v, i % 5)
        assert a.to_bytes() == b.to_bytes()

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            HnswIndex.from_bytes(b"NOTANIDX" + b"\0" * 64)

    def test_truncated(self, rng):
        buf = build(unit_rows(rng, 50, 4)).to_bytes()
        with pytest.raises(TruncatedFile):
            HnswIndex.from_bytes(buf[:-3])
        with pytest.raises(TruncatedFile):
            HnswIndex.from_bytes(buf + b"\0")

    def test_empty_index_round_trip(self):
        idx = HnswIndex(4, SMALL)
        assert HnswIndex.from_bytes(idx.to_bytes()).to_bytes() == idx.to_bytes()


class TestBruteForce:
    def test_nearer_point_first(self):
        flat = BruteForceIndex(2)
        flat.insert([1.0, 0.0], 0)
        flat.insert([0.0, 1.0], 1)
        hits = brute_search(flat, np.array([0.8, 0.6], np.float32), 2)
        assert [h.entry_id for h in hits] == [0, 1]

    def test_ties_to_lower_id(self):
        flat = BruteForceIndex(2)
        flat.insert([0.0, 1.0], 7)
        flat.insert([0.0, -1.0], 8)
        flat.insert([0.0, 1.0], 9)
        hits = brute_search(flat, np.array([1.0, 0.0], np.float32), 3)
        assert [h.entry_id for h in hits] == [0, 1, 2]
        hits = brute_search(flat, np.array([0.0, 1.0], np.float32), 2)
        assert [h.entry_id for h in hits] == [0, 2]

    def test_empty(self):
        with pytest.raises(EmptyIndex):
            BruteForceIndex(3).search(np.ones(3, np.float32), 1)

    def test_matches_naive_selection(self, rng):
        data = unit_rows(rng, 1000, 8)
        flat = BruteForceIndex(8)
        flat.add_batch(data, range(1000))
        for q in unit_rows(rng, 10, 8):
            ids = [h.entry_id for h in brute_search(flat, q, 10)]
            assert ids == naive_knn(data, q.astype(np.float64), 10)

    def test_duplicated_block_ties(self, rng):
        block = unit_rows(rng, 10, 4)
        data = np.concatenate([block, block, block])
        flat = BruteForceIndex(4)
        flat.add_batch(data, range(30))
        ids = flat.search_ids(block[3], 3)[0].tolist()
        assert ids == [3, 13, 23]

    def test_from_arrays_shares_memory(self, rng):
        data = unit_rows(rng, 50, 4)
        flat = BruteForceIndex.from_arrays(data, np.arange(50))
        assert np.shares_memory(flat.vectors, data)
        assert flat.search(data[5], 1)[0].entry_id == 5


def test_many_duplicates_still_fill_results(rng):
    v = unit_rows(rng, 1, 8)[0]
    idx = HnswIndex(8, SMALL)
    for y in range(60):
        idx.insert(v, y)
    assert [h.entry_id for h in idx.search(v, 40)] == list(range(40))
    idx.check_invariants()
