"""Tests for the epoch-structured pool learner."""

import math

import numpy as np
import pytest

from expertpool.baseline import (
    BaselineLearner,
    BaselineParams,
    IntervalAccumulator,
    PoolEntry,
    best_of_sample,
    default_epoch_length,
    evict_pass,
    pool_potential,
)
from expertpool.streams import ConstantOracle, StreamParams, make_oracle


def entry(id, alpha, own_avg, own_count=1, cross=None):
    e = PoolEntry(id, alpha)
    e.own = IntervalAccumulator(own_avg * own_count, own_count)
    for younger_id, (avg, count) in (cross or {}).items():
        e.cross[younger_id] = IntervalAccumulator(avg * count, count)
    return e


class TestParams:
    def test_sample_size_clamp(self):
        p = BaselineParams(8, 64, eps=0.25, B=4)
        assert p.sample_size == min(16, 8) == 8

    def test_eps_out_of_range(self):
        with pytest.raises(ValueError):
            BaselineParams(8, 64, eps=0.6)

    def test_pool_cap_formula(self):
        p = BaselineParams(128, 10**5, eps=0.1)
        assert p.pool_cap == math.ceil(40 * math.log(10**5)) == 461

    def test_default_epoch_length(self):
        n, T, eps = 64, 10**5, 0.1
        assert default_epoch_length(n, T, eps) == round((T / (eps**2 * n)) ** (2 / 3))
        assert default_epoch_length(2, 4, 0.49) >= 1

    def test_explicit_b_bounds(self):
        with pytest.raises(ValueError):
            BaselineParams(4, 10, eps=0.2, B=11)


class TestBestOfSample:
    def test_argmin(self):
        assert best_of_sample({5: 0.3, 7: 0.2, 9: 0.9}) == 7

    def test_tie_to_lowest_id(self):
        assert best_of_sample({4: 0.2, 2: 0.2}) == 2

    def test_singleton(self):
        assert best_of_sample({3: 0.8}) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            best_of_sample({})


class TestEvictPass:
    def test_dominated_younger_evicted(self):
        # eps=0.1: own 0.50 >= cross 0.55 - 0.1 -> evicted
        pool = [entry(1, 1, 0.9, cross={2: (0.55, 1)}),
                entry(2, 2, 0.50)]
        survivors, evicted = evict_pass(pool, 0.1)
        assert [e.id for e in survivors] == [1]
        assert [e.id for e in evicted] == [2]

    def test_clearly_better_younger_survives(self):
        # own 0.50 < cross 0.65 - 0.1 -> survives
        pool = [entry(1, 1, 0.9, cross={2: (0.65, 1)}),
                entry(2, 2, 0.50)]
        survivors, evicted = evict_pass(pool, 0.1)
        assert [e.id for e in survivors] == [1, 2]
        assert evicted == []

    def test_exact_boundary_evicts(self):
        # the rule is inclusive: own == cross - eps evicts
        pool = [entry(1, 1, 0.9, cross={2: (0.60, 1)}),
                entry(2, 2, 0.50)]
        survivors, _ = evict_pass(pool, 0.1)
        assert [e.id for e in survivors] == [1]

    def test_single_entry_unchanged(self):
        pool = [entry(1, 1, 0.4)]
        survivors, evicted = evict_pass(pool, 0.1)
        assert survivors == pool and evicted == []

    def test_snapshot_semantics(self):
        # b is evicted by a, yet still evicts c (comparisons read the snapshot)
        pool = [entry(1, 1, 0.9, cross={2: (0.2, 1), 3: (0.9, 1)}),
                entry(2, 2, 0.3, cross={3: (0.4, 1)}),
                entry(3, 3, 0.35)]
        survivors, evicted = evict_pass(pool, 0.1)
        assert [e.id for e in evicted] == [2, 3]
        assert [e.id for e in survivors] == [1]

    def test_cross_tables_pruned(self):
        pool = [entry(1, 1, 0.9, cross={2: (0.2, 1), 3: (0.95, 1)}),
                entry(2, 2, 0.3, cross={3: (0.95, 1)}),
                entry(3, 3, 0.5)]
        survivors, _ = evict_pass(pool, 0.1)
        assert [e.id for e in survivors] == [1, 3]
        assert set(survivors[0].cross) == {3}


class TestPoolPotential:
    def test_formula(self):
        e = entry(1, 1, 0.3, own_count=5)
        assert pool_potential([e])[0] == pytest.approx(2 * math.log(5) + 0.3)
        assert pool_potential([e])[0] == pytest.approx(3.5189, abs=1e-4)

    def test_youngest_first_order(self):
        old = entry(1, 1, 0.9, own_count=10)
        young = entry(2, 5, 0.1, own_count=2)
        phi = pool_potential([old, young])
        assert phi[0] == pytest.approx(2 * math.log(2) + 0.1)
        assert phi[1] == pytest.approx(2 * math.log(10) + 0.9)

    def test_illegal_pool_flagged_by_harness(self):
        from expertpool.bench import check_pool
        # hand-built pool violating the potential increase
        old = entry(1, 1, 0.1, own_count=1, cross={2: (0.9, 1)})
        young = entry(2, 2, 0.1, own_count=1)
        bad = check_pool([old, young], threshold=0.3, cap=10)
        assert any("potential" in msg for msg in bad)


class TestLearner:
    def test_first_epoch_covers_all_when_n_small(self):
        params = BaselineParams(4, 16, eps=0.5, B=4, seed=0)
        learner = BaselineLearner(params)
        learner._begin_epoch()
        assert sorted(learner.members) == [1, 2, 3, 4]

    def test_negative_control_dominated_survivor_evicted(self):
        # expert 1 dominates; each later epoch's fresh survivor is evicted
        # at its first boundary, so the pool stays at the incumbent
        oracle = ConstantOracle(StreamParams(6, 40, seed=0),
                                [0.05, 0.9, 0.9, 0.9, 0.9, 0.9])
        params = BaselineParams(6, 40, eps=0.1, B=4, seed=1)
        learner = BaselineLearner(params)
        pools = []
        learner.on_epoch_close = lambda l: pools.append([e.id for e in l.entries])
        learner.run(oracle)
        assert pools[0] == [1]
        for snapshot in pools[1:]:
            assert snapshot == [1]

    def test_determinism(self):
        spec = {"generator": "iid-bernoulli", "mean-range": [0.2, 0.8]}
        oracle = make_oracle(StreamParams(8, 200, seed=5), spec)
        runs = []
        for _ in range(2):
            learner = BaselineLearner(BaselineParams(8, 200, eps=0.3, seed=9))
            learner.run(oracle)
            runs.append((learner.cumulative_loss,
                         [e.id for e in learner.entries]))
        assert runs[0] == runs[1]

    def test_day_step_equals_block_run(self):
        spec = {"generator": "iid-bernoulli", "mean-range": [0.1, 0.9]}
        oracle = make_oracle(StreamParams(6, 60, seed=2), spec)
        by_block = BaselineLearner(BaselineParams(6, 60, eps=0.3, B=5, seed=4))
        by_block.run(oracle)
        by_day = BaselineLearner(BaselineParams(6, 60, eps=0.3, B=5, seed=4))
        while by_day.day < 60:
            by_day.step_day(oracle)
        assert by_day.cumulative_loss == by_block.cumulative_loss
        assert [e.id for e in by_day.entries] == [e.id for e in by_block.entries]

    def test_tail_epoch_skips_retention_and_eviction(self):
        oracle = ConstantOracle(StreamParams(4, 10, seed=0),
                                [0.1, 0.5, 0.6, 0.7])
        learner = BaselineLearner(BaselineParams(4, 10, eps=0.2, B=4, seed=0))
        learner.run(oracle)
        # epochs: 4 + 4 + tail 2; the tail adds no pool entry and no epoch avg
        assert learner.day == 10
        for e in learner.entries:
            assert e.own.count <= 2

    def test_entry_epochs_distinct(self):
        spec = {"generator": "iid-bernoulli", "mean-range": [0.2, 0.8]}
        oracle = make_oracle(StreamParams(10, 300, seed=8), spec)
        learner = BaselineLearner(BaselineParams(10, 300, eps=0.25, B=10, seed=3))
        seen = []
        def check(l):
            alphas = [e.alpha for e in l.entries]
            assert len(set(alphas)) == len(alphas)
            seen.append(tuple(alphas))
        learner.on_epoch_close = check
        learner.run(oracle)
        assert seen

    def test_query_discipline(self):
        # per day, at most pool-cap + sample-size oracle queries
        params = BaselineParams(12, 240, eps=0.3, B=8, seed=6)
        oracle = make_oracle(StreamParams(12, 240, seed=1),
                             {"generator": "iid-bernoulli", "mean-range": [0.2, 0.8]})
        learner = BaselineLearner(params)
        learner.run(oracle)
        assert learner.queries <= 240 * (params.pool_cap + params.sample_size)

    def test_commit_distribution(self):
        params = BaselineParams(5, 20, eps=0.45, B=4, seed=0)
        learner = BaselineLearner(params)
        p = learner.commit_distribution()
        assert p.shape == (5,)
        assert abs(p.sum() - 1.0) < 1e-9
        assert set(np.nonzero(p)[0] + 1) <= set(learner.members)

    def test_meter_audit_matches(self):
        spec = {"generator": "iid-bernoulli", "mean-range": [0.1, 0.9]}
        oracle = make_oracle(StreamParams(8, 120, seed=7), spec)
        learner = BaselineLearner(BaselineParams(8, 120, eps=0.3, B=6, seed=2))
        learner.on_epoch_close = lambda l: (
            None if l.audit_words() == l.meter.current
            else pytest.fail("meter drifted from live state")
        )
        learner.run(oracle)
        assert learner.audit_words() == learner.meter.current

    def test_reset_episode_clears_pool(self):
        oracle = ConstantOracle(StreamParams(4, 8, seed=0), [0.1, 0.5, 0.6, 0.7])
        learner = BaselineLearner(BaselineParams(4, 8, eps=0.2, B=4, seed=0))
        learner.run(oracle)
        assert learner.entries
        learner.reset_episode()
        assert learner.entries == []
        assert learner.meter.by_category.get("pool", 0) == 0
