"""Epoch-structured pool learner: uniform sampling of fresh experts, a
per-epoch exponential-weights run over the pool, best-of-sample retention and
the age-respecting domination eviction rule, with triangular interval-loss
bookkeeping (each older entry tracks its average over every younger entry's
residence interval).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .meter import WordMeter
from .mwu import MwuState
from .streams import LossOracle

__all__ = [
    "BaselineParams",
    "IntervalAccumulator",
    "PoolEntry",
    "BaselineLearner",
    "best_of_sample",
    "evict_pass",
    "pool_potential",
    "default_epoch_length",
]

EVICT_GUARD = 1e-12


def default_epoch_length(n: int, T: int, eps: float) -> int:
    """Epoch length balancing the sampling and MWU regret terms."""
    return int(min(max(round((T / (eps**2 * n)) ** (2.0 / 3.0)), 1), T))


@dataclass(frozen=True)
class BaselineParams:
    n: int
    T: int
    eps: float
    B: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if self.T < 1:
            raise ValueError(f"need T >= 1, got {self.T}")
        # the upper end is inclusive so the hierarchy's eps = n^(-delta/2)
        # is admissible at n = 4, delta = 1
        if not 0.0 < self.eps <= 0.5:
            raise ValueError(f"eviction threshold must lie in (0, 1/2], got {self.eps}")
        if self.B is None:
            object.__setattr__(self, "B", default_epoch_length(self.n, self.T, self.eps))
        if not 1 <= self.B <= self.T:
            raise ValueError(f"epoch length {self.B} outside [1, {self.T}]")

    @property
    def sample_size(self) -> int:
        return min(math.ceil(self.eps**-2), self.n)

    @property
    def pool_cap(self) -> int:
        """Post-eviction bound on the persistent pool size."""
        return math.ceil(4.0 / self.eps * math.log(self.T))


@dataclass
class IntervalAccumulator:
    """Running sum and count of per-epoch average losses."""

    sum: float = 0.0
    count: int = 0

    def add(self, value: float) -> None:
        self.sum += value
        self.count += 1

    @property
    def average(self) -> float:
        if self.count == 0:
            raise ValueError("average of an empty interval")
        return self.sum / self.count


@dataclass
class PoolEntry:
    """A persistent pool member and its triangular loss table.

    ``cross`` holds this (older) expert's accumulator over the residence
    interval of each strictly younger pool member, keyed by that member's id.
    """

    id: int
    alpha: int
    own: IntervalAccumulator = field(default_factory=IntervalAccumulator)
    cross: dict[int, IntervalAccumulator] = field(default_factory=dict)

    @property
    def words(self) -> int:
        # id + entry epoch + own (sum, count) + 2 per cross accumulator
        return 4 + 2 * len(self.cross)


def best_of_sample(epoch_avgs: dict[int, float]) -> int:
    """The sampled expert with minimum epoch-average loss, ties to lowest id."""
    if not epoch_avgs:
        raise ValueError("empty sample")
    return min(epoch_avgs, key=lambda i: (epoch_avgs[i], i))


def evict_pass(entries: list[PoolEntry], threshold: float) -> tuple[list[PoolEntry], list[PoolEntry]]:
    """One domination pass against the pre-pass snapshot.

    Entry i is evicted iff some strictly older j has, over i's own interval,
    an average no more than ``threshold`` above i's. All comparisons read the
    snapshot, so an entry evicted in this pass can still evict younger ones.
    Returns (survivors, evicted); survivors' cross tables are pruned of
    references to evicted entries.
    """
    survivors: list[PoolEntry] = []
    evicted: list[PoolEntry] = []
    for idx, entry in enumerate(entries):
        doomed = False
        own_avg = entry.own.average
        for older in entries[:idx]:
            if own_avg >= older.cross[entry.id].average - threshold - EVICT_GUARD:
                doomed = True
                break
        (evicted if doomed else survivors).append(entry)
    if evicted:
        gone = {e.id for e in evicted}
        for entry in survivors:
            for dead in gone & entry.cross.keys():
                del entry.cross[dead]
    return survivors, evicted


def pool_potential(entries: list[PoolEntry]) -> list[float]:
    """Potential 2*ln|interval| + own-average per entry, youngest first.

    Consecutive differences are at least the eviction threshold for any pool
    that survived an eviction pass.
    """
    return [2.0 * math.log(e.own.count) + e.own.average for e in reversed(entries)]


class BaselineLearner:
    """Sequential driver for the epoch learner.

    Supports day-at-a-time stepping (needed against adaptive streams) and a
    vectorized whole-epoch path for oblivious streams; both share the same
    epoch-boundary bookkeeping.
    """

    def __init__(self, params: BaselineParams, meter: WordMeter | None = None,
                 rng: np.random.Generator | None = None):
        self.params = params
        self.rng = np.random.default_rng(params.seed) if rng is None else rng
        self.meter = WordMeter() if meter is None else meter
        self.meter.charge("overhead", 8)
        self.entries: list[PoolEntry] = []  # oldest first
        self.day = 0  # days completed
        self.epoch = 0  # current epoch index once begun
        self.cumulative_loss = 0.0
        self.queries = 0
        # within-epoch state
        self._members: list[int] = []
        self._r_ids: list[int] = []
        self._mwu: MwuState | None = None
        self._epoch_sums: np.ndarray | None = None
        self._epoch_days = 0
        self._epoch_len = 0
        self.on_epoch_close = None  # optional callback(learner)

    # -- epoch lifecycle ----------------------------------------------------

    @property
    def in_epoch(self) -> bool:
        return self._mwu is not None

    @property
    def members(self) -> list[int]:
        return list(self._members)

    def _begin_epoch(self) -> None:
        p = self.params
        self.epoch += 1
        self._epoch_len = min(p.B, p.T - self.day)
        pool_ids = [e.id for e in self.entries]
        self._r_ids = []
        if self._epoch_len == p.B or not pool_ids:
            drawn = self.rng.choice(p.n, size=p.sample_size, replace=False) + 1
            in_pool = set(pool_ids)
            # the pool copy is authoritative on collisions
            self._r_ids = [int(i) for i in drawn if int(i) not in in_pool]
        self._members = pool_ids + self._r_ids
        self._mwu = MwuState(self._members, horizon=p.B)
        self._epoch_sums = np.zeros(len(self._members))
        self._epoch_days = 0
        self.meter.charge("mwu", len(self._members) + 4)
        self.meter.charge("epoch", len(self._members) + len(self._r_ids))

    def advance(self, losses: np.ndarray) -> np.ndarray:
        """Play the next ``len(losses)`` days of the current epoch.

        losses has one row per day and one column per current member, in the
        order of ``members``. Returns the realized per-day losses.
        """
        if not self.in_epoch:
            self._begin_epoch()
        days = losses.shape[0]
        if self._epoch_days + days > self._epoch_len:
            raise ValueError("block crosses an epoch boundary")
        picks = self._mwu.run_block(losses, self.rng)
        realized = losses[np.arange(days), picks]
        self._epoch_sums += losses.sum(axis=0)
        self._epoch_days += days
        self.day += days
        self.cumulative_loss += float(realized.sum())
        self.queries += days * len(self._members)
        self._last_picks = [self._members[k] for k in picks]
        if self._epoch_days == self._epoch_len:
            self._close_epoch()
        return realized

    def step_day(self, oracle: LossOracle) -> int:
        """Advance exactly one day, querying the oracle for current members."""
        if not self.in_epoch:
            self._begin_epoch()
        t = self.day + 1
        block = oracle.loss_block(t, t, np.asarray(self._members))
        self.advance(block)
        return self._last_picks[0]

    def commit_distribution(self) -> np.ndarray:
        """Exact current mixed strategy mapped onto [n] (zero off-pool mass)."""
        if not self.in_epoch:
            self._begin_epoch()
        p = np.zeros(self.params.n)
        dist = self._mwu.distribution()
        for i, prob in zip(self._members, dist):
            p[i - 1] += prob
        return p

    def _close_epoch(self) -> None:
        p = self.params
        if self._epoch_days == p.B:
            avgs = self._epoch_sums / p.B
            by_id = {i: float(avgs[k]) for k, i in enumerate(self._members)}
            for entry in self.entries:
                entry.own.add(by_id[entry.id])
                for acc in entry.cross.values():
                    acc.add(by_id[entry.id])
            if self._r_ids:
                survivor = best_of_sample({i: by_id[i] for i in self._r_ids})
                fresh = PoolEntry(survivor, alpha=self.epoch)
                fresh.own.add(by_id[survivor])
                self.meter.charge("pool", 4)
                for older in self.entries:
                    older.cross[survivor] = IntervalAccumulator(by_id[older.id], 1)
                    self.meter.charge("pool", 2)
                self.entries.append(fresh)
            pre_words = {id(e): e.words for e in self.entries}
            self.entries, evicted = evict_pass(self.entries, p.eps)
            for dead in evicted:
                self.meter.release("pool", pre_words[id(dead)])
            for entry in self.entries:
                # cross rows referencing evicted ids were dropped by the pass
                delta = pre_words[id(entry)] - entry.words
                if delta:
                    self.meter.release("pool", delta)
        # tail epochs (shorter than B) skip retention, eviction and bookkeeping
        self.meter.release("mwu", len(self._members) + 4)
        self.meter.release("epoch", len(self._members) + len(self._r_ids))
        self._mwu = None
        self._members = []
        self._r_ids = []
        self._epoch_sums = None
        if self.on_epoch_close is not None:
            self.on_epoch_close(self)

    # -- whole-run driver ---------------------------------------------------

    def run(self, oracle: LossOracle) -> None:
        """Run the full horizon against an oblivious oracle, epoch at a time."""
        p = self.params
        while self.day < p.T:
            self._begin_epoch()
            t0 = self.day + 1
            t1 = self.day + self._epoch_len
            block = oracle.loss_block(t0, t1, np.asarray(self._members))
            self.advance(block)

    def reset_episode(self) -> None:
        """Clear the pool and epoch phase (hierarchy episode restarts)."""
        if self.in_epoch:
            raise RuntimeError("cannot reset mid-epoch")
        for entry in self.entries:
            self.meter.release("pool", entry.words)
        self.entries = []
        self.epoch = 0

    # -- accounting ---------------------------------------------------------

    def audit_words(self) -> int:
        """Recompute the metered word count from live state."""
        words = 8
        words += sum(e.words for e in self.entries)
        if self.in_epoch:
            words += len(self._members) + 4  # MWU cumulative losses + constants
            words += len(self._members) + len(self._r_ids)  # epoch sums + R ids
        return words
