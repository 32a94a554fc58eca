"""Multi-level learner: each level treats a block of lower-level days as one
decision round, merges every candidate expert with the level below via a
two-way exponential-weights race, and runs the pool/eviction machinery on
truncated loss differences whose width shrinks level by level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .baseline import (
    BaselineLearner,
    BaselineParams,
    IntervalAccumulator,
    PoolEntry,
    best_of_sample,
    evict_pass,
)
from .meter import WordMeter
from .streams import LossOracle

__all__ = ["LevelParams", "LevelState", "HierarchyLearner", "build_levels",
           "truncated_loss"]

EVICT_GUARD = 1e-12


def truncated_loss(width: float, avg_expert: float, avg_below: float) -> float:
    """Decision-round loss difference floored at -width."""
    return max(avg_expert - avg_below, -width)


@dataclass(frozen=True)
class LevelParams:
    """Per-level constants. ``day_span`` is the calendar length of one decision
    round; one epoch is ``B`` decision rounds and one episode ``epochs_per_episode``
    epochs, so episode_days = epochs_per_episode * B * day_span.
    """

    k: int
    eps: float
    B: int
    day_span: int
    epochs_per_episode: int
    theta: float
    width: float
    sample_size: int
    pool_cap: int

    @property
    def episode_days(self) -> int:
        return self.epochs_per_episode * self.B * self.day_span


def build_levels(n: int, T: int, delta: float) -> tuple[float, int, list[LevelParams]]:
    """Materialize the level ladder for a horizon-T run.

    eps = n^(-delta/2); level day spans nest exactly: a level-k decision round
    spans one full level-(k-1) episode. Counts are rounded up where the ideal
    values are non-integral, and K is the deepest level whose episode fits in T
    (at least 1; a warning marks the degenerate single-level regime).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if T < n:
        raise ValueError(f"need T >= n, got T={T}, n={n}")
    eps = n ** (-delta / 2.0)
    B = math.ceil(eps**-2)
    log_nt = math.log(n * T)
    sample = min(math.ceil(eps**-2), n)
    cap = math.ceil(8.0 / eps * math.log(T))

    levels: list[LevelParams] = []
    # level 1: plain epoch learner over raw day losses
    e1 = math.ceil(eps * n * n)
    levels.append(LevelParams(1, eps, B, 1, e1, eps, 1.0, sample, cap))
    while True:
        k = len(levels) + 1
        span = levels[-1].episode_days
        ek = math.ceil(eps * n)
        lp = LevelParams(
            k, eps, B, span, ek,
            theta=eps**k * log_nt ** (2 * k - 1),
            width=eps ** (k - 1) * log_nt ** (2 * k - 1),
            sample_size=sample,
            pool_cap=cap,
        )
        if lp.episode_days > T:
            break
        levels.append(lp)
    if levels[0].episode_days > T:
        warnings.warn(
            f"horizon T={T} is shorter than one bottom-level episode "
            f"({levels[0].episode_days} days); running a single truncated level"
        )
    return eps, len(levels), levels


class LevelState:
    """One level (k >= 2): pool over merged experts, truncated-loss eviction."""

    def __init__(self, lp: LevelParams, n: int, T: int, meter: WordMeter):
        self.lp = lp
        self.n = n
        self.T = T
        self.meter = meter
        self.meter.charge("level", 8)
        self.merge_eta = math.sqrt(math.log(2.0) / lp.day_span)
        self.mwu_eta = math.sqrt(math.log(lp.pool_cap) / lp.B)
        self.entries: list[PoolEntry] = []
        self.epoch_in_episode = 0
        self.epoch_count = 0
        self.in_epoch = False
        self.day_in_dd = 0
        self.dd_in_epoch = 0
        self.cumulative_loss = 0.0
        self.queries = 0
        self.width_exceedances = 0
        self.min_truncated = math.inf  # most negative truncated loss seen
        self.decision_days = 0
        self.dd_close_days: list[int] = []  # global day indices of closed rounds
        self.episode_close_days: list[int] = []
        self.on_epoch_close = None
        # within-epoch / within-round state
        self._members: list[int] = []
        self._r_ids: list[int] = []
        self._ids_arr: np.ndarray | None = None
        self._level_cum: np.ndarray | None = None
        self._epoch_trunc_sums: np.ndarray | None = None
        self._committed = -1
        self._cum_own: np.ndarray | None = None
        self._cum_descend: np.ndarray | None = None
        self._dd_sum_e: np.ndarray | None = None
        self._dd_sum_base = 0.0

    # -- lifecycle ----------------------------------------------------------

    def _begin_epoch(self, remaining_days: int, rng: np.random.Generator) -> None:
        lp = self.lp
        pool_ids = [e.id for e in self.entries]
        self._r_ids = []
        full = remaining_days >= lp.B * lp.day_span
        if full or not pool_ids:
            drawn = rng.choice(self.n, size=lp.sample_size, replace=False) + 1
            in_pool = set(pool_ids)
            self._r_ids = [int(i) for i in drawn if int(i) not in in_pool]
        self._members = pool_ids + self._r_ids
        self._ids_arr = np.asarray(self._members, dtype=np.int64)
        m = len(self._members)
        self._level_cum = np.zeros(m)
        self._epoch_trunc_sums = np.zeros(m)
        self.dd_in_epoch = 0
        self.in_epoch = True
        self._full_epoch = full
        self.meter.charge("mwu", m + 4)
        self.meter.charge("epoch", m + len(self._r_ids) + 1)
        self.meter.charge("merge", 4 * m)

    def _start_decision_day(self, rng: np.random.Generator) -> None:
        m = len(self._members)
        w = np.exp(-self.mwu_eta * (self._level_cum - self._level_cum.min()))
        cdf = np.cumsum(w)
        self._committed = min(int(np.searchsorted(cdf, rng.random() * cdf[-1],
                                                  side="right")), m - 1)
        self._cum_own = np.zeros(m)
        self._cum_descend = np.zeros(m)
        self._dd_sum_e = np.zeros(m)
        self._dd_sum_base = 0.0

    def process_block(self, oracle: LossOracle, t0: int, L: int,
                      base_realized: np.ndarray, base_played: np.ndarray,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Advance L days (never crossing a decision-round boundary).

        base_realized / base_played are the lower level's per-day realized
        losses and played expert ids over the same days.
        """
        lp = self.lp
        if not self.in_epoch:
            self._begin_epoch(self.T - (t0 - 1), rng)
        if self.day_in_dd == 0:
            self._start_decision_day(rng)
        if self.day_in_dd + L > lp.day_span:
            raise ValueError("block crosses a decision-round boundary")
        m = len(self._members)
        block = oracle.loss_block(t0, t0 + L - 1, self._ids_arr)
        self.queries += L * m

        def shifted_cumsum(x):
            c = np.cumsum(x, axis=0)
            return np.vstack([np.zeros_like(c[:1]), c[:-1]])

        own_pre = self._cum_own[None, :] + shifted_cumsum(block)
        descend_pre = self._cum_descend[None, :] + shifted_cumsum(
            base_realized[:, None]
        )
        # two-way exponential weights: p(follow own expert)
        p_own = 1.0 / (1.0 + np.exp(-self.merge_eta * (descend_pre - own_pre)))
        follow_own = rng.random((L, m)) < p_own
        realized_e = np.where(follow_own, block, base_realized[:, None])
        self._cum_own += block.sum(axis=0)
        self._cum_descend += base_realized.sum()
        realized = realized_e[:, self._committed].copy()
        played = np.where(
            follow_own[:, self._committed],
            self._ids_arr[self._committed],
            base_played,
        )
        self._dd_sum_e += realized_e.sum(axis=0)
        self._dd_sum_base += float(base_realized.sum())
        self.day_in_dd += L
        self.cumulative_loss += float(realized.sum())
        if self.day_in_dd == lp.day_span:
            self._close_decision_day(t0 + L - 1)
        return realized, played

    def _close_decision_day(self, global_day: int) -> None:
        lp = self.lp
        avg_e = self._dd_sum_e / lp.day_span
        avg_base = self._dd_sum_base / lp.day_span
        truncated = np.maximum(avg_e - avg_base, -lp.width)  # truncated_loss, vectorized
        self.min_truncated = min(self.min_truncated, float(truncated.min()))
        normalized = (truncated + lp.width) / (2.0 * lp.width)
        self.width_exceedances += int((normalized > 1.0 + 1e-12).sum())
        np.clip(normalized, 0.0, 1.0, out=normalized)
        self._level_cum += normalized
        self._level_cum -= self._level_cum.min()
        self._epoch_trunc_sums += truncated
        self.day_in_dd = 0
        self.dd_in_epoch += 1
        self.decision_days += 1
        self.dd_close_days.append(global_day)
        if self.dd_in_epoch == lp.B:
            self._close_epoch(global_day)

    def _close_epoch(self, global_day: int) -> None:
        lp = self.lp
        if self._full_epoch:
            avgs = self._epoch_trunc_sums / lp.B
            by_id = {i: float(avgs[k]) for k, i in enumerate(self._members)}
            for entry in self.entries:
                entry.own.add(by_id[entry.id])
                for acc in entry.cross.values():
                    acc.add(by_id[entry.id])
            if self._r_ids:
                survivor = best_of_sample({i: by_id[i] for i in self._r_ids})
                fresh = PoolEntry(survivor, alpha=self.epoch_count + 1)
                fresh.own.add(by_id[survivor])
                self.meter.charge("pool", 4)
                for older in self.entries:
                    older.cross[survivor] = IntervalAccumulator(by_id[older.id], 1)
                    self.meter.charge("pool", 2)
                self.entries.append(fresh)
            pre_words = {id(e): e.words for e in self.entries}
            self.entries, evicted = evict_pass(self.entries, lp.theta)
            for dead in evicted:
                self.meter.release("pool", pre_words[id(dead)])
            for entry in self.entries:
                delta = pre_words[id(entry)] - entry.words
                if delta:
                    self.meter.release("pool", delta)
        m = len(self._members)
        self.meter.release("mwu", m + 4)
        self.meter.release("epoch", m + len(self._r_ids) + 1)
        self.meter.release("merge", 4 * m)
        self.in_epoch = False
        self.epoch_count += 1
        self.epoch_in_episode += 1
        if self.on_epoch_close is not None:
            self.on_epoch_close(self)
        if self.epoch_in_episode == lp.epochs_per_episode:
            for entry in self.entries:
                self.meter.release("pool", entry.words)
            self.entries = []
            self.epoch_in_episode = 0
            self.episode_close_days.append(global_day)

    def audit_words(self) -> int:
        words = 8 + sum(e.words for e in self.entries)
        if self.in_epoch:
            m = len(self._members)
            words += (m + 4) + (m + len(self._r_ids) + 1) + 4 * m
        return words


class HierarchyLearner:
    """Full multi-level algorithm: plays the top level's decision every day."""

    def __init__(self, n: int, T: int, delta: float, seed: int = 0):
        self.n = n
        self.T = T
        self.delta = delta
        self.seed = seed
        self.eps, self.K, self.level_params = build_levels(n, T, delta)
        self.B = self.level_params[0].B
        self.rng = np.random.default_rng(seed)
        self.meter = WordMeter()
        self.day = 0
        self.cumulative_loss = 0.0
        self.levels = [
            LevelState(lp, n, T, self.meter) for lp in self.level_params[1:]
        ]
        self._lvl1: BaselineLearner | None = None
        self._ep1_start = 0
        self._ep1_len = 0
        self._buffer: list[tuple[int, float]] = []  # (played id, realized loss)
        self.on_level1_epoch_close = None

    def _ensure_level1(self) -> None:
        if self._lvl1 is not None and self.day < self._ep1_start + self._ep1_len:
            return
        if self._lvl1 is not None:
            self._lvl1_dispose()
        self._ep1_start = self.day
        self._ep1_len = min(self.level_params[0].episode_days, self.T - self.day)
        params = BaselineParams(
            self.n,
            self._ep1_len,
            self.eps,
            B=min(self.B, self._ep1_len),
            seed=self.seed,
        )
        self._lvl1 = BaselineLearner(params, meter=self.meter, rng=self.rng)
        if self.on_level1_epoch_close is not None:
            self._lvl1.on_epoch_close = self.on_level1_epoch_close

    def _lvl1_dispose(self) -> None:
        lvl = self._lvl1
        for entry in lvl.entries:
            self.meter.release("pool", entry.words)
        self.meter.release("overhead", 8)
        self._lvl1 = None

    def _advance_block(self, oracle: LossOracle) -> tuple[np.ndarray, np.ndarray]:
        """Advance by one bottom-level epoch (or the final shorter tail)."""
        self._ensure_level1()
        lvl1 = self._lvl1
        if not lvl1.in_epoch:
            lvl1._begin_epoch()
        L = lvl1._epoch_len - lvl1._epoch_days
        t0 = self.day + 1
        block = oracle.loss_block(t0, t0 + L - 1, np.asarray(lvl1._members))
        realized = lvl1.advance(block)
        played = np.asarray(lvl1._last_picks, dtype=np.int64)
        for lvl in self.levels:
            realized, played = lvl.process_block(
                oracle, t0, L, realized, played, self.rng
            )
        self.day += L
        self.cumulative_loss += float(realized.sum())
        return played, realized

    def step_day(self, oracle: LossOracle) -> int:
        """Advance one calendar day; returns the expert id actually played."""
        if self.day >= self.T and not self._buffer:
            raise RuntimeError("horizon exhausted")
        if not self._buffer:
            played, realized = self._advance_block(oracle)
            self._buffer = list(zip(played.tolist(), realized.tolist()))
        return self._buffer.pop(0)[0]

    def run(self, oracle: LossOracle) -> None:
        while self.day < self.T:
            self._advance_block(oracle)

    def audit_words(self) -> int:
        words = sum(lvl.audit_words() for lvl in self.levels)
        if self._lvl1 is not None:
            words += self._lvl1.audit_words()
        return words
