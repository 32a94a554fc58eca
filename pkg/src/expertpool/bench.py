"""Experiment runner and verification harness: wires oracles to learners,
computes exact regret against brute-force enumeration, runs the adaptive
game demonstration, and emits CSV traces and summary reports.

Everything in this module is evaluation machinery and stays outside the
learner's word meter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import BaselineLearner, BaselineParams, pool_potential
from .hierarchy import HierarchyLearner, LevelState
from .meter import WordMeter
from .mwu import MwuState
from .streams import GameOracle, LossOracle, StreamParams, make_oracle

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "oracle_best_expert",
    "run_experiment",
    "run_lowerbound_demo",
    "check_pool",
    "check_memory",
    "dump_stream",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ["day", "alg_loss_cum", "best_loss_cum", "regret",
                 "words_current", "words_peak", "pool_size"]

ENUMERATION_GUARD = 10**9


def oracle_best_expert(oracle: LossOracle, n: int | None = None,
                       T: int | None = None) -> tuple[int, float]:
    """Best expert in hindsight by full enumeration, ties to the lowest id."""
    if oracle.mode == "adaptive-game":
        raise ValueError("best expert is undefined for an adaptive stream")
    n = oracle.n if n is None else n
    T = oracle.T if T is None else T
    if n * T > ENUMERATION_GUARD:
        raise ValueError(f"n*T = {n * T} exceeds the enumeration guard")
    totals = oracle.loss_block(1, T, np.arange(1, n + 1)).sum(axis=0)
    best = int(np.argmin(totals)) + 1
    return best, float(totals[best - 1])


# ---------------------------------------------------------------------------
# Invariant checks
# ---------------------------------------------------------------------------

def check_pool(entries, threshold: float, cap: int,
               dichotomy_eps: float | None = None,
               potential: bool = True) -> list[str]:
    """Post-eviction pool invariants; returns human-readable violations.

    Checks the size cap, pairwise domination-freedom, the potential increase
    (``potential=False`` skips it for truncated-loss pools whose averages are
    not on the raw [0, 1] scale), and, when ``dichotomy_eps`` is given, the
    loss-vs-length dichotomy at alpha = eps/2.
    """
    bad: list[str] = []
    if len(entries) > cap:
        bad.append(f"pool size {len(entries)} exceeds cap {cap}")
    alphas = [e.alpha for e in entries]
    if len(set(alphas)) != len(alphas):
        bad.append(f"duplicate entry epochs {alphas}")
    for yi in range(len(entries)):
        young = entries[yi]
        for older in entries[:yi]:
            cross = older.cross[young.id].average
            if not cross > young.own.average + threshold:
                bad.append(
                    f"domination: expert {older.id} over expert {young.id}'s "
                    f"interval averages {cross:.6g} <= {young.own.average:.6g} + {threshold:.6g}"
                )
    if potential:
        phi = pool_potential(entries)
        for a, b in zip(phi, phi[1:]):
            if b - a < threshold - 1e-9:
                bad.append(f"potential increase {b - a:.6g} below {threshold:.6g}")
    if dichotomy_eps is not None:
        half = dichotomy_eps / 2.0
        growth = 1.0 + half / (1.0 - half)
        for yi in range(len(entries)):
            young = entries[yi]
            for older in entries[:yi]:
                loss_gap = older.own.average >= young.own.average + half - 1e-9
                length_gap = older.own.count >= growth * young.own.count - 1e-9
                if not (loss_gap or length_gap):
                    bad.append(
                        f"dichotomy: experts ({older.id}, {young.id}) violate "
                        f"both loss and length conditions"
                    )
    return bad


def memory_cap_words(params: BaselineParams) -> int:
    """Word budget 2*S^2 + 4*S + 4*m + 16 with S the during-epoch pool bound."""
    m = params.sample_size
    s_hat = params.pool_cap + m
    return 2 * s_hat * s_hat + 4 * s_hat + 4 * m + 16


def check_memory(learner: BaselineLearner) -> list[str]:
    """Epoch-boundary memory audit: meter vs live state, and the word cap."""
    bad: list[str] = []
    audit = learner.audit_words()
    if audit != learner.meter.current:
        bad.append(f"meter {learner.meter.current} != audited {audit} words")
    cap = memory_cap_words(learner.params)
    if learner.meter.current > cap:
        bad.append(f"metered {learner.meter.current} words exceed cap {cap}")
    return bad


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

class TraceWriter:
    """Per-day CSV trace with exact regret against the enumerated best expert."""

    def __init__(self, path: Path, oracle: LossOracle):
        cum = oracle.full_matrix().cumsum(axis=0)
        self.best_so_far = cum.min(axis=1)  # best expert so far, per day
        self.rows: list[list[str]] = []
        self.path = path
        self.alg_cum = 0.0

    def record(self, t0: int, realized: np.ndarray, meter: WordMeter,
               pool_size: int) -> None:
        for off, loss in enumerate(realized):
            day = t0 + off
            self.alg_cum += float(loss)
            best = float(self.best_so_far[day - 1])
            self.rows.append([
                str(day),
                f"{self.alg_cum:.12g}",
                f"{best:.12g}",
                f"{self.alg_cum - best:.12g}",
                str(meter.current),
                str(meter.peak),
                str(pool_size),
            ])

    def flush(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            w.writerows(self.rows)


def dump_stream(oracle: LossOracle, path: Path) -> None:
    """Write the full loss matrix in the csv-file oracle schema."""
    matrix = oracle.full_matrix()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"e{i}" for i in range(1, oracle.n + 1)])
        for t in range(1, oracle.T + 1):
            w.writerow([str(t)] + [f"{v:.12g}" for v in matrix[t - 1]])


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    learner: str  # mwu-full-memory | baseline | full-hierarchy
    n: int
    T: int
    stream: dict
    trials: list[int] = field(default_factory=lambda: [0])
    learner_params: dict = field(default_factory=dict)
    output: str | None = None
    checks: str = "epoch"  # off | epoch | paranoid

    def __post_init__(self):
        if self.learner not in {"mwu-full-memory", "baseline", "full-hierarchy"}:
            raise ValueError(f"unknown learner {self.learner!r}")
        if not self.trials:
            raise ValueError("trials must be nonempty")
        if self.checks not in {"off", "epoch", "paranoid"}:
            raise ValueError(f"unknown check level {self.checks!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            learner=d["learner"],
            n=d["n"],
            T=d["T"],
            stream=d["stream"],
            trials=d.get("trials", [0]),
            learner_params=d.get("learner-params", {}),
            output=d.get("output"),
            checks=d.get("checks", "epoch"),
        )


@dataclass
class TrialResult:
    seed: int
    regret: float
    cumulative_loss: float
    best_total: float
    peak_words: int
    violations: list[str]
    trace_path: str | None = None


def _run_baseline_trial(config: ExperimentConfig, seed: int,
                        oracle: LossOracle, trace: TraceWriter | None
                        ) -> tuple[float, int, list[str]]:
    lp = config.learner_params
    params = BaselineParams(
        config.n, config.T,
        eps=lp.get("eps", 0.1),
        B=lp.get("B"),
        seed=seed,
    )
    learner = BaselineLearner(params)
    violations: list[str] = []
    if config.checks != "off":
        def on_close(l: BaselineLearner) -> None:
            violations.extend(
                check_pool(l.entries, params.eps, params.pool_cap,
                           dichotomy_eps=params.eps)
            )
            violations.extend(check_memory(l))
        learner.on_epoch_close = on_close
    if config.checks == "paranoid":
        prev_cum = 0.0
        while learner.day < params.T:
            learner.step_day(oracle)
            audit = learner.audit_words()
            if audit != learner.meter.current:
                violations.append(
                    f"day {learner.day}: meter {learner.meter.current} != "
                    f"audited {audit} words"
                )
            if trace is not None:
                realized = np.array([learner.cumulative_loss - prev_cum])
                prev_cum = learner.cumulative_loss
                trace.record(learner.day, realized, learner.meter,
                             len(learner.entries))
    else:
        while learner.day < params.T:
            learner._begin_epoch()
            t0 = learner.day + 1
            block = oracle.loss_block(t0, t0 + learner._epoch_len - 1,
                                      np.asarray(learner.members))
            realized = learner.advance(block)
            if trace is not None:
                trace.record(t0, realized, learner.meter, len(learner.entries))
    return learner.cumulative_loss, learner.meter.peak, violations


def _run_hierarchy_trial(config: ExperimentConfig, seed: int,
                         oracle: LossOracle, trace: TraceWriter | None
                         ) -> tuple[float, int, list[str]]:
    lp = config.learner_params
    learner = HierarchyLearner(config.n, config.T, delta=lp.get("delta", 1.0),
                               seed=seed)
    violations: list[str] = []
    if config.checks != "off":
        cap = math.ceil(8.0 / learner.eps * math.log(config.T))

        def on_lvl1(l: BaselineLearner) -> None:
            # the level-1 learner shares the hierarchy meter, so only pool
            # structure is checked here (the memory audit is hierarchy-wide)
            violations.extend(
                check_pool(l.entries, learner.eps, l.params.pool_cap,
                           dichotomy_eps=learner.eps)
            )

        def on_level(lvl: LevelState) -> None:
            violations.extend(
                check_pool(lvl.entries, lvl.lp.theta, cap, potential=False)
            )

        learner.on_level1_epoch_close = on_lvl1
        for lvl in learner.levels:
            lvl.on_epoch_close = on_level
    while learner.day < learner.T:
        played, realized = learner._advance_block(oracle)
        if config.checks != "off":
            audit = learner.audit_words()
            if audit != learner.meter.current:
                violations.append(
                    f"day {learner.day}: meter {learner.meter.current} != "
                    f"audited {audit} words"
                )
        if trace is not None:
            top_pool = (len(learner.levels[-1].entries) if learner.levels
                        else len(learner._lvl1.entries))
            trace.record(learner.day - len(realized) + 1, realized,
                         learner.meter, top_pool)
    return learner.cumulative_loss, learner.meter.peak, violations


def _run_mwu_trial(config: ExperimentConfig, seed: int, oracle: LossOracle,
                   trace: TraceWriter | None) -> tuple[float, int, list[str]]:
    state = MwuState(list(range(1, config.n + 1)), horizon=config.T)
    meter = WordMeter()
    meter.charge("mwu", config.n + 4)
    rng = np.random.default_rng(seed)
    matrix = oracle.full_matrix()
    picks = state.run_block(matrix, rng)
    realized = matrix[np.arange(config.T), picks]
    if trace is not None:
        trace.record(1, realized, meter, config.n)
    return float(realized.sum()), meter.peak, []


def run_experiment(config: ExperimentConfig) -> list[TrialResult]:
    """One deterministic run per seed; optional CSV traces and invariants."""
    results: list[TrialResult] = []
    for seed in config.trials:
        trace = None
        trace_path = None
        try:
            params = StreamParams(config.n, config.T, seed=seed)
            oracle = make_oracle(params, config.stream)
            if config.output is not None:
                trace_path = Path(config.output) / f"trace_seed{seed}.csv"
                trace = TraceWriter(trace_path, oracle)
            if config.learner == "baseline":
                loss, peak, violations = _run_baseline_trial(config, seed, oracle, trace)
            elif config.learner == "full-hierarchy":
                loss, peak, violations = _run_hierarchy_trial(config, seed, oracle, trace)
            else:
                loss, peak, violations = _run_mwu_trial(config, seed, oracle, trace)
            _, best_total = oracle_best_expert(oracle)
        except Exception as exc:  # one bad trial must not sink the rest
            results.append(TrialResult(seed, math.nan, math.nan, math.nan, 0,
                                       [f"trial aborted: {exc}"]))
            continue
        if trace is not None:
            trace.flush()
        results.append(TrialResult(
            seed=seed,
            regret=loss - best_total,
            cumulative_loss=loss,
            best_total=best_total,
            peak_words=peak,
            violations=violations,
            trace_path=str(trace_path) if trace_path else None,
        ))
    return results


def summarize(results: list[TrialResult]) -> dict:
    regrets = [r.regret for r in results if not math.isnan(r.regret)]
    summary = {
        "trials": len(results),
        "violations": sum(len(r.violations) for r in results),
        "peak_words_max": max((r.peak_words for r in results), default=0),
    }
    if regrets:
        summary.update(
            regret_mean=float(np.mean(regrets)),
            regret_max=float(np.max(regrets)),
            regret_p99=float(np.percentile(regrets, 99)),
        )
    return summary


# ---------------------------------------------------------------------------
# Adaptive-adversary demonstration
# ---------------------------------------------------------------------------

class _MwuCommitLearner:
    def __init__(self, n: int, horizon: int):
        self.state = MwuState(list(range(1, n + 1)), horizon=horizon)

    def commit(self) -> np.ndarray:
        return self.state.distribution()

    def observe(self, normalized_losses: np.ndarray) -> None:
        self.state.update(normalized_losses)


class _FixedLearner:
    def __init__(self, p: np.ndarray):
        self.p = p

    def commit(self) -> np.ndarray:
        return self.p

    def observe(self, normalized_losses: np.ndarray) -> None:
        pass


class _BaselineCommitLearner:
    def __init__(self, n: int, horizon: int, eps: float, seed: int):
        self.learner = BaselineLearner(BaselineParams(n, horizon, eps, seed=seed))

    def commit(self) -> np.ndarray:
        return self.learner.commit_distribution()

    def observe(self, oracle: GameOracle) -> None:
        self.learner.step_day(oracle)


def make_demo_learner(spec: dict, n: int, rounds: int, seed: int,
                      game: GameOracle):
    kind = spec.get("kind", "mwu-full-memory")
    if kind == "mwu-full-memory":
        return _MwuCommitLearner(n, rounds)
    if kind == "equilibrium":
        return _FixedLearner(game.game.equilibrium())
    if kind == "fixed-uniform-subset":
        subset = spec["subset"]
        p = np.zeros(n)
        for i in subset:
            p[i - 1] = 1.0 / len(subset)
        return _FixedLearner(p)
    if kind == "baseline":
        return _BaselineCommitLearner(n, rounds, spec.get("eps", 0.1), seed)
    raise ValueError(f"unknown demo learner {kind!r}")


@dataclass
class DemoResult:
    seed: int
    support: tuple[int, ...]
    avg_raw_loss: float
    thresholds: dict[str, float]


def run_lowerbound_demo(n: int, epsilon_prime: float, rounds: int,
                        learner_spec: dict, seeds: list[int]) -> list[DemoResult]:
    """Repeated play against the best-responding column player.

    The learner commits its exact mixed strategy each round; reported losses
    are on the raw [0, 4] scale for direct comparison with the 1/k thresholds.
    """
    k = round(1.0 / (2.0 * epsilon_prime))
    if k < 2 or k > n:
        raise ValueError(f"support size k={k} outside [2, {n}]")
    out: list[DemoResult] = []
    for seed in seeds:
        oracle = GameOracle(StreamParams(n, rounds, seed=seed), k=k)
        learner = make_demo_learner(learner_spec, n, rounds, seed, oracle)
        adaptive_baseline = isinstance(learner, _BaselineCommitLearner)
        total = 0.0
        for _ in range(rounds):
            p = learner.commit()
            y, vec = oracle.adversary_step(p)
            total += float(p @ oracle.game.column(y))
            learner.observe(oracle if adaptive_baseline else vec)
        out.append(DemoResult(
            seed=seed,
            support=tuple(sorted(oracle.game.S)),
            avg_raw_loss=total / rounds,
            thresholds={
                "minmax": 1.0 / k,
                "approx": 3.0 / (2.0 * k),
                "uncovered": 19.0 / (10.0 * k),
            },
        ))
    return out
