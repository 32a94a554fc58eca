"""Memory-bounded prediction with expert advice.

Learners that keep only a small pool of experts alive, built from an
exponential-weights core, epoch-based sampling with a domination eviction
rule, and a multi-level merge hierarchy over truncated loss differences;
plus seeded loss-stream oracles, an adaptive game adversary, word-level
memory metering, and an experiment harness with brute-force regret oracles.
"""

from .baseline import BaselineLearner, BaselineParams, PoolEntry
from .bench import ExperimentConfig, oracle_best_expert, run_experiment, run_lowerbound_demo
from .hierarchy import HierarchyLearner, build_levels
from .meter import WordMeter
from .mwu import MwuState
from .streams import (
    BernoulliOracle,
    ConstantOracle,
    CsvOracle,
    EpochSpoilerOracle,
    GameInstance,
    GameOracle,
    LossOracle,
    StreamParams,
    make_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineLearner",
    "BaselineParams",
    "PoolEntry",
    "ExperimentConfig",
    "oracle_best_expert",
    "run_experiment",
    "run_lowerbound_demo",
    "HierarchyLearner",
    "build_levels",
    "WordMeter",
    "MwuState",
    "BernoulliOracle",
    "ConstantOracle",
    "CsvOracle",
    "EpochSpoilerOracle",
    "GameInstance",
    "GameOracle",
    "LossOracle",
    "StreamParams",
    "make_oracle",
    "__version__",
]
