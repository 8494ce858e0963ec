"""
Seeded multi-trial experiments over the registered environments.
"""
import asyncio
import json
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..config.logging_config import logger
from ..config.settings import settings
from ..decomp.value_store import ValueStore
from ..envs.registry import make_environment
from ..execution.parallel_executor import ParallelExecutor
from ..execution.trajectory import EpisodeStats
from ..learning.config import LearnerConfig
from ..learning.flat import FlatQLearner
from ..learning.maxq import MaxqLearner
from ..taskgraph.storage import StorageCount, StorageItem, flat_storage_count, storage_count
from ..utils.errors import ConfigError
from .curves import moving_average, steps_to_level
from .report import emit_report

Configuration = Literal["flat", "sarsa", "maxq-noabs", "maxq-abs", "maxq-abs-greedy"]
CONFIGURATIONS = ("flat", "sarsa", "maxq-noabs", "maxq-abs", "maxq-abs-greedy")
FLAT_CONFIGURATIONS = ("flat", "sarsa")

CURVE_COLUMNS = ["primitive_step", "trial", "seed", "cumulative_reward", "episode_return", "episode"]

# Learner parameters per environment family and configuration.
_TAXI_PRESETS: Dict[str, Dict[str, Any]] = {
    "flat": {"learning_rate": 0.25, "cooling_rate": 0.9879},
    "maxq-noabs": {
        "learning_rate": 0.5,
        "abstract": False,
        "cooling_rates": {"Root": 0.9996, "Put": 0.9996, "Get": 0.9939, "Navigate": 0.9879, "Refuel": 0.9939},
    },
    "maxq-abs": {
        "learning_rate": 0.25,
        "cooling_rates": {"Root": 0.9074, "Put": 0.9526, "Get": 0.9526, "Navigate": 0.9879, "Refuel": 0.9526},
    },
}
_HDG_PRESETS: Dict[str, Dict[str, Any]] = {
    "flat": {"learning_rate": 1.0, "cooling_rate": 0.9074},
    "maxq-noabs": {
        "learning_rate": 1.0,
        "abstract": False,
        "initial_value": -25.123,
        "cooling_rates": {"Root": 0.9074, "GotoGoalLmk": 0.9999, "GotoGoal": 0.9074, "GotoLmk": 0.9526},
    },
    "maxq-abs": {
        "learning_rate": 1.0,
        "initial_value": -20.123,
        "cooling_rates": {"Root": 0.9760, "GotoGoal": 0.9969, "GotoGoalLmk": 0.9984, "GotoLmk": 0.9969},
    },
}
_GREEDY_SCHEDULES = {"taxi": (500, 10), "hdg": (3000, 2)}


def _family(environment: str) -> str:
    return "hdg" if environment.startswith("hdg") else "taxi"


def preset_learner_config(environment: str, configuration: str) -> LearnerConfig:
    """
    Preset learner settings for a configuration on an environment family.

    Taxi variants and two-rooms share the taxi parameters; HDG variants use
    the HDG ones. The greedy configuration adds the decreasing interruption
    schedule to the abstracted settings.
    """
    if configuration not in CONFIGURATIONS:
        raise ConfigError(f"Unknown configuration '{configuration}'")
    family = _family(environment)
    presets = _HDG_PRESETS if family == "hdg" else _TAXI_PRESETS
    if configuration in FLAT_CONFIGURATIONS:
        values = dict(presets["flat"], algorithm="q" if configuration == "flat" else "sarsa")
    elif configuration == "maxq-abs-greedy":
        start, decrement = _GREEDY_SCHEDULES[family]
        values = dict(presets["maxq-abs"], algorithm="maxqq", interrupt_after=start, interrupt_decrement=decrement)
    else:
        values = dict(presets[configuration], algorithm="maxqq")
    return LearnerConfig(**values)


class ExperimentConfig(BaseModel):
    """A seeded multi-trial training run of one configuration."""
    name: Optional[str] = None
    environment: str = "taxi"
    overrides: Dict[str, Any] = Field(default_factory=dict)
    configuration: Configuration = "maxq-abs"
    learner: Optional[LearnerConfig] = None
    learner_overrides: Dict[str, Any] = Field(default_factory=dict)
    trials: int = Field(default_factory=lambda: settings.harness.default_trials)
    seeds: List[int] = Field(default_factory=list)
    episodes: int = 500
    max_steps: Optional[int] = None
    window: int = 100
    output_dir: Optional[Path] = None
    reports: List[Literal["curves", "accounting", "plot", "store"]] = Field(
        default_factory=lambda: ["curves", "accounting"]
    )

    @model_validator(mode="after")
    def check_budgets(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not self.seeds:
            self.seeds = list(range(self.trials))
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        self.trials = len(self.seeds)
        return self

    @property
    def label(self) -> str:
        return self.name or f"{self.environment}-{self.configuration}"

    @property
    def is_flat(self) -> bool:
        return self.configuration in FLAT_CONFIGURATIONS

    def resolved_learner(self) -> LearnerConfig:
        base = self.learner or preset_learner_config(self.environment, self.configuration)
        if not self.learner_overrides:
            return base
        try:
            return LearnerConfig(**{**base.model_dump(), **self.learner_overrides})
        except ValidationError as e:
            raise ConfigError(f"Invalid learner overrides: {str(e)}")

    @classmethod
    def from_file(cls, path: Union[str, Path], **updates: Any) -> "ExperimentConfig":
        """Load a JSON experiment file; keyword updates win over file values."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read experiment file {path}: {str(e)}")
        data.update({k: v for k, v in updates.items() if v is not None})
        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid experiment file {path}: {str(e)}")


@dataclass
class TrialResult:
    """Per-episode statistics of one seeded training run."""
    trial: int
    seed: int
    episodes: List[EpisodeStats]
    store: Optional[ValueStore] = None
    q: Optional[np.ndarray] = None

    @property
    def capped(self) -> int:
        return sum(1 for e in self.episodes if e.capped)

    def to_frame(self) -> pd.DataFrame:
        steps = np.cumsum([e.steps for e in self.episodes])
        returns = np.array([e.total_reward for e in self.episodes], dtype=float)
        return pd.DataFrame(
            {
                "primitive_step": steps.astype(np.int64),
                "trial": self.trial,
                "seed": self.seed,
                "cumulative_reward": np.cumsum(returns),
                "episode_return": returns,
                "episode": np.arange(len(self.episodes), dtype=np.int64),
            },
            columns=CURVE_COLUMNS,
        )


@dataclass
class ExperimentBundle:
    """Everything one experiment produced."""
    config: ExperimentConfig
    trials: List[TrialResult]
    accounting: StorageCount
    files: Dict[str, Path] = field(default_factory=dict)

    @property
    def capped_episodes(self) -> int:
        return sum(t.capped for t in self.trials)

    def curves(self) -> pd.DataFrame:
        frames = [t.to_frame() for t in sorted(self.trials, key=lambda t: t.seed)]
        if not frames:
            return pd.DataFrame(columns=CURVE_COLUMNS)
        return pd.concat(frames, ignore_index=True)

    def mean_curve(self, window: Optional[int] = None) -> pd.DataFrame:
        """Per-episode return averaged over trials, with its moving average."""
        curves = self.curves()
        grouped = curves.groupby("episode").agg(
            primitive_step=("primitive_step", "mean"),
            mean_return=("episode_return", "mean"),
        )
        grouped = grouped.reset_index()
        grouped["smoothed_return"] = moving_average(grouped["mean_return"].to_numpy(), window or self.config.window)
        return grouped

    def steps_to_level(self, level: float, window: Optional[int] = None) -> List[Optional[int]]:
        """Per trial, in seed order, the primitive steps needed for the trailing mean return to reach `level`."""
        window = window or self.config.window
        result = []
        for trial in sorted(self.trials, key=lambda t: t.seed):
            frame = trial.to_frame()
            result.append(steps_to_level(frame["primitive_step"], frame["episode_return"], level, window))
        return result


def run_trial(config: ExperimentConfig, trial: int, seed: int) -> TrialResult:
    """Train one learner from scratch with its own environment and random stream."""
    env = make_environment(config.environment, config.overrides)
    rng = np.random.default_rng(seed)
    learner_config = config.resolved_learner()
    if config.is_flat:
        learner: Union[FlatQLearner, MaxqLearner] = FlatQLearner(env.model, learner_config, rng)
    else:
        learner = MaxqLearner(env.graph, env.model, learner_config, rng)

    episodes: List[EpisodeStats] = []
    steps = 0
    for _ in range(config.episodes):
        stats = learner.run_episode()
        episodes.append(stats)
        steps += stats.steps
        if config.max_steps is not None and steps >= config.max_steps:
            break
    logger.debug(f"{config.label} trial {trial} (seed {seed}): {len(episodes)} episodes, {steps} steps")
    if config.is_flat:
        return TrialResult(trial, seed, episodes, q=learner.q)
    return TrialResult(trial, seed, episodes, store=learner.store)


def accounting_for(config: ExperimentConfig) -> StorageCount:
    """Table entries the configuration's learner needs."""
    env = make_environment(config.environment, config.overrides)
    if config.is_flat:
        entries = flat_storage_count(env.model)
        return StorageCount(
            graph=env.model.name,
            abstract=False,
            items=[StorageItem(table="Q", node="flat", entries=entries)],
        )
    return storage_count(env.graph, abstract=config.resolved_learner().abstract)


async def run_experiment_async(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentBundle:
    """Run every seed concurrently; results are ordered by seed."""
    seeds = sorted(config.seeds)
    logger.info(f"Running {config.label}: {len(seeds)} trials of {config.episodes} episodes")
    tasks = [partial(run_trial, config, i, seed) for i, seed in enumerate(seeds)]
    trials = await ParallelExecutor(workers).execute(tasks)
    bundle = ExperimentBundle(config=config, trials=trials, accounting=accounting_for(config))
    if bundle.capped_episodes:
        logger.warning(f"{config.label}: {bundle.capped_episodes} episodes hit the step cap")
    if config.output_dir is not None:
        emit_report(bundle)
    return bundle


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentBundle:
    """Blocking wrapper around `run_experiment_async`."""
    return asyncio.run(run_experiment_async(config, workers))


def run_comparison(
    base: ExperimentConfig,
    configurations: Sequence[str] = ("flat", "maxq-noabs", "maxq-abs", "maxq-abs-greedy"),
    workers: Optional[int] = None,
) -> Dict[str, ExperimentBundle]:
    """Run the same environment and seeds under several configurations."""
    bundles: Dict[str, ExperimentBundle] = {}
    for configuration in configurations:
        config = base.model_copy(update={"configuration": configuration, "name": None, "learner": None})
        bundles[configuration] = run_experiment(config, workers)
    return bundles
