"""
Paired-seed rollouts for comparing execution strategies.
"""
from typing import Callable, Iterable

import numpy as np

from .trajectory import Trajectory

EpisodeFn = Callable[[np.random.Generator], Trajectory]


def rollout_values(run: EpisodeFn, seeds: Iterable[int], gamma: float = 1.0) -> np.ndarray:
    """
    Discounted return of one episode per seed.

    Two strategies evaluated with the same seeds see the same start states
    whenever the start state is the first draw of the stream.
    """
    return np.array([run(np.random.default_rng(seed)).discounted_return(gamma) for seed in seeds])


def mean_return(run: EpisodeFn, seeds: Iterable[int], gamma: float = 1.0) -> float:
    return float(rollout_values(run, seeds, gamma).mean())
