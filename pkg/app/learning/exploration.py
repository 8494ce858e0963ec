"""
Exploration policies for the learners: Boltzmann with per-node cooling,
epsilon-greedy and counter-based.
"""
from typing import Dict, Hashable, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import settings
from .config import LearnerConfig


def ordered_argmax(values: Sequence[float], tie_tolerance: Optional[float] = None) -> int:
    """Position of the first value within tie_tolerance of the maximum."""
    tie_tolerance = settings.oracle.tie_tolerance if tie_tolerance is None else tie_tolerance
    best = max(values)
    for position, value in enumerate(values):
        if value >= best - tie_tolerance:
            return position
    return 0


class ExplorationState:
    """
    Per-node exploration parameters.

    Each node owns a temperature (or epsilon) that is reduced every time the
    node terminates in one of its goal states. Counter-based exploration keeps
    a visit count per (node, key, candidate).
    """

    def __init__(self, config: LearnerConfig, nodes: Iterable[str]):
        self.config = config
        self.temperatures: Dict[str, float] = {n: config.initial_temperature for n in nodes}
        self.epsilons: Dict[str, float] = {n: config.epsilon for n in self.temperatures}
        self.counts: Dict[Tuple[str, Hashable, int], int] = {}

    def temperature(self, node: str) -> float:
        return self.temperatures.setdefault(node, self.config.initial_temperature)

    def epsilon(self, node: str) -> float:
        return self.epsilons.setdefault(node, self.config.epsilon)

    def on_goal(self, node: str) -> None:
        """Cool the node after it terminated in a goal state."""
        cooled = self.temperature(node) * self.config.cooling_for(node)
        self.temperatures[node] = max(self.config.temperature_floor, cooled)
        self.epsilons[node] = self.epsilon(node) * self.config.epsilon_decay

    def choose(
        self,
        node: str,
        key: Hashable,
        candidates: Sequence[int],
        values: Sequence[float],
        rng: np.random.Generator,
    ) -> int:
        """
        Pick one of `candidates` given their estimated values.

        Args:
            node: Node making the choice; selects its temperature or epsilon.
            key: Abstract state key, used by counter-based exploration.
            candidates: Candidate identifiers in tie-breaking order.
            values: Estimated value of each candidate.
            rng: Random stream.

        Returns:
            int: The chosen candidate.
        """
        if not candidates:
            raise ValueError(f"No candidates for {node} to choose from")
        if len(candidates) == 1:
            choice = candidates[0]
        elif self.config.exploration == "boltzmann":
            choice = candidates[self._boltzmann(node, values, rng)]
        elif self.config.exploration == "epsilon":
            if rng.random() < self.epsilon(node):
                choice = candidates[int(rng.integers(len(candidates)))]
            else:
                choice = candidates[ordered_argmax(values)]
        else:
            choice = self._least_tried(node, key, candidates, values)
        if self.config.exploration == "counter":
            count_key = (node, key, choice)
            self.counts[count_key] = self.counts.get(count_key, 0) + 1
        return choice

    def _boltzmann(self, node: str, values: Sequence[float], rng: np.random.Generator) -> int:
        temperature = self.temperature(node)
        q = np.asarray(values, dtype=float)
        weights = np.exp((q - q.max()) / temperature)
        return int(rng.choice(len(q), p=weights / weights.sum()))

    def _least_tried(self, node: str, key: Hashable, candidates: Sequence[int], values: Sequence[float]) -> int:
        counts = [self.counts.get((node, key, c), 0) for c in candidates]
        fewest = min(counts)
        if fewest < self.config.counter_threshold:
            return candidates[counts.index(fewest)]
        return candidates[ordered_argmax(values)]
