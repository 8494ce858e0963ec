"""
Records produced by executing or learning over episodes.
"""
from dataclasses import dataclass, field
from typing import List


@dataclass
class Trajectory:
    """States, actions and rewards of one executed episode."""
    states: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    terminated: bool = False
    capped: bool = False

    def record(self, state: int, action: int, reward: float) -> None:
        self.states.append(state)
        self.actions.append(action)
        self.rewards.append(reward)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    def discounted_return(self, gamma: float) -> float:
        total = 0.0
        for reward in reversed(self.rewards):
            total = reward + gamma * total
        return total

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class EpisodeStats:
    """Summary of one learning episode."""
    steps: int
    total_reward: float
    terminated: bool
    capped: bool = False
