"""
Flat Q-learning and SARSA(0) baselines over the primitive actions.
"""
from typing import Optional

import numpy as np

from ..config.logging_config import logger
from ..execution.trajectory import EpisodeStats
from ..mdp.model import TabularModel, sample_start, sample_transition
from .config import LearnerConfig
from .exploration import ExplorationState

FLAT_NODE = "flat"


def flat_q_update(
    q: np.ndarray,
    state: int,
    action: int,
    reward: float,
    next_state: int,
    alpha: float,
    gamma: float,
    terminal: bool = False,
) -> float:
    """One Q-learning backup. Returns the new Q(state, action)."""
    future = 0.0 if terminal else float(q[next_state].max())
    q[state, action] = (1.0 - alpha) * q[state, action] + alpha * (reward + gamma * future)
    return float(q[state, action])


def sarsa0_update(
    q: np.ndarray,
    state: int,
    action: int,
    reward: float,
    next_state: int,
    next_action: Optional[int],
    alpha: float,
    gamma: float,
    terminal: bool = False,
) -> float:
    """One SARSA(0) backup. Returns the new Q(state, action)."""
    future = 0.0 if terminal or next_action is None else float(q[next_state, next_action])
    q[state, action] = (1.0 - alpha) * q[state, action] + alpha * (reward + gamma * future)
    return float(q[state, action])


class FlatQLearner:
    """
    Tabular learner over the primitive actions of a model.

    Exploration uses a single temperature that cools whenever an episode ends
    in a terminal state.
    """

    def __init__(self, model: TabularModel, config: LearnerConfig, rng: np.random.Generator):
        self.model = model
        self.config = config
        self.rng = rng
        self.sarsa = config.algorithm == "sarsa"
        self.q = np.full((model.n_states, model.n_actions), config.initial_value, dtype=float)
        self.q[model.terminal_mask] = 0.0
        self.visits = np.zeros_like(self.q, dtype=np.int64)
        self.exploration = ExplorationState(config, [FLAT_NODE])
        self.actions = list(range(model.n_actions))
        self.total_steps = 0

    def _alpha(self, state: int, action: int) -> float:
        self.visits[state, action] += 1
        if self.config.learning_rate_schedule == "visits":
            return 1.0 / self.visits[state, action]
        return self.config.learning_rate

    def act(self, state: int) -> int:
        return self.exploration.choose(FLAT_NODE, state, self.actions, self.q[state], self.rng)

    def greedy_policy(self) -> np.ndarray:
        return self.q.argmax(axis=1)

    def run_episode(self) -> EpisodeStats:
        model = self.model
        state = sample_start(model, self.rng)
        action = self.act(state)
        steps, total = 0, 0.0
        while not model.is_terminal(state):
            if steps >= self.config.step_cap:
                logger.warning(f"Flat episode on {model.name} hit the step cap of {self.config.step_cap}")
                return EpisodeStats(steps, total, terminated=False, capped=True)
            outcome = sample_transition(model, state, action, self.rng)
            nxt = outcome.next_state
            terminal = model.is_terminal(nxt)
            alpha = self._alpha(state, action)
            if self.sarsa:
                next_action = None if terminal else self.act(nxt)
                sarsa0_update(self.q, state, action, outcome.reward, nxt, next_action, alpha, model.gamma, terminal)
            else:
                flat_q_update(self.q, state, action, outcome.reward, nxt, alpha, model.gamma, terminal)
                next_action = None if terminal else self.act(nxt)
            steps += 1
            self.total_steps += 1
            total += outcome.reward
            state, action = nxt, next_action
        self.exploration.on_goal(FLAT_NODE)
        return EpisodeStats(steps, total, terminated=True)
