"""
Primitive stepping shared by the episode executors.
"""
from typing import Optional

import numpy as np

from ..config.logging_config import logger
from ..config.settings import settings
from ..mdp.model import Outcome, TabularModel, sample_start, sample_transition
from ..utils.errors import StepCapExceeded
from .trajectory import Trajectory


class Executor:
    """
    Drives a model one primitive action at a time and records the trajectory.

    Args:
        model: Environment model.
        rng: Random stream for the start state and transitions.
        start: Initial state; sampled from the start distribution when None.
        step_cap: Maximum primitive actions before the episode is aborted.
        strict: Raise StepCapExceeded instead of marking the trajectory capped.
    """

    def __init__(
        self,
        model: TabularModel,
        rng: np.random.Generator,
        start: Optional[int] = None,
        step_cap: Optional[int] = None,
        strict: bool = False,
    ):
        self.model = model
        self.rng = rng
        self.step_cap = settings.learning.step_cap if step_cap is None else step_cap
        self.strict = strict
        self.state = sample_start(model, rng) if start is None else start
        self.trajectory = Trajectory()

    @property
    def done(self) -> bool:
        return self.trajectory.terminated or self.trajectory.capped

    def step(self, action: int) -> Outcome:
        outcome = sample_transition(self.model, self.state, action, self.rng)
        self.trajectory.record(self.state, action, outcome.reward)
        self.state = outcome.next_state
        if self.model.is_terminal(self.state):
            self.trajectory.terminated = True
            self.trajectory.states.append(self.state)
        elif len(self.trajectory) >= self.step_cap:
            if self.strict:
                raise StepCapExceeded(len(self.trajectory))
            logger.warning(f"Execution on {self.model.name} aborted after {self.step_cap} steps")
            self.trajectory.capped = True
        return outcome

    def finish(self) -> Trajectory:
        if self.model.is_terminal(self.state) and not self.trajectory.terminated:
            self.trajectory.terminated = True
            self.trajectory.states.append(self.state)
        return self.trajectory
