"""
Exception hierarchy for the MAXQ engine.
"""
from typing import Any, Optional


class MaxqError(Exception):
    """Base class for all engine errors."""


class ConfigError(MaxqError):
    """Invalid environment, learner or experiment configuration."""


class TerminalStateError(MaxqError):
    """A transition was requested from an absorbing terminal state."""

    def __init__(self, state: int):
        super().__init__(f"State {state} is terminal")
        self.state = state


class InvalidActionError(MaxqError):
    """Action index outside the model's action set."""

    def __init__(self, action: Any):
        super().__init__(f"Invalid action: {action}")
        self.action = action


class ConvergenceError(MaxqError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class ImproperPolicyError(MaxqError):
    """A policy fails to reach termination from some state."""


class GraphDefinitionError(MaxqError):
    """Structural problem in a task graph or its declarative description."""


class ShieldedAccessError(MaxqError):
    """Read or write of a completion entry at a state where the node cannot execute."""


class PseudoRewardError(MaxqError):
    """Invalid pseudo-reward request, e.g. adapting the root."""


class StepCapExceeded(MaxqError):
    """An episode exceeded its primitive-step cap."""

    def __init__(self, steps: int):
        super().__init__(f"Episode exceeded step cap after {steps} primitive steps")
        self.steps = steps


class ModelDefinitionError(MaxqError):
    """A tabular model violates its structural invariants."""
