"""
Learner configuration.
"""
from typing import Dict, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from ..config.settings import settings


class LearnerConfig(BaseModel):
    """Hyperparameters shared by the flat and hierarchical learners."""
    algorithm: Literal["maxq0", "maxqq", "q", "sarsa"] = "maxqq"
    learning_rate: float = 0.25
    learning_rate_schedule: Literal["constant", "visits"] = "constant"
    initial_value: float = Field(default_factory=lambda: settings.learning.initial_value)
    initial_values: Dict[str, float] = Field(default_factory=dict)
    exploration: Literal["boltzmann", "epsilon", "counter"] = "boltzmann"
    initial_temperature: float = 50.0
    cooling_rate: float = 0.9879
    cooling_rates: Dict[str, float] = Field(default_factory=dict)
    temperature_floor: float = Field(default_factory=lambda: settings.learning.temperature_floor)
    epsilon: float = 0.1
    epsilon_decay: float = 1.0
    counter_threshold: int = 10
    all_states_updating: bool = True
    use_reward_split: bool = True
    adaptive_pseudo_reward: bool = False
    pseudo_reward_rate: float = 0.1
    abstract: bool = True
    step_cap: int = Field(default_factory=lambda: settings.learning.step_cap)
    interrupt_after: Optional[int] = None
    interrupt_decrement: int = 0
    interrupt_floor: int = 1

    @field_validator("learning_rate")
    @classmethod
    def check_learning_rate(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        return value

    @field_validator("cooling_rate", "epsilon_decay")
    @classmethod
    def check_rate(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("decay rates must lie in (0, 1]")
        return value

    @field_validator("interrupt_after", "interrupt_floor")
    @classmethod
    def check_budget(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("interruption budgets must be at least 1")
        return value

    @field_validator("initial_temperature", "temperature_floor")
    @classmethod
    def check_positive(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError("temperatures must be positive")
        return value

    @field_validator("epsilon")
    @classmethod
    def check_non_negative(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("must be non-negative")
        return value

    @model_validator(mode="after")
    def check_temperature_schedule(self) -> "LearnerConfig":
        if self.initial_temperature < self.temperature_floor:
            raise ValueError(
                f"initial_temperature {self.initial_temperature} is below the floor {self.temperature_floor}"
            )
        return self

    def cooling_for(self, node: str) -> float:
        return self.cooling_rates.get(node, self.cooling_rate)

    def interruption_budget(self, episode: int) -> Optional[int]:
        """Budget L for the given episode index under the decreasing schedule."""
        if self.interrupt_after is None:
            return None
        return max(self.interrupt_floor, self.interrupt_after - self.interrupt_decrement * episode)
