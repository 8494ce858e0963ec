"""
Environment bundle returned by the domain builders.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

from pydantic import BaseModel

from ..mdp.model import Outcome, TabularModel
from ..taskgraph.subtask import MaxqGraph


@dataclass
class Environment:
    """A tabular model together with its task graph and the description it was loaded from."""
    name: str
    model: TabularModel
    graph: MaxqGraph
    config: BaseModel
    description: Dict[str, Any] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)

    def state(self, **values: int) -> int:
        """Flat index of a factored state given by variable name."""
        return self.model.space.encode_named(**values)


def absorbing_row(state: int, n_actions: int) -> List[Tuple[Outcome, ...]]:
    """Outcome row of an absorbing zero-reward state."""
    return [(Outcome(state, 1.0, 0.0),) for _ in range(n_actions)]
