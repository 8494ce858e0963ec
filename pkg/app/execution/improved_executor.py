"""
One-step improved execution on a known model.
"""
from typing import Optional

import numpy as np

from ..decomp.evaluator import v_of
from ..decomp.value_store import ValueStore
from ..mdp.dynamic_programming import one_step_improved_policy
from ..mdp.model import ActionOrder, TabularModel
from ..taskgraph.subtask import MaxqGraph
from .executor import Executor
from .trajectory import Trajectory


def root_values(store: ValueStore, graph: MaxqGraph) -> np.ndarray:
    """Projected root value V(root, s) for every state; 0 at terminals."""
    return np.array([v_of(store, graph, graph.root_frame, s) for s in graph.space], dtype=float)


def run_improved_episode(
    model: TabularModel,
    values: np.ndarray,
    rng: np.random.Generator,
    order: Optional[ActionOrder] = None,
    start: Optional[int] = None,
    step_cap: Optional[int] = None,
    strict: bool = False,
) -> Trajectory:
    """Act greedily on a one-step lookahead over `values`."""
    policy = one_step_improved_policy(model, values, order)
    runner = Executor(model, rng, start=start, step_cap=step_cap, strict=strict)
    while not runner.done:
        runner.step(int(policy[runner.state]))
    return runner.finish()
