"""
Hierarchical execution: the stack interpreter that runs a hierarchical policy
one primitive action at a time.
"""
from typing import Optional, Union

import numpy as np

from ..decomp.evaluator import GreedyPolicy, HierarchicalPolicy
from ..decomp.value_store import ValueStore
from ..mdp.model import TabularModel
from ..mdp.state import FactoredState
from ..taskgraph.subtask import MaxqGraph
from ..utils.errors import GraphDefinitionError
from .executor import Executor
from .stack import ExecutionStack
from .trajectory import Trajectory


def descend(stack: ExecutionStack, policy: HierarchicalPolicy, state: FactoredState) -> None:
    """Push children chosen by `policy` until a primitive is on top."""
    graph = stack.graph
    while not graph.nodes[stack.top.node].is_primitive:
        frame = stack.top
        edge = policy.choose(frame, state)
        if edge is None:
            raise GraphDefinitionError(f"Policy has no child for {frame.node} at state {state.index}")
        stack.push(graph.child_frame(frame, edge, state))


def run_hierarchical_episode(
    graph: MaxqGraph,
    model: TabularModel,
    policy: Union[HierarchicalPolicy, ValueStore],
    rng: np.random.Generator,
    start: Optional[int] = None,
    step_cap: Optional[int] = None,
    strict: bool = False,
) -> Trajectory:
    """
    Execute one episode under a hierarchical policy.

    After every primitive the outermost terminated frame is popped together
    with everything it called, and execution resumes from the new top.

    Args:
        graph: The task graph.
        model: Environment model.
        policy: Child selection, or a ValueStore to act greedily on its C̃.
        rng: Random stream.
        start: Initial state; sampled when omitted.
        step_cap: Primitive action limit.
        strict: Raise StepCapExceeded at the cap instead of returning.

    Returns:
        Trajectory: The executed episode.
    """
    if isinstance(policy, ValueStore):
        policy = GreedyPolicy(policy, graph)
    runner = Executor(model, rng, start=start, step_cap=step_cap, strict=strict)
    stack = ExecutionStack(graph)
    if not graph.terminated(graph.root_frame, graph.space.decode(runner.state)):
        stack.push(graph.root_frame)
    while stack and not runner.done:
        descend(stack, policy, graph.space.decode(runner.state))
        leaf = stack.pop()
        runner.step(graph.nodes[leaf.node].action)
        stack.pop_terminated(graph.space.decode(runner.state))
    return runner.finish()
