"""
Hierarchically greedy execution with an interruption budget.
"""
from typing import Optional

import numpy as np

from ..decomp.evaluator import GreedyPolicy, evaluate_max_node
from ..decomp.value_store import ValueStore
from ..mdp.dynamic_programming import NO_ACTION
from ..mdp.model import TabularModel
from ..mdp.state import FactoredState
from ..taskgraph.subtask import MaxqGraph
from ..utils.errors import ConfigError, GraphDefinitionError
from .executor import Executor
from .hierarchical_executor import descend
from .stack import ExecutionStack
from .trajectory import Trajectory


def greedy_descent(stack: ExecutionStack, store: ValueStore, state: FactoredState, tie_tolerance=None) -> None:
    """Replace the stack with the best root-to-leaf path at `state`."""
    graph = stack.graph
    evaluation = evaluate_max_node(store, graph, graph.root_frame, state, tie_tolerance)
    if evaluation.action is None:
        raise GraphDefinitionError(f"No executable path below the root at state {state.index}")
    stack.clear()
    for frame, _ in evaluation.path:
        stack.push(frame)
    frame, edge = evaluation.path[-1]
    stack.push(graph.child_frame(frame, edge, state))


def run_hg_episode(
    graph: MaxqGraph,
    model: TabularModel,
    store: ValueStore,
    rng: np.random.Generator,
    interrupt_after: Optional[int] = 1,
    start: Optional[int] = None,
    step_cap: Optional[int] = None,
    strict: bool = False,
) -> Trajectory:
    """
    Execute one episode greedily with respect to the decomposed values.

    Control returns to the root for a fresh greedy descent whenever
    `interrupt_after` primitive actions have run since the last descent. With
    a budget of 1 every action is the primitive at the end of the best path
    below the root. None never interrupts and runs the root exactly as
    hierarchical execution does under the greedy policy on C̃.

    Args:
        graph: The task graph.
        model: Environment model.
        store: Learned or solved value tables.
        rng: Random stream.
        interrupt_after: Interruption budget L (None for no interruption).
        start: Initial state; sampled when omitted.
        step_cap: Primitive action limit.
        strict: Raise StepCapExceeded at the cap instead of returning.

    Returns:
        Trajectory: The executed episode.
    """
    if interrupt_after is not None and interrupt_after < 1:
        raise ConfigError(f"Interruption budget must be at least 1, got {interrupt_after}")
    policy = GreedyPolicy(store, graph)
    runner = Executor(model, rng, start=start, step_cap=step_cap, strict=strict)
    stack = ExecutionStack(graph)
    since_descent = 0
    while not runner.done:
        state = graph.space.decode(runner.state)
        if not stack:
            if graph.terminated(graph.root_frame, state):
                break
            if interrupt_after is None:
                stack.push(graph.root_frame)
                descend(stack, policy, state)
            else:
                greedy_descent(stack, store, state)
            since_descent = 0
        elif interrupt_after is not None and since_descent >= interrupt_after:
            greedy_descent(stack, store, state)
            since_descent = 0
        else:
            descend(stack, policy, state)
        leaf = stack.pop()
        runner.step(graph.nodes[leaf.node].action)
        since_descent += 1
        stack.pop_terminated(graph.space.decode(runner.state))
    return runner.finish()


def greedy_action_policy(
    graph: MaxqGraph, model: TabularModel, store: ValueStore, tie_tolerance=None
) -> np.ndarray:
    """
    Execution with an interruption budget of 1 as a stationary flat policy.

    Each state maps to the primitive at the end of the best path below the
    root, so the policy can be evaluated exactly with `policy_evaluation`.
    Terminal states get NO_ACTION.
    """
    policy = np.full(model.n_states, NO_ACTION, dtype=int)
    for state in graph.space:
        if model.is_terminal(state.index):
            continue
        evaluation = evaluate_max_node(store, graph, graph.root_frame, state, tie_tolerance)
        if evaluation.action is None:
            raise GraphDefinitionError(f"No executable path below the root at state {state.index}")
        policy[state.index] = evaluation.action
    return policy
