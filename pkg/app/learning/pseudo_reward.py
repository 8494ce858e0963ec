"""
Online adaptation of a child's pseudo-reward toward the parent's projected
value at the child's exit state.
"""
from ..decomp.evaluator import v_of
from ..decomp.value_store import ValueStore
from ..mdp.state import FactoredState
from ..taskgraph.subtask import Frame, MaxqGraph
from ..utils.errors import PseudoRewardError


def parent_exit_value(store: ValueStore, graph: MaxqGraph, parent: Frame, state: FactoredState) -> float:
    """max over executable children of C̃(parent, s, j) + V(j, s); 0 when the parent is done."""
    if graph.terminated(parent, state):
        return 0.0
    values = [
        v_of(store, graph, child, state) + store.read_c(parent, i, state, tilde=True)
        for i, child in graph.executable_edges(parent, state)
    ]
    return max(values) if values else 0.0


def adapt_pseudo_reward(
    graph: MaxqGraph,
    store: ValueStore,
    child: Frame,
    parent: Frame,
    state: FactoredState,
    alpha: float,
) -> float:
    """
    Move R̃(child, state) toward the parent's projected value at `state`.

    Args:
        graph: The task graph.
        store: Value tables holding the learned pseudo-rewards.
        child: The invocation that just terminated.
        parent: Its calling invocation.
        state: Exit state of the child.
        alpha: Step size.

    Returns:
        float: The updated pseudo-reward.
    """
    if child.node == graph.root:
        raise PseudoRewardError("The root has no parent to take a pseudo-reward from")
    if graph.nodes[child.node].is_primitive:
        raise PseudoRewardError(f"{child.node} is primitive and has no pseudo-reward")
    if not graph.terminated(child, state):
        raise PseudoRewardError(f"{child.node} is not terminated at state {state.index}")
    target = parent_exit_value(store, graph, parent, state)
    updated = (1.0 - alpha) * store.read_pseudo(child, state) + alpha * target
    store.write_pseudo(child, state, updated)
    return updated
