import numpy as np
import pytest

from app.decomp.evaluator import FixedPolicy, GreedyPolicy, decompose_path, evaluate_max_node, v_of
from app.decomp.oracle import evaluate_hierarchical_policy, solve_recursively_optimal
from app.envs.registry import make_environment
from app.envs.two_rooms import exit_state
from app.execution.improved_executor import root_values
from app.mdp.dynamic_programming import ordered_greedy_policy, q_from_values, value_iteration
from app.taskgraph.analysis import analysis_for
from app.taskgraph.subtask import Frame


def _nonterminal(env):
    return [s for s in range(env.model.n_states) if not env.model.is_terminal(s)]


def _run_exit(env, store, state):
    """Follow the greedy Exit policy on the deterministic two-room model."""
    graph, model = env.graph, env.model
    policy = GreedyPolicy(store, graph)
    exit_frame = Frame("Exit")
    s = model.space.decode(state)
    while not graph.terminated(exit_frame, s):
        edge = policy.choose(exit_frame, s)
        action = graph.nodes[graph.child_frame(exit_frame, edge, s).node].action
        (outcome,) = model.outcomes_for(s.index, action)
        s = model.space.decode(outcome.next_state)
    return s.index


def test_recursively_optimal_taxi_matches_optimal_values(taxi, taxi_store):
    optimal = value_iteration(taxi.model)
    root = taxi.graph.root_frame
    for s in _nonterminal(taxi):
        assert v_of(taxi_store, taxi.graph, root, s) == pytest.approx(optimal[s], abs=1e-6)


def test_abstract_store_agrees_with_full_store(taxi, taxi_store):
    abstract = solve_recursively_optimal(taxi.graph, taxi.model, abstract=True)
    assert abstract.abstract
    root = taxi.graph.root_frame
    for s in _nonterminal(taxi)[::7]:
        assert v_of(abstract, taxi.graph, root, s) == pytest.approx(v_of(taxi_store, taxi.graph, root, s), abs=1e-6)


def test_exit_takes_nearest_door_without_pseudo_rewards(two_rooms):
    store = solve_recursively_optimal(two_rooms.graph, two_rooms.model)
    for row in (0, 1, 3, 4):
        door = 0 if row < 2 else 1
        for col in range(3):
            reached = _run_exit(two_rooms, store, two_rooms.state(row=row, col=col))
            assert reached == exit_state(two_rooms, door)


def test_recursive_optimality_can_lose_to_the_flat_optimum(two_rooms):
    store = solve_recursively_optimal(two_rooms.graph, two_rooms.model)
    optimal = value_iteration(two_rooms.model)
    s = two_rooms.state(row=3, col=0)
    assert v_of(store, two_rooms.graph, two_rooms.graph.root_frame, s) == pytest.approx(-10.0)
    assert optimal[s] == pytest.approx(-8.0)


def test_exit_pseudo_rewards_recover_the_optimal_policy(two_rooms_shaped):
    env = two_rooms_shaped
    store = solve_recursively_optimal(env.graph, env.model)
    optimal = value_iteration(env.model)
    flat = ordered_greedy_policy(q_from_values(env.model, optimal), terminal_mask=env.model.terminal_mask)
    policy = GreedyPolicy(store, env.graph)
    for s in _nonterminal(env):
        leaf = decompose_path(store, env.graph, s, policy).frames[0]
        assert env.graph.nodes[leaf.node].action == flat[s]
    assert _run_exit(env, store, env.state(row=3, col=0)) == exit_state(env, 0)


def test_evaluating_the_frozen_greedy_policy_reproduces_its_values(two_rooms):
    graph, model = two_rooms.graph, two_rooms.model
    store = solve_recursively_optimal(graph, model)
    analysis = analysis_for(graph)
    frames = [f for name in graph.composite_nodes() for f in analysis.frames(name)]
    frozen = FixedPolicy.freeze(GreedyPolicy(store, graph), graph, frames)
    evaluated = evaluate_hierarchical_policy(graph, model, frozen)
    values = np.array([v_of(evaluated, graph, graph.root_frame, s) for s in _nonterminal(two_rooms)])
    expected = np.array([v_of(store, graph, graph.root_frame, s) for s in _nonterminal(two_rooms)])
    np.testing.assert_allclose(values, expected, atol=1e-6)


@pytest.mark.slow
def test_max_node_value_bounds_the_frozen_policy_on_fickle_taxi(fickle_taxi):
    graph, model = fickle_taxi.graph, fickle_taxi.model
    store = solve_recursively_optimal(graph, model)
    analysis = analysis_for(graph)
    frames = [f for name in graph.composite_nodes() for f in analysis.frames(name)]
    frozen = FixedPolicy.freeze(GreedyPolicy(store, graph), graph, frames)
    evaluated = evaluate_hierarchical_policy(graph, model, frozen)
    for s in _nonterminal(fickle_taxi):
        policy_value = decompose_path(evaluated, graph, s, frozen).total
        assert evaluate_max_node(evaluated, graph, graph.root_frame, s).value >= policy_value - 1e-9


@pytest.mark.slow
def test_landmark_routes_never_beat_the_flat_optimum():
    env = make_environment("hdg-safe")
    store = solve_recursively_optimal(env.graph, env.model)
    hierarchical = root_values(store, env.graph)
    optimal = value_iteration(env.model)
    states = _nonterminal(env)
    assert np.all(hierarchical[states] <= optimal[states] + 1e-9)
    # Detouring through the goal's landmark costs extra somewhere
    assert np.any(hierarchical[states] < optimal[states] - 1e-6)
