import numpy as np
import pytest
from pydantic import ValidationError

from app.decomp.evaluator import v_of
from app.decomp.oracle import solve_recursively_optimal
from app.decomp.value_store import ValueStore
from app.envs.two_rooms import exit_state
from app.learning.config import LearnerConfig
from app.learning.exploration import ExplorationState, ordered_argmax
from app.learning.flat import FlatQLearner, flat_q_update, sarsa0_update
from app.learning.maxq import MaxqLearner, choose_action, maxq0_episode
from app.learning.pseudo_reward import adapt_pseudo_reward, parent_exit_value
from app.taskgraph.subtask import Frame
from app.utils.errors import ConfigError, PseudoRewardError

from .conftest import chain_model


def _greedy_config(**updates) -> LearnerConfig:
    base = dict(exploration="epsilon", epsilon=0.0, initial_value=0.123)
    base.update(updates)
    return LearnerConfig(**base)


def test_q_learning_backup():
    q = np.zeros((2, 2))
    q[1] = [2.0, 5.0]
    assert flat_q_update(q, 0, 0, -1.0, 1, alpha=0.5, gamma=1.0) == pytest.approx(2.0)
    assert flat_q_update(q, 0, 1, -1.0, 1, alpha=1.0, gamma=1.0, terminal=True) == -1.0
    before = q.copy()
    flat_q_update(q, 0, 0, 100.0, 1, alpha=0.0, gamma=1.0)
    np.testing.assert_array_equal(q, before)


def test_sarsa_backup_uses_the_next_action():
    q = np.zeros((2, 2))
    q[1] = [2.0, 5.0]
    assert sarsa0_update(q, 0, 0, -1.0, 1, 0, alpha=1.0, gamma=0.5) == pytest.approx(0.0)
    assert sarsa0_update(q, 0, 1, -1.0, 1, None, alpha=1.0, gamma=0.5) == -1.0


def test_ordered_argmax_prefers_first_of_ties():
    assert ordered_argmax([1.0, 3.0, 3.0]) == 1
    assert ordered_argmax([1.0, 2.95, 3.0], tie_tolerance=0.1) == 1


def test_zero_epsilon_is_greedy(rng):
    exploration = ExplorationState(LearnerConfig(exploration="epsilon", epsilon=0.0), ["Root"])
    picks = {exploration.choose("Root", 0, [4, 7, 9], [0.0, 2.0, 1.0], rng) for _ in range(20)}
    assert picks == {7}


def test_boltzmann_at_the_floor_is_almost_always_greedy():
    config = LearnerConfig(initial_temperature=0.1, temperature_floor=0.1)
    exploration = ExplorationState(config, ["Root"])
    rng = np.random.default_rng(11)
    draws = 20000
    picks = [exploration.choose("Root", 0, [0, 1, 2], [3.0, 4.0, 2.0], rng) for _ in range(draws)]
    assert picks.count(1) >= 0.99 * draws


def test_boltzmann_with_equal_values_is_uniform(rng):
    exploration = ExplorationState(LearnerConfig(initial_temperature=1.0), ["Root"])
    picks = [exploration.choose("Root", 0, [0, 1, 2], [1.0, 1.0, 1.0], rng) for _ in range(3000)]
    counts = np.bincount(picks, minlength=3)
    assert np.all(np.abs(counts - 1000) < 150)


def test_cooling_respects_floor_and_per_node_rates():
    config = LearnerConfig(initial_temperature=1.0, cooling_rates={"Get": 0.5}, cooling_rate=0.9, temperature_floor=0.3)
    exploration = ExplorationState(config, ["Get", "Put"])
    exploration.on_goal("Get")
    exploration.on_goal("Put")
    assert exploration.temperatures == {"Get": 0.5, "Put": pytest.approx(0.9)}
    exploration.on_goal("Get")
    assert exploration.temperatures["Get"] == 0.3


def test_temperatures_never_rise():
    config = LearnerConfig(initial_temperature=2.0, cooling_rates={"Get": 0.5}, cooling_rate=0.95, temperature_floor=0.1)
    exploration = ExplorationState(config, ["Root", "Get"])
    history = {"Root": [2.0], "Get": [2.0]}
    for _ in range(200):
        for node in history:
            exploration.on_goal(node)
            history[node].append(exploration.temperature(node))
    for values in history.values():
        assert all(later <= earlier for earlier, later in zip(values, values[1:]))
        assert min(values) == pytest.approx(0.1)
        assert all(value > 0.0 for value in values)


@pytest.mark.parametrize(
    "temperatures",
    [{"initial_temperature": 0.0}, {"initial_temperature": -1.0}, {"temperature_floor": 0.0}, {"initial_temperature": 0.05, "temperature_floor": 0.1}],
)
def test_temperature_schedule_is_validated(temperatures):
    with pytest.raises(ValidationError):
        LearnerConfig(**temperatures)


def test_epsilon_greedy_decays_on_goal(rng):
    config = LearnerConfig(exploration="epsilon", epsilon=0.0, epsilon_decay=0.5)
    exploration = ExplorationState(config, ["Root"])
    assert exploration.choose("Root", 0, [0, 1], [0.0, 1.0], rng) == 1
    exploration.epsilons["Root"] = 0.8
    exploration.on_goal("Root")
    assert exploration.epsilon("Root") == pytest.approx(0.4)


def test_counter_exploration_tries_every_child_first(rng):
    config = LearnerConfig(exploration="counter", counter_threshold=2)
    exploration = ExplorationState(config, ["Root"])
    picks = [exploration.choose("Root", "k", [0, 1, 2], [0.0, 5.0, 1.0], rng) for _ in range(8)]
    assert picks == [0, 1, 2, 0, 1, 2, 1, 1]
    assert exploration.counts[("Root", "k", 1)] == 4

    with pytest.raises(ValueError):
        exploration.choose("Root", "k", [], [], rng)


def test_choices_are_keyed_by_the_abstract_image(taxi, rng):
    graph = taxi.graph
    exploration = ExplorationState(LearnerConfig(exploration="counter", counter_threshold=1), graph.composite_nodes())
    store = ValueStore(graph, abstract=True)
    nav = Frame("Navigate", (0,))
    # Same square and target, different passenger and destination
    first = graph.space.decode(taxi.state(taxi_row=2, taxi_col=2, passenger=0, destination=3))
    second = graph.space.decode(taxi.state(taxi_row=2, taxi_col=2, passenger=1, destination=0))
    edges = [choose_action(graph, store, exploration, nav, s, rng)[0] for s in (first, second, first, second)]
    assert edges == [0, 1, 2, 3]
    edge, child = choose_action(graph, store, exploration, nav, second, rng)
    assert (edge, child) == (0, Frame("North"))


def test_learner_config_validation():
    with pytest.raises(ValidationError):
        LearnerConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        LearnerConfig(interrupt_after=0)
    config = LearnerConfig(interrupt_after=10, interrupt_decrement=3, interrupt_floor=2)
    assert [config.interruption_budget(e) for e in range(5)] == [10, 7, 4, 2, 2]
    assert LearnerConfig().interruption_budget(3) is None


def test_maxq_learner_rejects_flat_algorithms(taxi, rng):
    with pytest.raises(ConfigError):
        MaxqLearner(taxi.graph, taxi.model, LearnerConfig(algorithm="q"), rng)


def test_maxq0_refuses_nonzero_pseudo_rewards(two_rooms_shaped, taxi, rng):
    with pytest.raises(PseudoRewardError):
        MaxqLearner(two_rooms_shaped.graph, two_rooms_shaped.model, LearnerConfig(algorithm="maxq0"), rng)
    with pytest.raises(PseudoRewardError):
        MaxqLearner(taxi.graph, taxi.model, LearnerConfig(algorithm="maxq0", adaptive_pseudo_reward=True), rng)


def test_maxqq_keeps_both_completion_tables_equal_without_pseudo_rewards(taxi):
    learner = MaxqLearner(taxi.graph, taxi.model, LearnerConfig(algorithm="maxqq"), np.random.default_rng(3))
    for _ in range(20):
        learner.run_episode()
    store = learner.store
    assert any(store.c.values())
    assert store.c == store.c_tilde


def test_first_episode_from_a_fixed_start(taxi):
    start = taxi.state(taxi_row=2, taxi_col=2, passenger=0, destination=3)
    learner = MaxqLearner(taxi.graph, taxi.model, LearnerConfig(), np.random.default_rng(5))
    stats = learner.run_episode(start=start)
    assert stats.terminated and not stats.capped
    # The passenger waits at R and is delivered at B
    assert stats.steps >= 13
    assert learner.total_steps == stats.steps
    assert learner.episodes == 1


def _exponent_runs(taxi, algorithm, all_states=True):
    learner = MaxqLearner(
        taxi.graph,
        taxi.model,
        LearnerConfig(algorithm=algorithm, all_states_updating=all_states),
        np.random.default_rng(2),
    )
    events = []
    learner.listeners.append(events.append)
    learner.run_episode(start=taxi.state(taxi_row=2, taxi_col=2, passenger=0, destination=3))
    return [e.exponent for e in events if e.frame == Frame("Get") and e.edge == 0]


def test_all_states_updating_discounts_by_remaining_steps(taxi):
    exponents = _exponent_runs(taxi, "maxq0")
    assert max(exponents) >= 4
    for previous, current in zip(exponents, exponents[1:]):
        assert previous == 1 or current == previous - 1
    assert exponents[-1] == 1

    reversed_order = _exponent_runs(taxi, "maxqq")
    for previous, current in zip(reversed_order, reversed_order[1:]):
        assert current == 1 or current == previous + 1


def test_single_state_updating_uses_the_child_start_only(taxi):
    with_all = _exponent_runs(taxi, "maxq0", all_states=True)
    start_only = _exponent_runs(taxi, "maxq0", all_states=False)
    # Both runs are identical up to the end of the first navigation
    assert start_only[0] == with_all[0] >= 4
    assert with_all[1] == with_all[0] - 1


def test_step_cap_ends_the_episode(taxi):
    config = LearnerConfig(step_cap=5)
    learner = MaxqLearner(taxi.graph, taxi.model, config, np.random.default_rng(0))
    stats = learner.run_episode(start=taxi.state(taxi_row=2, taxi_col=2, passenger=0, destination=3))
    assert stats.capped and not stats.terminated
    assert stats.steps == 5

    flat = FlatQLearner(taxi.model, LearnerConfig(algorithm="q", step_cap=1), np.random.default_rng(0))
    stats = flat.run_episode()
    assert stats.capped and stats.steps == 1


def test_interrupted_episodes_still_finish(taxi):
    learner = MaxqLearner(taxi.graph, taxi.model, LearnerConfig(), np.random.default_rng(4))
    stats = learner.run_episode(interrupt_after=1)
    assert stats.terminated


def test_running_out_of_fuel_is_charged_to_the_root(fuel_taxi):
    env = fuel_taxi
    start = env.state(taxi_row=0, taxi_col=0, passenger=1, destination=2, fuel=0)
    learner = MaxqLearner(env.graph, env.model, _greedy_config(), np.random.default_rng(0))
    stats = learner.run_episode(start=start)

    assert stats.steps == 1 and stats.terminated
    assert stats.total_reward == -21.0
    store = learner.store
    assert store.read_v("North", start) == pytest.approx(0.75 * 0.123 - 0.25)
    assert store.read_c(env.graph.root_frame, 0, start) == pytest.approx(0.75 * 0.123 - 5.0)
    assert store.c[("Get", 0)] == {}
    assert all(not store.c[("Navigate", i)] for i in range(4))


def test_without_the_split_leaves_absorb_the_penalty(fuel_taxi):
    env = fuel_taxi
    start = env.state(taxi_row=0, taxi_col=0, passenger=1, destination=2, fuel=0)
    learner = MaxqLearner(env.graph, env.model, _greedy_config(use_reward_split=False), np.random.default_rng(0))
    learner.run_episode(start=start)
    assert learner.store.read_v("North", start) == pytest.approx(0.75 * 0.123 - 0.25 * 21.0)


def test_adapted_pseudo_reward_moves_toward_parent_value(taxi, taxi_store):
    store = taxi_store.copy()
    graph = taxi.graph
    aboard = graph.space.decode(taxi.state(taxi_row=0, taxi_col=0, passenger=4, destination=3))
    updated = adapt_pseudo_reward(graph, store, Frame("Get"), graph.root_frame, aboard, alpha=0.5)
    assert updated == pytest.approx(6.0)
    assert store.read_pseudo(Frame("Get"), aboard) == pytest.approx(6.0)
    assert taxi_store.read_pseudo(Frame("Get"), aboard) == 0.0


def test_adapted_pseudo_reward_rejects_invalid_frames(taxi):
    graph = taxi.graph
    store = ValueStore(graph)
    waiting = graph.space.decode(taxi.state(taxi_row=2, taxi_col=2, passenger=0, destination=3))
    with pytest.raises(PseudoRewardError):
        adapt_pseudo_reward(graph, store, graph.root_frame, graph.root_frame, waiting, 0.1)
    with pytest.raises(PseudoRewardError):
        adapt_pseudo_reward(graph, store, Frame("North"), Frame("Navigate", (0,)), waiting, 0.1)
    with pytest.raises(PseudoRewardError):
        adapt_pseudo_reward(graph, store, Frame("Get"), graph.root_frame, waiting, 0.1)


def test_maxq0_episode_wrapper_updates_the_given_store(taxi):
    store = ValueStore(taxi.graph)
    stats = maxq0_episode(taxi.graph, taxi.model, store, LearnerConfig(), np.random.default_rng(1))
    assert stats.terminated
    assert store.entry_count() > 0
    assert store.c == store.c_tilde


@pytest.mark.slow
def test_flat_q_learning_finds_the_chain_policy():
    model = chain_model()
    learner = FlatQLearner(model, LearnerConfig(algorithm="q", learning_rate=0.5), np.random.default_rng(0))
    for _ in range(500):
        learner.run_episode()
    assert list(learner.greedy_policy()[:3]) == [0, 0, 0]
    np.testing.assert_allclose(learner.q[:3, 0], [-3.0, -2.0, -1.0], atol=0.05)


@pytest.mark.slow
def test_greedy_maxqq_converges_on_two_rooms(two_rooms):
    graph, model = two_rooms.graph, two_rooms.model
    learner = MaxqLearner(graph, model, _greedy_config(learning_rate=1.0), np.random.default_rng(0))
    for _ in range(2000):
        learner.run_episode()
    oracle = solve_recursively_optimal(graph, model)
    root = graph.root_frame
    for s in model.space:
        # Row 2 is equidistant from both doors
        if model.is_terminal(s.index) or s["row"] == 2:
            continue
        assert v_of(learner.store, graph, root, s) == pytest.approx(v_of(oracle, graph, root, s), abs=1e-6)


def _max_root_error(learned, oracle, graph, model):
    root = graph.root_frame
    errors = []
    for s in model.space:
        # Row 2 is equidistant from both doors
        if model.is_terminal(s.index) or s["row"] == 2:
            continue
        errors.append(abs(v_of(learned, graph, root, s) - v_of(oracle, graph, root, s)))
        for edge, _ in graph.executable_edges(root, s):
            errors.append(abs(learned.read_c(root, edge, s) - oracle.read_c(root, edge, s)))
    return max(errors)


@pytest.mark.slow
def test_maxq0_converges_on_two_rooms(two_rooms):
    graph, model = two_rooms.graph, two_rooms.model
    oracle = solve_recursively_optimal(graph, model)
    errors = []
    for seed in range(10):
        learner = MaxqLearner(
            graph, model, _greedy_config(algorithm="maxq0", learning_rate=1.0), np.random.default_rng(seed)
        )
        for _ in range(1000):
            learner.run_episode()
        errors.append(_max_root_error(learner.store, oracle, graph, model))
    assert np.median(errors) <= 0.05


@pytest.mark.slow
def test_adapted_exit_pseudo_reward_tracks_the_remaining_distance(two_rooms):
    graph, model = two_rooms.graph, two_rooms.model
    config = _greedy_config(learning_rate=1.0, adaptive_pseudo_reward=True)
    learner = MaxqLearner(graph, model, config, np.random.default_rng(0))
    for _ in range(2000):
        learner.run_episode()

    store = learner.store
    upper, lower = exit_state(two_rooms, 0), exit_state(two_rooms, 1)
    # Two steps from the upper door to the goal, six from the lower one
    assert store.read_pseudo(Frame("Exit"), upper) == pytest.approx(-2.0, abs=0.1)
    lower_target = parent_exit_value(store, graph, graph.root_frame, graph.space.decode(lower))
    assert lower_target == pytest.approx(-6.0, abs=0.1)
    assert lower_target < store.read_pseudo(Frame("Exit"), upper)


@pytest.mark.slow
def test_reward_split_keeps_navigation_values_exact_on_fuel_taxi(fuel_taxi, taxi, taxi_store):
    env = fuel_taxi
    learner = MaxqLearner(env.graph, env.model, _greedy_config(learning_rate=1.0), np.random.default_rng(0))
    cells = [(r, c) for r in range(5) for c in range(5)]
    for _ in range(30):
        for (r, c) in cells:
            for p in range(4):
                learner.run_episode(
                    start=env.state(taxi_row=r, taxi_col=c, passenger=p, destination=(p + 1) % 4, fuel=14)
                )
        learner.run_episode(start=env.state(taxi_row=0, taxi_col=0, passenger=1, destination=2, fuel=0))

    # Navigate sees only the grid, so its values must match the fuel-free oracle
    errors = []
    for (r, c) in cells:
        fuel_state = env.state(taxi_row=r, taxi_col=c, passenger=0, destination=1, fuel=14)
        classic_state = taxi.state(taxi_row=r, taxi_col=c, passenger=0, destination=1)
        for t in range(4):
            nav = Frame("Navigate", (t,))
            learned = v_of(learner.store, env.graph, nav, fuel_state)
            errors.append(abs(learned - v_of(taxi_store, taxi.graph, nav, classic_state)))
    assert max(errors) <= 0.1
