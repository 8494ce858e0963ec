import numpy as np
import pytest

from app.envs.hdg import HdgConfig, LandmarkMap
from app.envs.registry import environment_registry, make_environment
from app.envs.two_rooms import exit_state
from app.mdp.model import sample_transition
from app.taskgraph.subtask import Frame
from app.utils.errors import ConfigError


def _outcomes(env, action, **values):
    model = env.model
    return model.outcomes_for(env.state(**values), model.action_index(action))


def test_classic_taxi_sizes(taxi):
    space = taxi.model.space
    assert space.n_factored == 500
    assert taxi.model.n_states == 501
    assert taxi.model.actions == ("North", "South", "East", "West", "Pickup", "Putdown")
    assert taxi.model.terminals == frozenset({space.sink_index("delivered")})


def test_taxi_start_distribution_waits_at_a_landmark(taxi):
    start = taxi.model.start_distribution
    assert len(taxi.model.start_states()) == 400
    assert start.sum() == pytest.approx(1.0)
    aboard = taxi.state(taxi_row=0, taxi_col=0, passenger=4, destination=1)
    assert start[aboard] == 0.0


def test_taxi_walls_block_movement(taxi):
    (outcome,) = _outcomes(taxi, "East", taxi_row=0, taxi_col=1, passenger=0, destination=1)
    assert outcome.next_state == taxi.state(taxi_row=0, taxi_col=1, passenger=0, destination=1)
    assert outcome.reward == -1.0
    (outcome,) = _outcomes(taxi, "East", taxi_row=0, taxi_col=2, passenger=0, destination=1)
    assert outcome.next_state == taxi.state(taxi_row=0, taxi_col=3, passenger=0, destination=1)


def test_taxi_pickup_and_putdown(taxi):
    (ok,) = _outcomes(taxi, "Pickup", taxi_row=4, taxi_col=0, passenger=2, destination=1)
    assert ok.next_state == taxi.state(taxi_row=4, taxi_col=0, passenger=4, destination=1)
    assert ok.reward == -1.0

    (illegal,) = _outcomes(taxi, "Pickup", taxi_row=4, taxi_col=1, passenger=2, destination=1)
    assert illegal.reward == -10.0
    assert illegal.component_dict() == {"illegal": -10.0}

    (delivered,) = _outcomes(taxi, "Putdown", taxi_row=0, taxi_col=4, passenger=4, destination=1)
    assert delivered.next_state == taxi.model.space.sink_index("delivered")
    assert delivered.reward == 19.0
    assert delivered.component_dict() == {"step": -1.0, "delivery": 20.0}


def test_fickle_taxi_moves_and_changes_destination(fickle_taxi):
    env = fickle_taxi
    assert env.model.space.n_factored == 600
    (armed,) = _outcomes(env, "Pickup", taxi_row=0, taxi_col=0, passenger=0, destination=3)
    assert env.model.space.decode(armed.next_state)["passenger"] == 5

    outcomes = _outcomes(env, "South", taxi_row=0, taxi_col=0, passenger=5, destination=3)
    assert sum(o.probability for o in outcomes) == pytest.approx(1.0)
    decoded = [(env.model.space.decode(o.next_state), o.probability) for o in outcomes]
    aboard = sum(p for s, p in decoded if s["passenger"] == 4)
    kept = sum(p for s, p in decoded if s["destination"] == 3)
    # The westward slip hits the edge and leaves the change pending
    assert aboard == pytest.approx(0.9)
    assert kept == pytest.approx(0.9 * 0.7 + 0.1)


def _frequency_within_three_sigma(hits, draws, p):
    sigma = np.sqrt(p * (1.0 - p) / draws)
    assert abs(hits / draws - p) <= 3.0 * sigma


def test_fickle_slip_frequencies(fickle_taxi):
    env = fickle_taxi
    model = env.model
    state = env.state(taxi_row=2, taxi_col=2, passenger=0, destination=3)
    north = model.action_index("North")
    rng = np.random.default_rng(2024)
    draws = 100_000
    landed = [model.space.decode(sample_transition(model, state, north, rng).next_state) for _ in range(draws)]
    cells = [(s["taxi_row"], s["taxi_col"]) for s in landed]
    _frequency_within_three_sigma(cells.count((1, 2)), draws, 0.8)
    _frequency_within_three_sigma(cells.count((2, 1)), draws, 0.1)
    _frequency_within_three_sigma(cells.count((2, 3)), draws, 0.1)


def test_fickle_destination_change_frequency(fickle_taxi):
    env = fickle_taxi
    model = env.model
    state = env.state(taxi_row=0, taxi_col=0, passenger=5, destination=3)
    south = model.action_index("South")
    rng = np.random.default_rng(99)
    draws = 100_000
    landed = [model.space.decode(sample_transition(model, state, south, rng).next_state) for _ in range(draws)]
    changed = sum(1 for s in landed if s["destination"] != 3)
    # Only moves that leave the pickup square can change the destination
    _frequency_within_three_sigma(changed, draws, 0.9 * 0.3)
    _frequency_within_three_sigma(sum(1 for s in landed if s["destination"] == 0), draws, 0.9 * 0.1)


def test_fickle_armed_flag_only_marks_fresh_pickups(fickle_taxi, taxi):
    model = fickle_taxi.model
    reachable = set(model.start_states())
    frontier = list(reachable)
    while frontier:
        s = frontier.pop()
        if model.is_terminal(s):
            continue
        for a in range(model.n_actions):
            for outcome in model.outcomes_for(s, a):
                if outcome.probability > 0 and outcome.next_state not in reachable:
                    reachable.add(outcome.next_state)
                    frontier.append(outcome.next_state)

    armed = [model.space.decode(s) for s in reachable if not model.is_terminal(s)]
    armed = [s for s in armed if s["passenger"] == 5]
    landmarks = {(0, 0), (0, 4), (4, 0), (4, 3)}
    assert {(s["taxi_row"], s["taxi_col"]) for s in armed} == landmarks
    assert len(armed) == 16

    # Folding ARMED into IN_TAXI recovers the classic layout
    classic = taxi.model.space
    folded = {
        tuple(4 if v == 5 and name == "passenger" else v for name, v in zip(model.space.names, s.values))
        for s in model.space
        if not s.is_sink
    }
    assert folded == {tuple(s.values) for s in classic if not s.is_sink}
    assert len(folded) == 500


def test_fuel_taxi_runs_dry_and_refuels(fuel_taxi):
    env = fuel_taxi
    space = env.model.space
    assert space.n_factored == 7500
    assert env.model.actions[-1] == "Fillup"

    (dry,) = _outcomes(env, "North", taxi_row=3, taxi_col=3, passenger=0, destination=1, fuel=0)
    assert dry.next_state == space.sink_index("out_of_fuel")
    assert dry.reward == -21.0
    assert dry.component_dict()["out_of_fuel"] == -20.0

    (filled,) = _outcomes(env, "Fillup", taxi_row=2, taxi_col=2, passenger=0, destination=1, fuel=3)
    assert space.decode(filled.next_state)["fuel"] == 14
    (illegal,) = _outcomes(env, "Fillup", taxi_row=2, taxi_col=3, passenger=0, destination=1, fuel=3)
    assert illegal.reward == -10.0

    fuels = {space.decode(s)["fuel"] for s in env.model.start_states()}
    assert fuels == set(range(5, 13))


def test_fuel_taxi_routes_out_of_fuel_to_root(fuel_taxi):
    split = fuel_taxi.graph.reward_split
    assert split is not None
    assert split.owner("out_of_fuel") == "Root"
    assert split.owner("step") is None
    components = {"step": -1.0, "out_of_fuel": -20.0}
    assert split.leaf_reward(components) == -1.0
    assert split.owned_by("Root", components) == -20.0


def test_fuel_taxi_without_split_has_no_routing():
    env = make_environment("taxi-fuel", {"reward_split": False})
    assert env.graph.reward_split is None


def test_two_rooms_wall_and_doors(two_rooms):
    env = two_rooms
    (blocked,) = _outcomes(env, "East", row=2, col=2)
    assert blocked.next_state == env.state(row=2, col=2)
    (through,) = _outcomes(env, "East", row=0, col=2)
    assert through.next_state == env.state(row=0, col=3)
    assert exit_state(env, 0) == env.state(row=0, col=3)
    assert exit_state(env, 1) == env.state(row=4, col=3)
    assert env.model.terminals == frozenset({env.state(row=0, col=5)})


def test_two_rooms_pseudo_rewards_sit_past_the_doors(two_rooms_shaped):
    graph = two_rooms_shaped.graph
    frame = Frame("Exit")
    space = two_rooms_shaped.model.space
    assert graph.pseudo_reward(frame, space.decode(exit_state(two_rooms_shaped, 0))) == -2.0
    assert graph.pseudo_reward(frame, space.decode(exit_state(two_rooms_shaped, 1))) == -6.0


def test_landmark_ties_go_to_lower_index():
    lmap = LandmarkMap(HdgConfig(rows=1, cols=3, landmarks=[(0, 0), (0, 2)]))
    assert lmap.nearest_landmark((0, 1)) == 0
    assert lmap.cell_of(1) == [(0, 2)]
    assert lmap.neighbours[0] == {1}
    assert lmap.neighbours[1] == {0}


def test_default_landmark_neighbours_are_symmetric():
    lmap = LandmarkMap(HdgConfig())
    for l, others in enumerate(lmap.neighbours):
        assert l not in others
        for other in others:
            assert l in lmap.neighbours[other]
    for l, cell in enumerate(lmap.landmarks):
        assert lmap.nearest_landmark(cell) == l


def test_registry_rejects_unknown_names_and_bad_overrides():
    assert {"taxi", "taxi-fickle", "taxi-fuel", "hdg", "two-rooms"} <= set(environment_registry.names())
    with pytest.raises(ConfigError):
        make_environment("mountain-car")
    with pytest.raises(ConfigError):
        make_environment("taxi", {"intended_move_probability": 1.5})
    with pytest.raises(ConfigError):
        make_environment("two-rooms", {"exit_pseudo_rewards": [0.0]})


def test_registry_presets_merge_with_overrides():
    config = environment_registry.config_for("taxi-fickle", {"destination_change_probability": 0.5})
    assert config.fickle is True
    assert config.destination_change_probability == 0.5


@pytest.mark.slow
def test_hdg_model_is_consistent():
    env = make_environment("hdg")
    assert env.model.space.n_factored == 10000
    assert len(env.model.terminals) == 100
    assert np.isclose(env.model.start_distribution.sum(), 1.0)
