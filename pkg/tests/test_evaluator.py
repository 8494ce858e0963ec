import numpy as np
import pytest

from app.decomp.evaluator import decompose_path, evaluate_max_node, greedy_edge, q_of, v_of
from app.decomp.value_store import ValueStore, load_store, save_store
from app.taskgraph.subtask import Frame
from app.utils.errors import ShieldedAccessError


@pytest.fixture
def s1(taxi):
    # Taxi one step south of R, passenger waiting at R, bound for B
    return taxi.state(taxi_row=1, taxi_col=0, passenger=0, destination=3)


def test_root_value_decomposes_along_the_greedy_path(taxi, taxi_store, s1):
    path = decompose_path(taxi_store, taxi.graph, s1)
    assert [f.node for f in path.frames] == ["North", "Navigate", "Get", "Root"]
    assert path.frames[1] == Frame("Navigate", (0,))
    np.testing.assert_allclose(path.terms, [-1.0, 0.0, -1.0, 12.0], atol=1e-9)
    assert path.total == pytest.approx(10.0)
    assert v_of(taxi_store, taxi.graph, taxi.graph.root_frame, s1) == pytest.approx(10.0)


def test_max_node_evaluation_follows_the_same_path(taxi, taxi_store, s1):
    result = evaluate_max_node(taxi_store, taxi.graph, taxi.graph.root_frame, s1)
    assert result.value == pytest.approx(10.0)
    assert result.action == taxi.model.action_index("North")
    assert [frame.node for frame, _ in result.path] == ["Root", "Get", "Navigate"]


def test_decomposition_identities_on_random_states(taxi, taxi_store):
    graph = taxi.graph
    root = graph.root_frame
    rng = np.random.default_rng(11)
    states = [s for s in range(taxi.model.n_states) if not taxi.model.is_terminal(s)]
    for s in rng.choice(states, size=200, replace=False):
        s = int(s)
        value = v_of(taxi_store, graph, root, s)
        assert decompose_path(taxi_store, graph, s).total == pytest.approx(value, abs=1e-9)
        edge = greedy_edge(taxi_store, graph, root, s)
        child = graph.child_frame(root, edge, graph.space.decode(s))
        expected = v_of(taxi_store, graph, child, s) + taxi_store.read_c(root, edge, s)
        assert q_of(taxi_store, graph, root, s, edge) == pytest.approx(expected)
        assert q_of(taxi_store, graph, root, s, edge) == pytest.approx(value, abs=1e-9)


def test_tilde_and_plain_completions_coincide_without_pseudo_rewards(taxi, taxi_store, s1):
    get = Frame("Get")
    for edge in (0, 1):
        assert taxi_store.read_c(get, edge, s1, tilde=True) == taxi_store.read_c(get, edge, s1)


def test_terminated_frames_are_shielded(taxi, taxi_store, s1):
    with pytest.raises(ShieldedAccessError):
        taxi_store.read_c(Frame("Put"), 0, s1)
    with pytest.raises(ShieldedAccessError):
        taxi_store.write_c(Frame("Navigate", (1,)), 0, taxi.state(taxi_row=0, taxi_col=4, passenger=0, destination=3), 1.0)


def test_terminal_leaf_values_read_as_zero(taxi):
    store = ValueStore(taxi.graph, initial_value=5.0)
    delivered = taxi.model.space.sink_index("delivered")
    assert store.read_v("North", delivered) == 0.0
    assert store.read_v("North", 0) == 5.0


def test_terminating_edges_are_structural_zeros(taxi):
    store = ValueStore(taxi.graph, abstract=True, initial_value=3.0)
    aboard = taxi.state(taxi_row=2, taxi_col=2, passenger=4, destination=3)
    root = taxi.graph.root_frame
    store.write_c(root, 1, aboard, 7.0)
    assert store.read_c(root, 1, aboard) == 0.0
    assert store.c[("Root", 1)] == {}
    assert ValueStore(taxi.graph, abstract=False, initial_value=3.0).read_c(root, 1, aboard) == 3.0


def test_abstract_keys_share_entries(taxi):
    store = ValueStore(taxi.graph, abstract=True)
    nav = Frame("Navigate", (3,))
    first = taxi.state(taxi_row=1, taxi_col=1, passenger=0, destination=3)
    second = taxi.state(taxi_row=1, taxi_col=1, passenger=2, destination=0)
    store.write_c(nav, 0, first, -4.0)
    assert store.read_c(nav, 0, second) == -4.0
    assert store.entry_counts()["C:Navigate:0"] == 1


def test_store_round_trips_through_jsonl(taxi, taxi_store, tmp_path, s1):
    path = save_store(taxi_store, tmp_path / "store.jsonl")
    loaded = load_store(taxi.graph, path)
    assert loaded.entry_count() == taxi_store.entry_count()
    root = taxi.graph.root_frame
    assert v_of(loaded, taxi.graph, root, s1) == pytest.approx(10.0)
    assert loaded.read_c(Frame("Get"), 1, s1, tilde=True) == taxi_store.read_c(Frame("Get"), 1, s1, tilde=True)
