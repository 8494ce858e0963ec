import pytest

from app.envs.registry import make_environment
from app.taskgraph.storage import flat_storage_count, storage_count
from app.taskgraph.subtask import Frame


def test_classic_taxi_storage_with_abstractions(taxi):
    count = storage_count(taxi.graph, abstract=True)
    assert count.total == 632

    tables = {item.table: item.entries for item in count.items if item.table != "V"}
    assert tables == {
        "QGet": 16,
        "QPut": 0,
        "QNavigateForGet": 4,
        "QPickup": 100,
        "QNavigateForPut": 4,
        "QPutdown": 100,
        "QNorth": 100,
        "QSouth": 100,
        "QEast": 100,
        "QWest": 100,
    }
    leaves = {item.node: item.entries for item in count.items if item.table == "V"}
    assert leaves == {"North": 1, "South": 1, "East": 1, "West": 1, "Pickup": 2, "Putdown": 2}


def test_classic_taxi_storage_without_abstractions(taxi):
    count = storage_count(taxi.graph, abstract=False)
    assert count.total == 14000
    assert all(item.entries in (500, 2000) for item in count.items)
    assert flat_storage_count(taxi.model) == 3000


def test_storage_frame_itemises_tables(taxi):
    frame = storage_count(taxi.graph).to_frame()
    assert list(frame.columns) == ["table", "node", "child", "entries"]
    assert frame["entries"].sum() == 632
    assert frame.loc[frame["table"] == "QPut", "child"].item() == "Put"


def test_recursively_optimal_store_stays_within_accounting(taxi, taxi_store):
    # The unabstracted solve writes at most one entry per counted slot
    assert taxi_store.entry_count() <= storage_count(taxi.graph, abstract=False).total


def _live_invocations(graph, s):
    """Every invocation reachable from the root at `s` without passing a terminated one."""
    root = graph.root_frame
    if graph.terminated(root, s):
        return []
    seen = [root]
    stack = [root]
    while stack:
        frame = stack.pop()
        if graph.nodes[frame.node].is_primitive:
            continue
        for i in range(len(graph.nodes[frame.node].children)):
            child = graph.child_frame(frame, i, s)
            if graph.executable(child, s) and child not in seen:
                seen.append(child)
                stack.append(child)
    return seen


def _count_by_enumeration(graph, model):
    leaves = {}
    edges = {}
    for s in graph.space:
        if model.is_terminal(s.index):
            continue
        for frame in _live_invocations(graph, s):
            node = graph.nodes[frame.node]
            if node.is_primitive:
                leaves.setdefault(frame.node, set()).add(graph.node_key(frame, s, True))
                continue
            if node.params and (node.abstraction is None or node.abstraction.params):
                frames = [Frame(frame.node, b) for b in node.binding_domain()]
            else:
                frames = [frame]
            for i, edge in enumerate(node.children):
                if edge.terminating:
                    continue
                keys = edges.setdefault((frame.node, i), set())
                for owner in frames:
                    if graph.executable(graph.child_frame(owner, i, s), s):
                        keys.add(graph.completion_key(owner, i, s, True))
    counts = []
    for name in graph.topological_order():
        node = graph.nodes[name]
        if node.is_primitive:
            counts.append(len(leaves.get(name, ())))
        else:
            counts.extend(len(edges.get((name, i), ())) for i in range(len(node.children)))
    return counts


def test_taxi_storage_matches_enumeration(taxi):
    count = storage_count(taxi.graph)
    assert [item.entries for item in count.items] == _count_by_enumeration(taxi.graph, taxi.model)


@pytest.mark.slow
def test_hdg_storage_matches_enumeration():
    env = make_environment("hdg")
    count = storage_count(env.graph)
    assert [item.entries for item in count.items] == _count_by_enumeration(env.graph, env.model)
