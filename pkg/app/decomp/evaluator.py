"""
Reading values out of a decomposed store: V and Q along the hierarchy,
greedy child choice, the max-node evaluation used for greedy execution, and
the path decomposition of the root value.
"""
from typing import Dict, List, NamedTuple, Optional, Protocol, Tuple, Union

from ..config.settings import settings
from ..mdp.state import FactoredState
from ..taskgraph.subtask import Frame, MaxqGraph
from .value_store import ValueStore

StateLike = Union[int, FactoredState]


def _state(graph: MaxqGraph, state: StateLike) -> FactoredState:
    return state if isinstance(state, FactoredState) else graph.space.decode(state)


def v_of(store: ValueStore, graph: MaxqGraph, frame: Frame, state: StateLike) -> float:
    """
    Projected value of invoking `frame` at `state`.

    Leaves return their stored V. Composite nodes return the maximum over
    executable children of V(child) + C. Terminated composites are worth 0.
    """
    return _v_of(store, graph, frame, _state(graph, state), {})


def _v_of(store, graph, frame, s, memo) -> float:
    key = (frame, s.index)
    if key in memo:
        return memo[key]
    node = graph.nodes[frame.node]
    if node.is_primitive:
        value = store.read_v(frame.node, s)
    elif graph.terminated(frame, s):
        value = 0.0
    else:
        best = None
        for i, child in graph.executable_edges(frame, s):
            q = _v_of(store, graph, child, s, memo) + store.read_c(frame, i, s)
            if best is None or q > best:
                best = q
        value = 0.0 if best is None else best
    memo[key] = value
    return value


def q_of(
    store: ValueStore,
    graph: MaxqGraph,
    frame: Frame,
    state: StateLike,
    edge: int,
    tilde: bool = False,
) -> float:
    """Q(i, s, j) = V(j, s) + C(i, s, j), or with C̃ when `tilde` is set."""
    s = _state(graph, state)
    child = graph.child_frame(frame, edge, s)
    return v_of(store, graph, child, s) + store.read_c(frame, edge, s, tilde=tilde)


def greedy_edge(
    store: ValueStore,
    graph: MaxqGraph,
    frame: Frame,
    state: StateLike,
    tilde: bool = True,
    tie_tolerance: Optional[float] = None,
) -> Optional[int]:
    """
    Ordered argmax over executable children. Near-ties go to the child listed
    first.

    Returns:
        Optional[int]: Edge index, or None when no child can execute.
    """
    tie_tolerance = settings.oracle.tie_tolerance if tie_tolerance is None else tie_tolerance
    s = _state(graph, state)
    memo: Dict = {}
    best_edge, best_value = None, None
    for i, child in graph.executable_edges(frame, s):
        q = _v_of(store, graph, child, s, memo) + store.read_c(frame, i, s, tilde=tilde)
        if best_value is None or q > best_value + tie_tolerance:
            best_edge, best_value = i, q
    return best_edge


class MaxNodeEvaluation(NamedTuple):
    """Best path value below a node, its primitive action and the path taken."""
    value: float
    action: Optional[int]
    path: Tuple[Tuple[Frame, int], ...]


def evaluate_max_node(
    store: ValueStore,
    graph: MaxqGraph,
    frame: Frame,
    state: StateLike,
    tie_tolerance: Optional[float] = None,
) -> MaxNodeEvaluation:
    """
    Maximum over all root-to-leaf paths below `frame` of V(leaf) + ΣC.

    Only children executable at `state` are considered. Ties are broken by
    child order at each node.

    Args:
        store: Value tables.
        graph: The task graph.
        frame: Node invocation to evaluate.
        state: Current state.

    Returns:
        MaxNodeEvaluation: Value, primitive action index and the (frame, edge)
        pairs along the best path.
    """
    tie_tolerance = settings.oracle.tie_tolerance if tie_tolerance is None else tie_tolerance
    s = _state(graph, state)
    return _evaluate(store, graph, frame, s, tie_tolerance, {})


def _evaluate(store, graph, frame, s, tie_tolerance, memo) -> MaxNodeEvaluation:
    key = (frame, s.index)
    if key in memo:
        return memo[key]
    node = graph.nodes[frame.node]
    if node.is_primitive:
        result = MaxNodeEvaluation(store.read_v(frame.node, s), node.action, ())
    else:
        best: Optional[MaxNodeEvaluation] = None
        for i, child in graph.executable_edges(frame, s):
            below = _evaluate(store, graph, child, s, tie_tolerance, memo)
            value = below.value + store.read_c(frame, i, s)
            if best is None or value > best.value + tie_tolerance:
                best = MaxNodeEvaluation(value, below.action, ((frame, i),) + below.path)
        result = best if best is not None else MaxNodeEvaluation(0.0, None, ())
    memo[key] = result
    return result


class HierarchicalPolicy(Protocol):
    """Chooses a child edge for an invocation at a state."""

    def choose(self, frame: Frame, state: FactoredState) -> Optional[int]:
        ...


class GreedyPolicy:
    """Ordered greedy choice over C̃ + V (or C + V) from a store."""

    def __init__(self, store: ValueStore, graph: MaxqGraph, tilde: bool = True):
        self.store = store
        self.graph = graph
        self.tilde = tilde

    def choose(self, frame: Frame, state: FactoredState) -> Optional[int]:
        return greedy_edge(self.store, self.graph, frame, state, tilde=self.tilde)


class FixedPolicy:
    """Explicit (frame, state) -> edge table, e.g. a frozen greedy policy."""

    def __init__(self, table: Dict[Tuple[Frame, int], int]):
        self.table = table

    @classmethod
    def freeze(cls, policy: HierarchicalPolicy, graph: MaxqGraph, frames: List[Frame]) -> "FixedPolicy":
        table: Dict[Tuple[Frame, int], int] = {}
        for frame in frames:
            for s in graph.space:
                if s.index in graph.terminal_states or graph.terminated(frame, s):
                    continue
                edge = policy.choose(frame, s)
                if edge is not None:
                    table[(frame, s.index)] = edge
        return cls(table)

    def choose(self, frame: Frame, state: FactoredState) -> Optional[int]:
        return self.table.get((frame, state.index))


class PathDecomposition(NamedTuple):
    """V(leaf) followed by the completion terms up to the root."""
    terms: List[float]
    frames: List[Frame]

    @property
    def total(self) -> float:
        return sum(self.terms)


def decompose_path(
    store: ValueStore,
    graph: MaxqGraph,
    state: StateLike,
    policy: Optional[HierarchicalPolicy] = None,
) -> PathDecomposition:
    """
    Decompose the root value along the path the policy would descend.

    Args:
        store: Value tables.
        graph: The task graph.
        state: Non-terminal state.
        policy: Child selection; greedy over C̃ when omitted.

    Returns:
        PathDecomposition: Terms ordered leaf first, root completion last,
        together with the frames from the leaf up to the root.
    """
    s = _state(graph, state)
    policy = policy or GreedyPolicy(store, graph)
    frame = graph.root_frame
    completions: List[float] = []
    frames: List[Frame] = []
    while not graph.nodes[frame.node].is_primitive:
        edge = policy.choose(frame, s)
        if edge is None:
            break
        completions.append(store.read_c(frame, edge, s))
        frames.append(frame)
        frame = graph.child_frame(frame, edge, s)
    frames.append(frame)
    leaf_value = store.read_v(frame.node, s) if graph.nodes[frame.node].is_primitive else 0.0
    return PathDecomposition(
        terms=[leaf_value] + list(reversed(completions)),
        frames=list(reversed(frames)),
    )
