"""
Task graph data types: subtasks, child edges, abstractions and the graph
that ties them to a model's state space.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from ..mdp.state import FactoredState, StateSpace
from ..utils.errors import GraphDefinitionError

Args = Mapping[str, int]
Predicate = Callable[[FactoredState, Args], bool]
StateFunction = Callable[[FactoredState, Args], float]

DEFAULT_NON_GOAL_PSEUDO_REWARD = -100.0


class Frame(NamedTuple):
    """A subtask invocation: node name plus bound parameter values."""
    node: str
    bindings: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Parameter:
    name: str
    cardinality: int


@dataclass(frozen=True)
class Feature:
    """Derived abstract feature computed from the state and bound arguments."""
    name: str
    fn: Callable[[FactoredState, Args], int]


@dataclass(frozen=True)
class Abstraction:
    """
    Projection used to key table entries: retained state variables, retained
    parameters and derived features.
    """
    variables: Tuple[str, ...] = ()
    params: Tuple[str, ...] = ()
    features: Tuple[Feature, ...] = ()

    def key(self, state: FactoredState, args: Args) -> Tuple:
        bound = tuple(args[p] for p in self.params)
        if state.is_sink:
            return ("<sink>", state.sink) + bound
        return (
            state.project(self.variables)
            + bound
            + tuple(int(f.fn(state, args)) for f in self.features)
        )

    @property
    def is_structural(self) -> bool:
        """True when the abstraction only drops variables and parameters."""
        return not self.features


@dataclass(frozen=True)
class ChildEdge:
    """
    Edge from a composite node to a child.

    Args:
        child: Child node name.
        bindings: (child parameter, function of parent state and args) pairs.
        result_abstraction: Key override for the completion entries of this edge.
        terminating: The child's termination always satisfies the parent's goal.
    """
    child: str
    bindings: Tuple[Tuple[str, Callable[[FactoredState, Args], int]], ...] = ()
    result_abstraction: Optional[Abstraction] = None
    terminating: bool = False
    label: str = ""


@dataclass
class SubtaskDef:
    """A node of the task graph. Primitive nodes carry a model action index."""
    name: str
    params: Tuple[Parameter, ...] = ()
    termination: Optional[Predicate] = None
    goal: Optional[Predicate] = None
    pseudo_reward: Union[float, StateFunction] = DEFAULT_NON_GOAL_PSEUDO_REWARD
    abstraction: Optional[Abstraction] = None
    children: Tuple[ChildEdge, ...] = ()
    action: Optional[int] = None

    @property
    def is_primitive(self) -> bool:
        return self.action is not None

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def binding_domain(self) -> List[Tuple[int, ...]]:
        """Every assignment of the node's parameters."""
        return list(product(*(range(p.cardinality) for p in self.params)))


class RewardSplit:
    """
    Routes named reward components to the node that owns them. Components
    without an owner stay with the primitive that produced them.
    """

    def __init__(self, owners: Mapping[str, str]):
        self.owners: Dict[str, str] = dict(owners)

    def owner(self, component: str) -> Optional[str]:
        return self.owners.get(component)

    def leaf_reward(self, components: Mapping[str, float]) -> float:
        return sum(v for k, v in components.items() if k not in self.owners)

    def owned_by(self, node: str, components: Mapping[str, float]) -> float:
        return sum(v for k, v in components.items() if self.owners.get(k) == node)

    def routed(self, components: Mapping[str, float]) -> bool:
        return any(k in self.owners and v != 0.0 for k, v in components.items())


class MaxqGraph:
    """
    A MAXQ task graph bound to a state space and the model's terminal set.
    """

    def __init__(
        self,
        name: str,
        nodes: Sequence[SubtaskDef],
        root: str,
        space: StateSpace,
        terminal_states: FrozenSet[int],
        reward_split: Optional[RewardSplit] = None,
    ):
        self.name = name
        self.nodes: Dict[str, SubtaskDef] = {}
        for node in nodes:
            if node.name in self.nodes:
                raise GraphDefinitionError(f"Duplicate node name '{node.name}'")
            self.nodes[node.name] = node
        if root not in self.nodes:
            raise GraphDefinitionError(f"Root '{root}' is not a node")
        self.root = root
        self.space = space
        self.terminal_states = frozenset(terminal_states)
        self.reward_split = reward_split
        self._args: Dict[Frame, Dict[str, int]] = {}
        self._order: Optional[List[str]] = None
        self._edge_ranks: Optional[Dict[Tuple[str, int], int]] = None

    def node(self, name: str) -> SubtaskDef:
        try:
            return self.nodes[name]
        except KeyError:
            raise GraphDefinitionError(f"Unknown node '{name}'")

    @property
    def root_frame(self) -> Frame:
        if self.nodes[self.root].params:
            raise GraphDefinitionError("The root cannot take parameters")
        return Frame(self.root)

    def is_primitive(self, name: str) -> bool:
        return self.nodes[name].is_primitive

    def args(self, frame: Frame) -> Dict[str, int]:
        cached = self._args.get(frame)
        if cached is None:
            node = self.nodes[frame.node]
            cached = dict(zip(node.param_names, frame.bindings))
            self._args[frame] = cached
        return cached

    def terminated(self, frame: Frame, state: FactoredState) -> bool:
        """Termination predicate; every node is terminated at model terminals."""
        if state.index in self.terminal_states:
            return True
        node = self.nodes[frame.node]
        if node.is_primitive or node.termination is None:
            return False
        return bool(node.termination(state, self.args(frame)))

    def executable(self, frame: Frame, state: FactoredState) -> bool:
        return not self.terminated(frame, state)

    def is_goal(self, frame: Frame, state: FactoredState) -> bool:
        node = self.nodes[frame.node]
        if node.goal is None:
            return self.terminated(frame, state)
        return bool(node.goal(state, self.args(frame)))

    def pseudo_reward(self, frame: Frame, state: FactoredState) -> float:
        """R̃ at a terminal state of the frame; zero elsewhere."""
        node = self.nodes[frame.node]
        if not self.terminated(frame, state):
            return 0.0
        if callable(node.pseudo_reward):
            return float(node.pseudo_reward(state, self.args(frame)))
        if self.is_goal(frame, state):
            return 0.0
        return float(node.pseudo_reward)

    def pseudo_rewards_are_zero(self) -> bool:
        return all(
            not callable(n.pseudo_reward) and n.pseudo_reward == 0.0
            for n in self.nodes.values()
            if not n.is_primitive
        )

    def child_frame(self, frame: Frame, edge_index: int, state: FactoredState) -> Frame:
        edge = self.nodes[frame.node].children[edge_index]
        child = self.nodes[edge.child]
        if not child.params:
            return Frame(edge.child)
        args = self.args(frame)
        bound = dict((name, int(fn(state, args))) for name, fn in edge.bindings)
        return Frame(edge.child, tuple(bound[p] for p in child.param_names))

    def executable_edges(self, frame: Frame, state: FactoredState) -> List[Tuple[int, Frame]]:
        result = []
        for i in range(len(self.nodes[frame.node].children)):
            child = self.child_frame(frame, i, state)
            if self.executable(child, state):
                result.append((i, child))
        return result

    def topological_order(self) -> List[str]:
        """Composite and primitive nodes, parents before children."""
        if self._order is None:
            visited: Dict[str, int] = {}
            order: List[str] = []

            def visit(name: str) -> None:
                mark = visited.get(name)
                if mark == 1:
                    raise GraphDefinitionError(f"Cycle through node '{name}'")
                if mark == 2:
                    return
                visited[name] = 1
                for edge in self.node(name).children:
                    visit(edge.child)
                visited[name] = 2
                order.append(name)

            visit(self.root)
            self._order = list(reversed(order))
        return self._order

    def bottom_up_order(self) -> List[str]:
        return list(reversed(self.topological_order()))

    def depth(self) -> int:
        """Number of nodes on the longest root-to-leaf path."""
        memo: Dict[str, int] = {}
        for name in self.bottom_up_order():
            children = self.nodes[name].children
            memo[name] = 1 + max((memo[e.child] for e in children), default=0)
        return memo[self.root]

    def descendants(self, name: str) -> List[str]:
        seen: List[str] = []
        stack = [name]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.append(current)
            stack.extend(e.child for e in self.nodes[current].children)
        return seen

    def leaves_under(self, name: str) -> List[str]:
        return [n for n in self.descendants(name) if self.nodes[n].is_primitive]

    def parents_of(self, name: str) -> List[Tuple[str, int]]:
        return [
            (parent.name, i)
            for parent in self.nodes.values()
            for i, edge in enumerate(parent.children)
            if edge.child == name
        ]

    def edge_ranks(self) -> Dict[Tuple[str, int], int]:
        """Depth-first left-to-right numbering of (node, edge) pairs."""
        if self._edge_ranks is None:
            ranks: Dict[Tuple[str, int], int] = {}
            visited = set()

            def visit(name: str) -> None:
                if name in visited:
                    return
                visited.add(name)
                for i, edge in enumerate(self.nodes[name].children):
                    ranks[(name, i)] = len(ranks)
                    visit(edge.child)

            visit(self.root)
            self._edge_ranks = ranks
        return self._edge_ranks

    def node_key(self, frame: Frame, state: FactoredState, abstract: bool) -> Tuple:
        node = self.nodes[frame.node]
        if abstract and node.abstraction is not None:
            return node.abstraction.key(state, self.args(frame))
        return (state.index,) + frame.bindings

    def completion_key(self, frame: Frame, edge_index: int, state: FactoredState, abstract: bool) -> Tuple:
        if abstract:
            edge = self.nodes[frame.node].children[edge_index]
            if edge.result_abstraction is not None:
                return edge.result_abstraction.key(state, self.args(frame))
        return self.node_key(frame, state, abstract)

    def primitive_nodes(self) -> List[str]:
        return [n for n in self.topological_order() if self.nodes[n].is_primitive]

    def composite_nodes(self) -> List[str]:
        return [n for n in self.topological_order() if not self.nodes[n].is_primitive]

    def frames(self, name: str) -> Iterator[Frame]:
        for bindings in self.nodes[name].binding_domain():
            yield Frame(name, bindings)
