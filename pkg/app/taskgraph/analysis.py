"""
Cached structural facts about a task graph over its state space: where each
invocation is terminated, which invocations are live at each state, and the
parameter bindings parents actually produce.
"""
from typing import Dict, List, Set, Tuple

import numpy as np

from ..mdp.state import FactoredState
from .subtask import Frame, MaxqGraph


class GraphAnalysis:
    """Lazily computed per-state facts about a graph."""

    def __init__(self, graph: MaxqGraph):
        self.graph = graph
        self.states: List[FactoredState] = graph.space.all_states()
        self.nonterminal: List[FactoredState] = [
            s for s in self.states if s.index not in graph.terminal_states
        ]
        self._terminated: Dict[Frame, np.ndarray] = {}
        self._live: List[List[Frame]] = []
        self._bindings: Dict[str, List[Tuple[int, ...]]] = {}

    def terminated_mask(self, frame: Frame) -> np.ndarray:
        mask = self._terminated.get(frame)
        if mask is None:
            mask = np.array([self.graph.terminated(frame, s) for s in self.states], dtype=bool)
            self._terminated[frame] = mask
        return mask

    def active_states(self, frame: Frame) -> np.ndarray:
        """Indices of states where the invocation can execute."""
        return np.flatnonzero(~self.terminated_mask(frame))

    def _compute_live(self) -> None:
        graph = self.graph
        live: List[List[Frame]] = [[] for _ in self.states]
        for s in self.nonterminal:
            root = graph.root_frame
            if graph.terminated(root, s):
                continue
            stack = [root]
            seen: Set[Frame] = set()
            while stack:
                frame = stack.pop()
                if frame in seen:
                    continue
                seen.add(frame)
                live[s.index].append(frame)
                node = graph.nodes[frame.node]
                for i in range(len(node.children)):
                    child = graph.child_frame(frame, i, s)
                    if graph.nodes[child.node].is_primitive or not graph.terminated(child, s):
                        stack.append(child)
        self._live = live

    def live_frames(self, state: int) -> List[Frame]:
        """
        Invocations reachable at a state through a chain of non-terminated
        ancestors, the invocation itself not terminated. Primitive frames are
        included when some parent is live.
        """
        if not self._live:
            self._compute_live()
        return self._live[state]

    def binding_sets(self) -> Dict[str, List[Tuple[int, ...]]]:
        """Bindings produced for each node by live parents, sorted."""
        if not self._bindings:
            found: Dict[str, Set[Tuple[int, ...]]] = {name: set() for name in self.graph.nodes}
            for s in self.nonterminal:
                for frame in self.live_frames(s.index):
                    found[frame.node].add(frame.bindings)
            found[self.graph.root].add(())
            self._bindings = {name: sorted(values) for name, values in found.items()}
        return self._bindings

    def frames(self, name: str) -> List[Frame]:
        return [Frame(name, b) for b in self.binding_sets()[name]]


def analysis_for(graph: MaxqGraph) -> GraphAnalysis:
    """The graph's cached analysis."""
    cached = getattr(graph, "_analysis", None)
    if cached is None:
        cached = GraphAnalysis(graph)
        graph._analysis = cached
    return cached
