"""
The frame stack of hierarchical execution.
"""
from typing import List

from ..mdp.state import FactoredState
from ..taskgraph.subtask import Frame, MaxqGraph
from ..utils.errors import GraphDefinitionError


class ExecutionStack:
    """Stack of active invocations, root at the bottom."""

    def __init__(self, graph: MaxqGraph):
        self.graph = graph
        self.frames: List[Frame] = []
        self.max_depth = graph.depth()

    def __len__(self) -> int:
        return len(self.frames)

    def __bool__(self) -> bool:
        return bool(self.frames)

    @property
    def top(self) -> Frame:
        return self.frames[-1]

    def push(self, frame: Frame) -> None:
        self.frames.append(frame)
        if len(self.frames) > self.max_depth:
            raise GraphDefinitionError(f"Stack depth {len(self.frames)} exceeds graph depth {self.max_depth}")

    def pop(self) -> Frame:
        return self.frames.pop()

    def clear(self) -> None:
        self.frames.clear()

    def pop_terminated(self, state: FactoredState) -> List[Frame]:
        """
        Remove the outermost terminated frame and everything above it.

        Returns:
            List[Frame]: The removed frames, outermost first.
        """
        for depth, frame in enumerate(self.frames):
            if self.graph.terminated(frame, state):
                removed = self.frames[depth:]
                del self.frames[depth:]
                return removed
        return []
