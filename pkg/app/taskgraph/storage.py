"""
Storage accounting: how many table entries a graph needs with and without
its state abstractions, itemised per node and edge.
"""
from typing import Dict, List, Set, Tuple

import pandas as pd
from pydantic import BaseModel, Field

from ..config.logging_config import logger
from ..mdp.model import TabularModel
from .analysis import analysis_for
from .subtask import Frame, MaxqGraph


class StorageItem(BaseModel):
    """Entry count of one table: a leaf's V or one edge's C."""
    table: str
    node: str
    child: str = ""
    entries: int


class StorageCount(BaseModel):
    """Itemised storage requirement of a graph."""
    graph: str
    abstract: bool
    items: List[StorageItem] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(item.entries for item in self.items)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([item.model_dump() for item in self.items])


def _edge_table_name(graph: MaxqGraph, node: str, edge_index: int) -> str:
    edge = graph.nodes[node].children[edge_index]
    return f"Q{edge.label or edge.child}"


def abstract_table_keys(graph: MaxqGraph) -> Tuple[Dict[str, Set[Tuple]], Dict[Tuple[str, int], Set[Tuple]]]:
    """
    Keys an abstracted value store holds: per leaf, the V keys, and per
    (node, edge index), the completion keys. Anything outside these sets is
    omitted from the tables.
    """
    analysis = analysis_for(graph)
    leaf_keys: Dict[str, Set[Tuple]] = {n: set() for n in graph.primitive_nodes()}
    edge_keys: Dict[Tuple[str, int], Set[Tuple]] = {}
    for name in graph.composite_nodes():
        for i in range(len(graph.nodes[name].children)):
            edge_keys[(name, i)] = set()

    for s in analysis.nonterminal:
        frames = analysis.live_frames(s.index)
        live_nodes: Dict[str, List[Frame]] = {}
        for frame in frames:
            live_nodes.setdefault(frame.node, []).append(frame)

        for name, node_frames in live_nodes.items():
            node = graph.nodes[name]
            if node.is_primitive:
                leaf_keys[name].add(graph.node_key(node_frames[0], s, True))
                continue
            keeps_params = node.params and (node.abstraction is None or node.abstraction.params)
            if keeps_params:
                candidates = [Frame(name, b) for b in node.binding_domain()]
            else:
                candidates = node_frames
            for i, edge in enumerate(node.children):
                if edge.terminating:
                    continue
                keys = edge_keys[(name, i)]
                for frame in candidates:
                    child = graph.child_frame(frame, i, s)
                    if graph.executable(child, s):
                        keys.add(graph.completion_key(frame, i, s, True))
    return leaf_keys, edge_keys


def storage_count(graph: MaxqGraph, abstract: bool = True) -> StorageCount:
    """
    Count the table entries a value store needs.

    With abstractions, a completion entry C(i, key, j) is counted when node i
    is live at some state whose image is `key` and child j can execute there.
    Nodes whose abstraction keeps their parameters are keyed over their full
    binding domain. Edges whose child always ends in the parent's goal need no
    entries. Leaves are keyed over states where some parent is live. Without
    abstractions every non-terminal state is counted for every binding and
    child.

    Args:
        graph: The task graph.
        abstract: Whether to apply the declared abstractions.

    Returns:
        StorageCount: Per-table counts.
    """
    analysis = analysis_for(graph)
    result = StorageCount(graph=graph.name, abstract=abstract)
    n_live_states = len(analysis.nonterminal)

    if not abstract:
        for name in graph.topological_order():
            node = graph.nodes[name]
            if node.is_primitive:
                result.items.append(StorageItem(table="V", node=name, entries=n_live_states))
                continue
            width = len(node.binding_domain())
            for i, edge in enumerate(node.children):
                result.items.append(
                    StorageItem(
                        table=_edge_table_name(graph, name, i),
                        node=name,
                        child=edge.child,
                        entries=n_live_states * width,
                    )
                )
        return result

    leaf_keys, edge_keys = abstract_table_keys(graph)

    for name in graph.topological_order():
        node = graph.nodes[name]
        if node.is_primitive:
            result.items.append(StorageItem(table="V", node=name, entries=len(leaf_keys[name])))
            continue
        for i, edge in enumerate(node.children):
            result.items.append(
                StorageItem(
                    table=_edge_table_name(graph, name, i),
                    node=name,
                    child=edge.child,
                    entries=len(edge_keys[(name, i)]),
                )
            )
    logger.debug(f"Storage for '{graph.name}' with abstractions: {result.total}")
    return result


def flat_storage_count(model: TabularModel) -> int:
    """Q-table entries for flat learning: non-terminal states × actions."""
    return (model.n_states - len(model.terminals)) * model.n_actions
