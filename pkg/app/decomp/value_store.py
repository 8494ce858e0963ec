"""
Tables of the MAXQ value decomposition: leaf values V(a, x), completion
values C(i, x, j) and their pseudo-reward-contaminated counterparts C̃,
all keyed by abstract images.
"""
import copy
import json
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

from ..config.logging_config import logger
from ..mdp.state import FactoredState
from ..utils.errors import ShieldedAccessError
from ..taskgraph.subtask import Frame, MaxqGraph

Key = Tuple
StateLike = Union[int, FactoredState]


class ValueStore:
    """
    Value tables for one task graph.

    With `abstract=True` entries are keyed by the declared abstractions,
    completion entries of terminating edges read as zero and are never
    stored. Reads and writes of completion entries at states where the node
    is terminated are rejected.
    """

    def __init__(
        self,
        graph: MaxqGraph,
        abstract: bool = True,
        initial_value: float = 0.0,
        initial_values: Optional[Dict[str, float]] = None,
    ):
        self.graph = graph
        self.abstract = abstract
        self.initial_value = initial_value
        self.initial_values: Dict[str, float] = dict(initial_values or {})
        self.v: Dict[str, Dict[Key, float]] = {n: {} for n in graph.primitive_nodes()}
        self.c: Dict[Tuple[str, int], Dict[Key, float]] = {}
        self.c_tilde: Dict[Tuple[str, int], Dict[Key, float]] = {}
        for name in graph.composite_nodes():
            for i in range(len(graph.nodes[name].children)):
                self.c[(name, i)] = {}
                self.c_tilde[(name, i)] = {}
        self.pseudo: Dict[str, Dict[Key, float]] = {}

    def _state(self, state: StateLike) -> FactoredState:
        if isinstance(state, FactoredState):
            return state
        return self.graph.space.decode(state)

    def initial(self, node: str) -> float:
        return self.initial_values.get(node, self.initial_value)

    # Leaf values

    def leaf_key(self, node: str, state: StateLike) -> Key:
        return self.graph.node_key(Frame(node), self._state(state), self.abstract)

    def read_v(self, node: str, state: StateLike) -> float:
        s = self._state(state)
        if s.index in self.graph.terminal_states:
            return 0.0
        return self.v[node].get(self.leaf_key(node, s), self.initial(node))

    def write_v(self, node: str, state: StateLike, value: float) -> None:
        self.v[node][self.leaf_key(node, state)] = value

    # Completion values

    def _check_active(self, frame: Frame, s: FactoredState, operation: str) -> None:
        if self.graph.terminated(frame, s):
            raise ShieldedAccessError(
                f"{operation} of C({frame.node}{list(frame.bindings)}) at state {s.index} where it is terminated"
            )

    def _table(self, frame: Frame, edge: int, tilde: bool) -> Dict[Key, float]:
        return (self.c_tilde if tilde else self.c)[(frame.node, edge)]

    def completion_key(self, frame: Frame, edge: int, state: StateLike) -> Key:
        return self.graph.completion_key(frame, edge, self._state(state), self.abstract)

    def is_structural_zero(self, frame: Frame, edge: int) -> bool:
        return self.abstract and self.graph.nodes[frame.node].children[edge].terminating

    def read_c(self, frame: Frame, edge: int, state: StateLike, tilde: bool = False) -> float:
        s = self._state(state)
        self._check_active(frame, s, "read")
        if self.is_structural_zero(frame, edge):
            return 0.0
        key = self.graph.completion_key(frame, edge, s, self.abstract)
        return self._table(frame, edge, tilde).get(key, self.initial(frame.node))

    def write_c(self, frame: Frame, edge: int, state: StateLike, value: float, tilde: bool = False) -> None:
        s = self._state(state)
        self._check_active(frame, s, "write")
        if self.is_structural_zero(frame, edge):
            return
        key = self.graph.completion_key(frame, edge, s, self.abstract)
        self._table(frame, edge, tilde)[key] = value

    # Learned pseudo-rewards

    def read_pseudo(self, frame: Frame, state: StateLike) -> float:
        """Learned pseudo-reward if one exists, else the graph's R̃."""
        s = self._state(state)
        table = self.pseudo.get(frame.node)
        if table is not None:
            key = self.graph.node_key(frame, s, self.abstract)
            if key in table:
                return table[key]
        return self.graph.pseudo_reward(frame, s)

    def write_pseudo(self, frame: Frame, state: StateLike, value: float) -> None:
        key = self.graph.node_key(frame, self._state(state), self.abstract)
        self.pseudo.setdefault(frame.node, {})[key] = value

    # Bookkeeping

    def entry_counts(self) -> Dict[str, int]:
        counts = {f"V:{n}": len(t) for n, t in self.v.items()}
        for (name, i), table in self.c.items():
            counts[f"C:{name}:{i}"] = len(table)
        return counts

    def entry_count(self) -> int:
        return sum(self.entry_counts().values())

    def copy(self) -> "ValueStore":
        clone = copy.copy(self)
        clone.v = {k: dict(t) for k, t in self.v.items()}
        clone.c = {k: dict(t) for k, t in self.c.items()}
        clone.c_tilde = {k: dict(t) for k, t in self.c_tilde.items()}
        clone.pseudo = {k: dict(t) for k, t in self.pseudo.items()}
        return clone

    def records(self) -> Iterator[Dict[str, Any]]:
        for node, table in self.v.items():
            for key, value in table.items():
                yield {"table": "V", "node": node, "edge": -1, "key": list(key), "value": value}
        for name, tables in (("C", self.c), ("Ctilde", self.c_tilde)):
            for (node, edge), table in tables.items():
                for key, value in table.items():
                    yield {"table": name, "node": node, "edge": edge, "key": list(key), "value": value}
        for node, table in self.pseudo.items():
            for key, value in table.items():
                yield {"table": "pseudo", "node": node, "edge": -1, "key": list(key), "value": value}


def save_store(store: ValueStore, path: Union[str, Path]) -> Path:
    """Write the store as JSON lines, one entry per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        header = {
            "graph": store.graph.name,
            "abstract": store.abstract,
            "initial_value": store.initial_value,
            "initial_values": store.initial_values,
        }
        f.write(json.dumps(header) + "\n")
        for record in store.records():
            f.write(json.dumps(record) + "\n")
    logger.info(f"Saved value store with {store.entry_count()} entries to {path}")
    return path


def load_store(graph: MaxqGraph, path: Union[str, Path]) -> ValueStore:
    """Read a store written by save_store for the same graph."""
    with open(path, "r") as f:
        header = json.loads(f.readline())
        store = ValueStore(
            graph,
            abstract=header["abstract"],
            initial_value=header["initial_value"],
            initial_values=header["initial_values"],
        )
        for line in f:
            record = json.loads(line)
            key = tuple(record["key"])
            if record["table"] == "V":
                store.v[record["node"]][key] = record["value"]
            elif record["table"] == "pseudo":
                store.pseudo.setdefault(record["node"], {})[key] = record["value"]
            else:
                tables = store.c if record["table"] == "C" else store.c_tilde
                tables[(record["node"], record["edge"])][key] = record["value"]
    return store
