"""
Factored state spaces with a bijective flat index.
"""
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np


class StateVariable(NamedTuple):
    """A named discrete state variable."""
    name: str
    cardinality: int


class FactoredState:
    """
    A decoded state. Sink states carry a label instead of variable values.
    """

    __slots__ = ("index", "values", "sink", "_positions")

    def __init__(
        self,
        index: int,
        values: Optional[Tuple[int, ...]],
        positions: Mapping[str, int],
        sink: Optional[str] = None,
    ):
        self.index = index
        self.values = values
        self.sink = sink
        self._positions = positions

    @property
    def is_sink(self) -> bool:
        return self.sink is not None

    def __getitem__(self, name: str) -> int:
        if self.values is None:
            raise KeyError(f"Sink state '{self.sink}' has no variable '{name}'")
        return self.values[self._positions[name]]

    def as_dict(self) -> Dict[str, int]:
        if self.values is None:
            return {}
        return {name: self.values[pos] for name, pos in self._positions.items()}

    def project(self, names: Sequence[str]) -> Tuple:
        """Values of the named variables, or the sink label for sinks."""
        if self.values is None:
            return ("<sink>", self.sink)
        return tuple(self.values[self._positions[name]] for name in names)

    def __eq__(self, other) -> bool:
        return isinstance(other, FactoredState) and other.index == self.index

    def __hash__(self) -> int:
        return hash(self.index)

    def __repr__(self) -> str:
        if self.is_sink:
            return f"FactoredState({self.index}, sink={self.sink!r})"
        return f"FactoredState({self.index}, {self.as_dict()})"


class StateSpace:
    """
    Ordered state variables with a mixed-radix flat index. The first variable
    is the most significant digit. Named sink states follow the factored block.
    """

    def __init__(self, variables: Sequence[StateVariable], sinks: Sequence[str] = ()):
        if not variables:
            raise ValueError("A state space needs at least one variable")
        for var in variables:
            if var.cardinality < 1:
                raise ValueError(f"Variable '{var.name}' has non-positive cardinality")
        self.variables: Tuple[StateVariable, ...] = tuple(variables)
        self.sinks: Tuple[str, ...] = tuple(sinks)
        self.positions: Dict[str, int] = {var.name: i for i, var in enumerate(self.variables)}
        if len(self.positions) != len(self.variables):
            raise ValueError("Duplicate state variable names")

        strides = []
        stride = 1
        for var in reversed(self.variables):
            strides.append(stride)
            stride *= var.cardinality
        self.strides: Tuple[int, ...] = tuple(reversed(strides))
        self.n_factored = stride
        self.n_states = stride + len(self.sinks)
        self._decoded: Optional[List[FactoredState]] = None

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(var.name for var in self.variables)

    def cardinality(self, name: str) -> int:
        return self.variables[self.positions[name]].cardinality

    def encode(self, values: Sequence[int]) -> int:
        """
        Flat index of a full assignment.

        Args:
            values: One value per variable, in declaration order.

        Returns:
            int: Flat state index.
        """
        if len(values) != len(self.variables):
            raise ValueError(f"Expected {len(self.variables)} values, got {len(values)}")
        index = 0
        for value, var, stride in zip(values, self.variables, self.strides):
            if not 0 <= value < var.cardinality:
                raise ValueError(f"Value {value} out of range for '{var.name}'")
            index += value * stride
        return index

    def encode_named(self, **values: int) -> int:
        return self.encode([values[name] for name in self.names])

    def sink_index(self, label: str) -> int:
        try:
            return self.n_factored + self.sinks.index(label)
        except ValueError:
            raise KeyError(f"Unknown sink state '{label}'")

    def _decode_uncached(self, index: int) -> FactoredState:
        if index >= self.n_factored:
            return FactoredState(index, None, self.positions, sink=self.sinks[index - self.n_factored])
        values = []
        rest = index
        for var, stride in zip(self.variables, self.strides):
            values.append(rest // stride)
            rest %= stride
        return FactoredState(index, tuple(values), self.positions)

    def decode(self, index: int) -> FactoredState:
        if not 0 <= index < self.n_states:
            raise IndexError(f"State index {index} out of range")
        return self.all_states()[index]

    def all_states(self) -> List[FactoredState]:
        if self._decoded is None:
            self._decoded = [self._decode_uncached(i) for i in range(self.n_states)]
        return self._decoded

    def __iter__(self) -> Iterator[FactoredState]:
        return iter(self.all_states())

    def __len__(self) -> int:
        return self.n_states

    def value_array(self, name: str) -> np.ndarray:
        """Per-state values of one variable; sinks get -1."""
        pos = self.positions[name]
        return np.array(
            [-1 if s.values is None else s.values[pos] for s in self.all_states()], dtype=int
        )
