"""
Declarative task-graph descriptions.

A description is a JSON-compatible dictionary:

    {
      "name": "taxi",
      "root": "Root",
      "reward_split": {"out_of_fuel": "Root"},
      "nodes": [
        {"name": "North", "primitive": true, "action": "North",
         "abstraction": {"variables": []}},
        {"name": "Navigate", "params": [{"name": "t", "cardinality": 4}],
         "termination": "taxi.at_target", "goal": "taxi.at_target",
         "pseudo_reward": 0,
         "abstraction": {"variables": ["taxi_row", "taxi_col"], "params": ["t"]},
         "children": [{"node": "North"}, ...]},
        ...
      ]
    }

Predicates, features, pseudo-reward functions and computed bindings are
referenced by name and looked up in a FunctionRegistry. Binding expressions
are a state variable name, a parent parameter name, an integer literal or
"fn:<registered name>".
"""
import json
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Mapping, Optional, Sequence, Union

from ..config.logging_config import logger
from ..mdp.state import StateSpace
from ..utils.errors import GraphDefinitionError
from .subtask import (
    DEFAULT_NON_GOAL_PSEUDO_REWARD,
    Abstraction,
    ChildEdge,
    Feature,
    MaxqGraph,
    Parameter,
    RewardSplit,
    SubtaskDef,
)


class FunctionRegistry:
    """
    Named callables of signature (state, args) used by graph descriptions.
    """

    def __init__(self):
        self._functions: Dict[str, Callable] = {
            "never": lambda s, a: False,
        }

    def register(self, name: str, fn: Callable) -> Callable:
        if name in self._functions:
            raise GraphDefinitionError(f"Function '{name}' registered twice")
        self._functions[name] = fn
        return fn

    def function(self, name: str) -> Callable:
        try:
            return self._functions[name]
        except KeyError:
            raise GraphDefinitionError(f"Unknown registered function '{name}'")

    def __contains__(self, name: str) -> bool:
        return name in self._functions


def _binding_function(
    expression: Union[str, int],
    parent_params: Sequence[str],
    space: StateSpace,
    registry: FunctionRegistry,
) -> Callable:
    if isinstance(expression, int):
        return lambda s, a, value=expression: value
    if expression.startswith("fn:"):
        return registry.function(expression[3:])
    if expression in parent_params:
        return lambda s, a, name=expression: a[name]
    if expression in space.positions:
        return lambda s, a, name=expression: s[name]
    raise GraphDefinitionError(f"Cannot resolve binding expression '{expression}'")


def _abstraction(section: Optional[Mapping[str, Any]], registry: FunctionRegistry) -> Optional[Abstraction]:
    if section is None:
        return None
    features = tuple(
        Feature(name=name, fn=registry.function(name)) for name in section.get("features", [])
    )
    return Abstraction(
        variables=tuple(section.get("variables", [])),
        params=tuple(section.get("params", [])),
        features=features,
    )


def _pseudo_reward(value: Any, registry: FunctionRegistry):
    if value is None:
        return DEFAULT_NON_GOAL_PSEUDO_REWARD
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value.startswith("fn:"):
        return registry.function(value[3:])
    raise GraphDefinitionError(f"Invalid pseudo-reward specification: {value!r}")


def load_graph(
    description: Mapping[str, Any],
    registry: FunctionRegistry,
    space: StateSpace,
    actions: Sequence[str],
    terminal_states: FrozenSet[int],
) -> MaxqGraph:
    """
    Build a MaxqGraph from a declarative description.

    Args:
        description: Graph description dictionary.
        registry: Registered predicates and functions.
        space: State space of the model the graph runs on.
        actions: Model action names; primitive nodes reference them by name.
        terminal_states: Terminal state indices of the model.

    Returns:
        MaxqGraph: The loaded graph.

    Raises:
        GraphDefinitionError: On unknown names or malformed entries.
    """
    if "nodes" not in description or "root" not in description:
        raise GraphDefinitionError("Graph description needs 'nodes' and 'root'")

    raw_nodes = {n["name"]: n for n in description["nodes"]}
    nodes = []
    for raw in description["nodes"]:
        name = raw["name"]
        params = tuple(Parameter(p["name"], int(p["cardinality"])) for p in raw.get("params", []))

        if raw.get("primitive", False):
            action_name = raw.get("action", name)
            if action_name not in actions:
                raise GraphDefinitionError(f"Primitive '{name}' names unknown action '{action_name}'")
            if raw.get("children"):
                raise GraphDefinitionError(f"Primitive '{name}' cannot have children")
            nodes.append(
                SubtaskDef(
                    name=name,
                    abstraction=_abstraction(raw.get("abstraction"), registry),
                    action=list(actions).index(action_name),
                )
            )
            continue

        parent_params = [p.name for p in params]
        children = []
        for raw_edge in raw.get("children", []):
            child_name = raw_edge["node"]
            if child_name not in raw_nodes:
                raise GraphDefinitionError(f"Node '{name}' has unknown child '{child_name}'")
            bindings = tuple(
                (param, _binding_function(expr, parent_params, space, registry))
                for param, expr in raw_edge.get("bind", {}).items()
            )
            children.append(
                ChildEdge(
                    child=child_name,
                    bindings=bindings,
                    result_abstraction=_abstraction(raw_edge.get("abstraction"), registry),
                    terminating=bool(raw_edge.get("terminating", False)),
                    label=raw_edge.get("label", child_name),
                )
            )

        termination = raw.get("termination")
        goal = raw.get("goal")
        nodes.append(
            SubtaskDef(
                name=name,
                params=params,
                termination=registry.function(termination) if termination else None,
                goal=registry.function(goal) if goal else None,
                pseudo_reward=_pseudo_reward(raw.get("pseudo_reward"), registry),
                abstraction=_abstraction(raw.get("abstraction"), registry),
                children=tuple(children),
            )
        )

    split = description.get("reward_split")
    graph = MaxqGraph(
        name=description.get("name", "graph"),
        nodes=nodes,
        root=description["root"],
        space=space,
        terminal_states=terminal_states,
        reward_split=RewardSplit(split) if split else None,
    )
    logger.debug(f"Loaded task graph '{graph.name}' with {len(nodes)} nodes")
    return graph


def load_graph_file(
    path: Union[str, Path],
    registry: FunctionRegistry,
    space: StateSpace,
    actions: Sequence[str],
    terminal_states: FrozenSet[int],
) -> MaxqGraph:
    """Load a graph description from a JSON file."""
    try:
        with open(path, "r") as f:
            description = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise GraphDefinitionError(f"Cannot read graph description {path}: {e}") from e
    return load_graph(description, registry, space, actions, terminal_states)
