"""
Taxi domain and its task graph, including the fickle and fuel variants.

State variables are (taxi_row, taxi_col, passenger, destination[, fuel]).
The passenger variable holds a landmark index while waiting, IN_TAXI once
aboard, and ARMED (fickle variant only) while aboard with the destination
change still pending. Delivery and running out of fuel lead to absorbing
sink states.
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config.logging_config import logger
from ..mdp.model import Outcome, TabularModel, merge_outcomes
from ..mdp.state import StateSpace, StateVariable
from ..taskgraph.graph_loader import FunctionRegistry, load_graph
from .base import Environment, absorbing_row
from .grid import GridMap, move_distribution

Cell = Tuple[int, int]

CLASSIC_WALLS = [
    ((0, 1), (0, 2)),
    ((1, 1), (1, 2)),
    ((3, 0), (3, 1)),
    ((4, 0), (4, 1)),
    ((3, 2), (3, 3)),
    ((4, 2), (4, 3)),
]
NAVIGATION_ACTIONS = ["North", "South", "East", "West"]


class TaxiConfig(BaseModel):
    """Taxi layout, rewards and variant switches."""
    rows: int = 5
    cols: int = 5
    landmarks: List[Cell] = Field(default_factory=lambda: [(0, 0), (0, 4), (4, 0), (4, 3)])
    landmark_names: List[str] = Field(default_factory=lambda: ["R", "G", "Y", "B"])
    walls: List[Tuple[Cell, Cell]] = Field(default_factory=lambda: list(CLASSIC_WALLS))
    step_reward: float = -1.0
    delivery_reward: float = 20.0
    illegal_reward: float = -10.0
    fickle: bool = False
    intended_move_probability: float = 0.8
    destination_change_probability: float = 0.3
    fuel: bool = False
    fuel_capacity: int = 14
    initial_fuel: Tuple[int, int] = (5, 12)
    fuel_station: Cell = (2, 2)
    out_of_fuel_reward: float = -20.0
    reward_split: bool = True
    gamma: float = 1.0

    @model_validator(mode="after")
    def check_layout(self) -> "TaxiConfig":
        if len(self.landmarks) < 2:
            raise ValueError("Taxi needs at least two landmarks")
        if len(set(self.landmarks)) != len(self.landmarks):
            raise ValueError("Landmarks must be distinct")
        if len(self.landmark_names) != len(self.landmarks):
            raise ValueError("One name per landmark is required")
        for r, c in list(self.landmarks) + [self.fuel_station]:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ValueError(f"Cell {(r, c)} lies outside the grid")
        low, high = self.initial_fuel
        if not 0 <= low <= high <= self.fuel_capacity:
            raise ValueError("Initial fuel range must lie within the tank capacity")
        if not 0.0 < self.intended_move_probability <= 1.0:
            raise ValueError("Intended move probability must be in (0, 1]")
        return self


class _TaxiDynamics:
    """Builds outcome lists for every (state, action) pair."""

    def __init__(self, config: TaxiConfig, space: StateSpace, actions: List[str]):
        self.config = config
        self.space = space
        self.actions = actions
        self.grid = GridMap(config.rows, config.cols, config.walls)
        self.n = len(config.landmarks)
        self.in_taxi = self.n
        self.armed = self.n + 1
        self.delivered = space.sink_index("delivered")
        self.out_of_fuel = space.sink_index("out_of_fuel") if config.fuel else None

    def encode(self, values: Dict[str, int]) -> int:
        return self.space.encode_named(**values)

    def navigate(self, state, direction: str) -> Tuple[Outcome, ...]:
        config = self.config
        step = (("step", config.step_reward),)
        if config.fuel and state["fuel"] == 0:
            components = (("step", config.step_reward), ("out_of_fuel", config.out_of_fuel_reward))
            return (Outcome(self.out_of_fuel, 1.0, config.step_reward + config.out_of_fuel_reward, components),)

        cell = (state["taxi_row"], state["taxi_col"])
        intended = config.intended_move_probability if config.fickle else 1.0
        results = []
        for heading, p in move_distribution(direction, intended):
            new_cell = self.grid.step(cell, heading)
            values = state.as_dict()
            values["taxi_row"], values["taxi_col"] = new_cell
            if config.fuel:
                values["fuel"] -= 1
            if values["passenger"] == self.armed and new_cell != cell:
                values["passenger"] = self.in_taxi
                change = config.destination_change_probability
                others = [d for d in range(self.n) if d != state["destination"]]
                results.append(Outcome(self.encode(values), p * (1.0 - change), config.step_reward, step))
                for d in others:
                    changed = dict(values, destination=d)
                    results.append(Outcome(self.encode(changed), p * change / len(others), config.step_reward, step))
            else:
                results.append(Outcome(self.encode(values), p, config.step_reward, step))
        return merge_outcomes(results)

    def illegal(self, state) -> Tuple[Outcome, ...]:
        reward = self.config.illegal_reward
        return (Outcome(state.index, 1.0, reward, (("illegal", reward),)),)

    def pickup(self, state) -> Tuple[Outcome, ...]:
        passenger = state["passenger"]
        cell = (state["taxi_row"], state["taxi_col"])
        if passenger < self.n and tuple(self.config.landmarks[passenger]) == cell:
            values = state.as_dict()
            values["passenger"] = self.armed if self.config.fickle else self.in_taxi
            reward = self.config.step_reward
            return (Outcome(self.encode(values), 1.0, reward, (("step", reward),)),)
        return self.illegal(state)

    def putdown(self, state) -> Tuple[Outcome, ...]:
        passenger = state["passenger"]
        cell = (state["taxi_row"], state["taxi_col"])
        destination = tuple(self.config.landmarks[state["destination"]])
        if passenger >= self.n and cell == destination:
            components = (("step", self.config.step_reward), ("delivery", self.config.delivery_reward))
            reward = self.config.step_reward + self.config.delivery_reward
            return (Outcome(self.delivered, 1.0, reward, components),)
        return self.illegal(state)

    def fillup(self, state) -> Tuple[Outcome, ...]:
        cell = (state["taxi_row"], state["taxi_col"])
        if cell == tuple(self.config.fuel_station):
            values = state.as_dict()
            values["fuel"] = self.config.fuel_capacity
            reward = self.config.step_reward
            return (Outcome(self.encode(values), 1.0, reward, (("step", reward),)),)
        return self.illegal(state)

    def outcome_table(self) -> List[List[Tuple[Outcome, ...]]]:
        table = []
        for state in self.space:
            if state.is_sink:
                table.append(absorbing_row(state.index, len(self.actions)))
                continue
            row = []
            for action in self.actions:
                if action in NAVIGATION_ACTIONS:
                    row.append(self.navigate(state, action))
                elif action == "Pickup":
                    row.append(self.pickup(state))
                elif action == "Putdown":
                    row.append(self.putdown(state))
                else:
                    row.append(self.fillup(state))
            table.append(row)
        return table

    def start_distribution(self) -> np.ndarray:
        weights = np.zeros(self.space.n_states)
        low, high = self.config.initial_fuel
        for state in self.space:
            if state.is_sink or state["passenger"] >= self.n:
                continue
            if self.config.fuel and not low <= state["fuel"] <= high:
                continue
            weights[state.index] = 1.0
        return weights / weights.sum()


def _register_predicates(config: TaxiConfig, registry: FunctionRegistry) -> None:
    n = len(config.landmarks)
    landmarks = [tuple(c) for c in config.landmarks]
    station = tuple(config.fuel_station)

    def cell(s) -> Cell:
        return (s["taxi_row"], s["taxi_col"])

    def target(t: int) -> Cell:
        return landmarks[t] if t < n else station

    registry.register("taxi.delivered", lambda s, a: s.sink == "delivered")
    registry.register("taxi.get_done", lambda s, a: s.is_sink or s["passenger"] >= n)
    registry.register("taxi.passenger_aboard", lambda s, a: not s.is_sink and s["passenger"] >= n)
    registry.register("taxi.put_done", lambda s, a: s.is_sink or s["passenger"] < n)
    registry.register("taxi.at_target", lambda s, a: s.is_sink or cell(s) == target(a["t"]))
    registry.register("taxi.reached_target", lambda s, a: not s.is_sink and cell(s) == target(a["t"]))
    registry.register(
        "taxi.pickup_legal",
        lambda s, a: not s.is_sink and s["passenger"] < n and landmarks[s["passenger"]] == cell(s),
    )
    registry.register(
        "taxi.putdown_legal",
        lambda s, a: not s.is_sink and s["passenger"] >= n and landmarks[s["destination"]] == cell(s),
    )
    if config.fuel:
        capacity = config.fuel_capacity
        registry.register("taxi.tank_full", lambda s, a: s.is_sink or s["fuel"] == capacity)
        registry.register("taxi.refuelled", lambda s, a: not s.is_sink and s["fuel"] == capacity)
        registry.register("taxi.at_station", lambda s, a: not s.is_sink and cell(s) == station)


def taxi_graph_description(config: TaxiConfig) -> Dict[str, Any]:
    """Declarative task graph for the taxi variants."""
    n_targets = len(config.landmarks) + (1 if config.fuel else 0)
    location = ["taxi_row", "taxi_col"]
    leaf = {"variables": []}

    nodes: List[Dict[str, Any]] = [
        {"name": name, "primitive": True, "action": name, "abstraction": leaf}
        for name in NAVIGATION_ACTIONS
    ]
    nodes += [
        {"name": "Pickup", "primitive": True, "action": "Pickup",
         "abstraction": {"features": ["taxi.pickup_legal"]}},
        {"name": "Putdown", "primitive": True, "action": "Putdown",
         "abstraction": {"features": ["taxi.putdown_legal"]}},
        {
            "name": "Navigate",
            "params": [{"name": "t", "cardinality": n_targets}],
            "termination": "taxi.at_target",
            "goal": "taxi.reached_target",
            "pseudo_reward": 0,
            "abstraction": {"variables": location, "params": ["t"]},
            "children": [{"node": name} for name in NAVIGATION_ACTIONS],
        },
        {
            "name": "Get",
            "termination": "taxi.get_done",
            "goal": "taxi.passenger_aboard",
            "pseudo_reward": 0,
            "abstraction": {"variables": location + ["passenger"]},
            "children": [
                {"node": "Navigate", "bind": {"t": "passenger"}, "label": "NavigateForGet",
                 "abstraction": {"variables": ["passenger"]}},
                {"node": "Pickup"},
            ],
        },
        {
            "name": "Put",
            "termination": "taxi.put_done",
            "goal": "taxi.delivered",
            "pseudo_reward": 0,
            "abstraction": {"variables": location + ["passenger", "destination"]},
            "children": [
                {"node": "Navigate", "bind": {"t": "destination"}, "label": "NavigateForPut",
                 "abstraction": {"variables": ["passenger", "destination"] if config.fickle else ["destination"]}},
                {"node": "Putdown"},
            ],
        },
    ]

    root_children: List[Dict[str, Any]]
    if config.fuel:
        nodes += [
            {"name": "Fillup", "primitive": True, "action": "Fillup",
             "abstraction": {"features": ["taxi.at_station"]}},
            {
                "name": "Refuel",
                "termination": "taxi.tank_full",
                "goal": "taxi.refuelled",
                "pseudo_reward": 0,
                "abstraction": {"variables": location + ["fuel"]},
                "children": [
                    {"node": "Navigate", "bind": {"t": n_targets - 1}, "label": "NavigateForRefuel"},
                    {"node": "Fillup"},
                ],
            },
        ]
        root_children = [{"node": "Get"}, {"node": "Put"}, {"node": "Refuel"}]
    else:
        root_children = [
            {"node": "Get", "abstraction": {"variables": ["passenger", "destination"]}},
            {"node": "Put", "terminating": True},
        ]

    nodes.append(
        {
            "name": "Root",
            "termination": "never",
            "goal": "taxi.delivered",
            "pseudo_reward": 0,
            "children": root_children,
        }
    )

    name = "taxi" + ("-fickle" if config.fickle else "") + ("-fuel" if config.fuel else "")
    description: Dict[str, Any] = {"name": name, "root": "Root", "nodes": nodes}
    if config.fuel and config.reward_split:
        description["reward_split"] = {"out_of_fuel": "Root"}
    return description


def build_taxi(config: Optional[TaxiConfig] = None) -> Environment:
    """
    Build the taxi model and task graph.

    Args:
        config: Layout and variant settings; defaults reproduce the classic taxi.

    Returns:
        Environment: Model, graph and the graph description.
    """
    config = config or TaxiConfig()
    n = len(config.landmarks)
    variables = [
        StateVariable("taxi_row", config.rows),
        StateVariable("taxi_col", config.cols),
        StateVariable("passenger", n + (2 if config.fickle else 1)),
        StateVariable("destination", n),
    ]
    sinks = ["delivered"]
    actions = NAVIGATION_ACTIONS + ["Pickup", "Putdown"]
    if config.fuel:
        variables.append(StateVariable("fuel", config.fuel_capacity + 1))
        sinks.append("out_of_fuel")
        actions = actions + ["Fillup"]
    space = StateSpace(variables, sinks)

    dynamics = _TaxiDynamics(config, space, actions)
    description = taxi_graph_description(config)
    model = TabularModel(
        name=description["name"],
        space=space,
        actions=actions,
        outcomes=dynamics.outcome_table(),
        start_distribution=dynamics.start_distribution(),
        terminals=[space.sink_index(label) for label in sinks],
        gamma=config.gamma,
    )

    registry = FunctionRegistry()
    _register_predicates(config, registry)
    graph = load_graph(description, registry, space, actions, model.terminals)
    logger.info(f"Built {model.name}: {space.n_factored} states, {len(actions)} actions")
    return Environment(name=model.name, model=model, graph=graph, config=config, description=description)
