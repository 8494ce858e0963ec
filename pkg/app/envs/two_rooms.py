"""
Two-room gridworld used to show hierarchical versus recursive optimality.

The left room (columns 0..door_col-1) connects to the right room through
gaps in the dividing wall. Exit leaves the left room; GotoGoal reaches the
goal inside the right room. The states just past each gap carry the
configurable exit pseudo-rewards.
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config.logging_config import logger
from ..mdp.model import Outcome, TabularModel
from ..mdp.state import StateSpace, StateVariable
from ..taskgraph.graph_loader import FunctionRegistry, load_graph
from .base import Environment, absorbing_row
from .grid import GridMap

Cell = Tuple[int, int]


class TwoRoomsConfig(BaseModel):
    """Layout and pseudo-reward settings for the two-room world."""
    rows: int = 5
    left_cols: int = 3
    right_cols: int = 3
    door_rows: List[int] = Field(default_factory=lambda: [0, 4])
    goal: Cell = (0, 5)
    step_reward: float = -1.0
    include_west: bool = False
    exit_pseudo_rewards: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    start: str = "anywhere"
    gamma: float = 1.0

    @model_validator(mode="after")
    def check_layout(self) -> "TwoRoomsConfig":
        if len(self.exit_pseudo_rewards) != len(self.door_rows):
            raise ValueError("One exit pseudo-reward per door is required")
        if not self.left_cols <= self.goal[1] < self.left_cols + self.right_cols:
            raise ValueError("The goal must lie in the right room")
        if self.start not in ("anywhere", "left"):
            raise ValueError("start must be 'anywhere' or 'left'")
        return self

    @property
    def cols(self) -> int:
        return self.left_cols + self.right_cols


def two_rooms_graph_description(config: TwoRoomsConfig) -> Dict[str, Any]:
    moves = ["North", "South", "East"] + (["West"] if config.include_west else [])
    zero_pseudo = all(v == 0.0 for v in config.exit_pseudo_rewards)
    nodes: List[Dict[str, Any]] = [
        {"name": m, "primitive": True, "action": m, "abstraction": {"variables": []}} for m in moves
    ]
    nodes += [
        {
            "name": "Exit",
            "termination": "two_rooms.in_right_room",
            "goal": "two_rooms.in_right_room",
            "pseudo_reward": 0 if zero_pseudo else "fn:two_rooms.exit_pseudo_reward",
            "children": [{"node": m} for m in moves],
        },
        {
            "name": "GotoGoal",
            "termination": "two_rooms.in_left_room",
            "goal": "two_rooms.at_goal",
            "pseudo_reward": 0 if not config.include_west else -100,
            "children": [{"node": m} for m in moves],
        },
        {
            "name": "Root",
            "termination": "never",
            "goal": "two_rooms.at_goal",
            "pseudo_reward": 0,
            "children": [{"node": "Exit"}, {"node": "GotoGoal"}],
        },
    ]
    return {"name": "two-rooms", "root": "Root", "nodes": nodes}


def build_two_rooms(config: Optional[TwoRoomsConfig] = None) -> Environment:
    """Build the two-room model and its Exit/GotoGoal task graph."""
    config = config or TwoRoomsConfig()
    cols = config.cols
    boundary = config.left_cols
    walls = [
        ((r, boundary - 1), (r, boundary)) for r in range(config.rows) if r not in config.door_rows
    ]
    grid = GridMap(config.rows, cols, walls)
    actions = ["North", "South", "East"] + (["West"] if config.include_west else [])
    space = StateSpace([StateVariable("row", config.rows), StateVariable("col", cols)])
    goal = space.encode(list(config.goal))

    table = []
    for state in space:
        if state.index == goal:
            table.append(absorbing_row(state.index, len(actions)))
            continue
        row = []
        for action in actions:
            cell = grid.step((state["row"], state["col"]), action)
            row.append((Outcome(space.encode(list(cell)), 1.0, config.step_reward, (("step", config.step_reward),)),))
        table.append(row)

    weights = np.zeros(space.n_states)
    for state in space:
        if state.index == goal:
            continue
        if config.start == "left" and state["col"] >= boundary:
            continue
        weights[state.index] = 1.0

    model = TabularModel(
        name="two-rooms",
        space=space,
        actions=actions,
        outcomes=table,
        start_distribution=weights / weights.sum(),
        terminals=[goal],
        gamma=config.gamma,
    )

    door_values = {
        space.encode([r, boundary]): value for r, value in zip(config.door_rows, config.exit_pseudo_rewards)
    }
    goal_cell = tuple(config.goal)
    registry = FunctionRegistry()
    registry.register("two_rooms.in_right_room", lambda s, a: s["col"] >= boundary)
    registry.register("two_rooms.in_left_room", lambda s, a: s["col"] < boundary)
    registry.register("two_rooms.at_goal", lambda s, a: (s["row"], s["col"]) == goal_cell)
    registry.register("two_rooms.exit_pseudo_reward", lambda s, a: door_values.get(s.index, 0.0))

    description = two_rooms_graph_description(config)
    graph = load_graph(description, registry, space, actions, model.terminals)
    logger.info(f"Built two-rooms: {space.n_states} states, doors at rows {config.door_rows}")
    return Environment(name="two-rooms", model=model, graph=graph, config=config, description=description)


def exit_state(env: Environment, door: int) -> int:
    """State just inside the right room past the given door."""
    config: TwoRoomsConfig = env.config
    return env.model.space.encode([config.door_rows[door], config.left_cols])
