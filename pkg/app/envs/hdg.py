"""
Landmark navigation grid (hierarchical distance to goal).

The state is (row, col, goal). Landmarks partition the grid into Manhattan
Voronoi cells; ties go to the landmark with the lower index. Two landmarks
are neighbours when their cells touch. The task graph first travels to the
landmark nearest the goal by hopping between neighbouring landmarks, then
finishes inside that landmark's cell.
"""
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config.logging_config import logger
from ..mdp.model import Outcome, TabularModel
from ..mdp.state import StateSpace, StateVariable
from ..taskgraph.graph_loader import FunctionRegistry, load_graph
from .base import Environment, absorbing_row
from .grid import MOVES, GridMap, manhattan

Cell = Tuple[int, int]

DEFAULT_LANDMARKS = [
    (0, 0), (0, 5), (1, 9), (2, 2), (3, 6), (4, 0),
    (5, 4), (5, 8), (7, 1), (7, 6), (9, 3), (9, 9),
]


class HdgConfig(BaseModel):
    """Grid size, landmark placement and abstraction mode."""
    rows: int = 10
    cols: int = 10
    landmarks: List[Cell] = Field(default_factory=lambda: list(DEFAULT_LANDMARKS))
    step_reward: float = -1.0
    approximate: bool = True
    gamma: float = 1.0

    @model_validator(mode="after")
    def check_landmarks(self) -> "HdgConfig":
        if not self.landmarks:
            raise ValueError("At least one landmark is required")
        if len(set(self.landmarks)) != len(self.landmarks):
            raise ValueError("Landmarks must be distinct")
        for r, c in self.landmarks:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ValueError(f"Landmark {(r, c)} lies outside the grid")
        return self


class LandmarkMap:
    """Voronoi cells and neighbour relation of the landmarks."""

    def __init__(self, config: HdgConfig):
        self.config = config
        self.landmarks: List[Cell] = [tuple(l) for l in config.landmarks]
        self.region: Dict[Cell, int] = {}
        for r in range(config.rows):
            for c in range(config.cols):
                distances = [manhattan((r, c), l) for l in self.landmarks]
                self.region[(r, c)] = int(np.argmin(distances))

        self.neighbours: List[Set[int]] = [set() for _ in self.landmarks]
        for (r, c), owner in self.region.items():
            for dr, dc in MOVES.values():
                other = self.region.get((r + dr, c + dc))
                if other is not None and other != owner:
                    self.neighbours[owner].add(other)

    def cell_of(self, landmark: int) -> List[Cell]:
        return [cell for cell, owner in self.region.items() if owner == landmark]

    def nearest_landmark(self, cell: Cell) -> int:
        return self.region[cell]


def hdg_graph_description(config: HdgConfig) -> Dict[str, Any]:
    n = len(config.landmarks)
    n_cells = config.rows * config.cols
    moves = list(MOVES)
    position = ["row", "col"]
    nodes: List[Dict[str, Any]] = [
        {"name": m, "primitive": True, "action": m, "abstraction": {"variables": []}} for m in moves
    ]
    nodes.append(
        {
            "name": "GotoLmk",
            "params": [{"name": "l", "cardinality": n}],
            "termination": "hdg.goto_landmark_done",
            "goal": "hdg.at_landmark",
            "pseudo_reward": "fn:hdg.landmark_pseudo_reward",
            "abstraction": {"variables": position, "params": ["l"]},
            "children": [{"node": m} for m in moves],
        }
    )

    lmk_children = []
    for l in range(n):
        edge: Dict[str, Any] = {"node": "GotoLmk", "bind": {"l": l}, "label": f"GotoLmk{l}"}
        if config.approximate:
            edge["abstraction"] = {"params": ["gl"]}
        lmk_children.append(edge)
    nodes.append(
        {
            "name": "GotoGoalLmk",
            "params": [{"name": "gl", "cardinality": n}],
            "termination": "hdg.goal_landmark_done",
            "goal": "hdg.at_goal_landmark",
            "pseudo_reward": 0,
            "abstraction": {"variables": position, "params": ["gl"]},
            "children": lmk_children,
        }
    )
    nodes.append(
        {
            "name": "GotoGoal",
            "params": [{"name": "g", "cardinality": n_cells}],
            "termination": "hdg.goto_goal_done",
            "goal": "hdg.at_bound_goal",
            "pseudo_reward": "fn:hdg.goal_pseudo_reward",
            "abstraction": {"variables": position, "params": ["g"]},
            "children": [{"node": m} for m in moves],
        }
    )

    root_lmk_edge: Dict[str, Any] = {"node": "GotoGoalLmk", "bind": {"gl": "fn:hdg.goal_landmark"}}
    root_goal_edge: Dict[str, Any] = {"node": "GotoGoal", "bind": {"g": "goal"}}
    if config.approximate:
        root_lmk_edge["abstraction"] = {"variables": ["goal"]}
        root_goal_edge["terminating"] = True
    nodes.append(
        {
            "name": "Root",
            "termination": "never",
            "goal": "hdg.at_goal",
            "pseudo_reward": 0,
            "children": [root_lmk_edge, root_goal_edge],
        }
    )
    return {"name": "hdg", "root": "Root", "nodes": nodes}


def build_hdg(config: Optional[HdgConfig] = None) -> Environment:
    """Build the landmark grid model and its task graph."""
    config = config or HdgConfig()
    grid = GridMap(config.rows, config.cols)
    lmap = LandmarkMap(config)
    n_cells = config.rows * config.cols
    space = StateSpace(
        [StateVariable("row", config.rows), StateVariable("col", config.cols), StateVariable("goal", n_cells)]
    )
    actions = list(MOVES)

    def cell_index(cell: Cell) -> int:
        return cell[0] * config.cols + cell[1]

    terminals = []
    table = []
    for state in space:
        cell = (state["row"], state["col"])
        if cell_index(cell) == state["goal"]:
            terminals.append(state.index)
            table.append(absorbing_row(state.index, len(actions)))
            continue
        row = []
        for action in actions:
            r, c = grid.step(cell, action)
            row.append(
                (Outcome(space.encode([r, c, state["goal"]]), 1.0, config.step_reward, (("step", config.step_reward),)),)
            )
        table.append(row)

    weights = np.ones(space.n_states)
    weights[terminals] = 0.0
    model = TabularModel(
        name="hdg",
        space=space,
        actions=actions,
        outcomes=table,
        start_distribution=weights / weights.sum(),
        terminals=terminals,
        gamma=config.gamma,
    )

    landmarks = lmap.landmarks
    cols = config.cols

    def position(s) -> Cell:
        return (s["row"], s["col"])

    def goal_cell(g: int) -> Cell:
        return (g // cols, g % cols)

    def in_landmark_reach(s, l: int) -> bool:
        owner = lmap.region[position(s)]
        return owner == l or owner in lmap.neighbours[l]

    def at_goal(s) -> bool:
        return cell_index(position(s)) == s["goal"]

    registry = FunctionRegistry()
    registry.register("hdg.at_goal", lambda s, a: at_goal(s))
    registry.register("hdg.goal_landmark", lambda s, a: lmap.region[goal_cell(s["goal"])])
    registry.register("hdg.at_landmark", lambda s, a: position(s) == landmarks[a["l"]])
    registry.register(
        "hdg.goto_landmark_done",
        lambda s, a: position(s) == landmarks[a["l"]] or not in_landmark_reach(s, a["l"]),
    )
    registry.register(
        "hdg.landmark_pseudo_reward",
        lambda s, a: 0.0 if position(s) == landmarks[a["l"]] or at_goal(s) else -100.0,
    )
    registry.register("hdg.at_goal_landmark", lambda s, a: position(s) == landmarks[a["gl"]])
    registry.register("hdg.goal_landmark_done", lambda s, a: position(s) == landmarks[a["gl"]])
    registry.register("hdg.at_bound_goal", lambda s, a: position(s) == goal_cell(a["g"]))
    registry.register(
        "hdg.goto_goal_done",
        lambda s, a: position(s) == goal_cell(a["g"])
        or lmap.region[position(s)] != lmap.region[goal_cell(a["g"])],
    )
    registry.register(
        "hdg.goal_pseudo_reward",
        lambda s, a: 0.0 if position(s) == goal_cell(a["g"]) or at_goal(s) else -100.0,
    )

    description = hdg_graph_description(config)
    graph = load_graph(description, registry, space, actions, model.terminals)
    logger.info(
        f"Built hdg: {space.n_states} states, {len(landmarks)} landmarks "
        f"({'approximate' if config.approximate else 'safe'} abstractions)"
    )
    return Environment(
        name="hdg",
        model=model,
        graph=graph,
        config=config,
        description=description,
        extras={"landmark_map": lmap},
    )
