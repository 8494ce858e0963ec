"""
Grid movement shared by the navigation domains.
"""
from typing import FrozenSet, Iterable, List, Tuple

Cell = Tuple[int, int]

MOVES = {
    "North": (-1, 0),
    "South": (1, 0),
    "East": (0, 1),
    "West": (0, -1),
}

# Perpendicular slips, counter-clockwise and clockwise of the intended heading
LEFT_OF = {"North": "West", "West": "South", "South": "East", "East": "North"}
RIGHT_OF = {"North": "East", "East": "South", "South": "West", "West": "North"}


class GridMap:
    """
    Rectangular grid with walls between adjacent cells. Moving into a wall
    or off the grid leaves the agent in place.
    """

    def __init__(self, rows: int, cols: int, walls: Iterable[Tuple[Cell, Cell]] = ()):
        self.rows = rows
        self.cols = cols
        self.walls: FrozenSet[FrozenSet[Cell]] = frozenset(
            frozenset((tuple(a), tuple(b))) for a, b in walls
        )

    def inside(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols

    def blocked(self, a: Cell, b: Cell) -> bool:
        return frozenset((a, b)) in self.walls

    def step(self, cell: Cell, direction: str) -> Cell:
        dr, dc = MOVES[direction]
        target = (cell[0] + dr, cell[1] + dc)
        if not self.inside(target) or self.blocked(cell, target):
            return cell
        return target

    def cells(self) -> List[Cell]:
        return [(r, c) for r in range(self.rows) for c in range(self.cols)]

    def neighbours(self, cell: Cell) -> List[Cell]:
        return [self.step(cell, d) for d in MOVES if self.step(cell, d) != cell]


def move_distribution(direction: str, intended_probability: float) -> List[Tuple[str, float]]:
    """Headings actually taken when `direction` is commanded."""
    if intended_probability >= 1.0:
        return [(direction, 1.0)]
    slip = (1.0 - intended_probability) / 2.0
    return [
        (direction, intended_probability),
        (LEFT_OF[direction], slip),
        (RIGHT_OF[direction], slip),
    ]


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])
