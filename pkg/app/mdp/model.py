"""
Tabular Markov decision process with named reward components.
"""
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ..utils.errors import InvalidActionError, ModelDefinitionError, TerminalStateError
from .state import StateSpace

PROBABILITY_TOLERANCE = 1e-12


class Outcome(NamedTuple):
    """One possible result of taking an action."""
    next_state: int
    probability: float
    reward: float
    components: Tuple[Tuple[str, float], ...] = ()

    def component_dict(self) -> Dict[str, float]:
        if not self.components:
            return {"step": self.reward}
        return dict(self.components)


class ActionOrder:
    """
    Fixed total order over a finite set of choices, used to break ties.
    Lower rank wins.
    """

    def __init__(self, ranks: Sequence[int]):
        self.ranks = np.asarray(ranks, dtype=int)
        if sorted(self.ranks.tolist()) != list(range(len(self.ranks))):
            raise ValueError("Action ranks must be a permutation of 0..n-1")

    @classmethod
    def identity(cls, n: int) -> "ActionOrder":
        return cls(list(range(n)))

    @classmethod
    def from_sequence(cls, order: Sequence[int]) -> "ActionOrder":
        """Build from the actions listed best-first."""
        ranks = [0] * len(order)
        for rank, action in enumerate(order):
            ranks[action] = rank
        return cls(ranks)

    def rank(self, action: int) -> int:
        return int(self.ranks[action])

    def __len__(self) -> int:
        return len(self.ranks)


class TabularModel:
    """
    Finite MDP given by explicit outcome lists per (state, action).

    Terminal states are absorbing with zero reward under every action.
    """

    def __init__(
        self,
        name: str,
        space: StateSpace,
        actions: Sequence[str],
        outcomes: List[List[Tuple[Outcome, ...]]],
        start_distribution: np.ndarray,
        terminals: Iterable[int],
        gamma: float = 1.0,
    ):
        self.name = name
        self.space = space
        self.actions: Tuple[str, ...] = tuple(actions)
        self.outcomes = outcomes
        self.start_distribution = np.asarray(start_distribution, dtype=float)
        self.terminals: FrozenSet[int] = frozenset(int(s) for s in terminals)
        self.gamma = float(gamma)
        self._matrices: Optional[List[sparse.csr_matrix]] = None
        self._rewards: Optional[np.ndarray] = None
        self._cumulative: Dict[Tuple[int, int], np.ndarray] = {}
        self._terminal_mask: Optional[np.ndarray] = None
        self.check()

    @property
    def n_states(self) -> int:
        return self.space.n_states

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise InvalidActionError(name)

    def is_terminal(self, state: int) -> bool:
        return state in self.terminals

    @property
    def terminal_mask(self) -> np.ndarray:
        if self._terminal_mask is None:
            mask = np.zeros(self.n_states, dtype=bool)
            mask[list(self.terminals)] = True
            self._terminal_mask = mask
        return self._terminal_mask

    def outcomes_for(self, state: int, action: int) -> Tuple[Outcome, ...]:
        if not 0 <= action < self.n_actions:
            raise InvalidActionError(action)
        return self.outcomes[state][action]

    def check(self) -> None:
        """
        Validate probabilities, absorbing terminals and the start distribution.

        Raises:
            ModelDefinitionError: On the first violated invariant.
        """
        if not 0.0 <= self.gamma <= 1.0:
            raise ModelDefinitionError(f"Discount {self.gamma} outside [0, 1]")
        if len(self.outcomes) != self.n_states:
            raise ModelDefinitionError(
                f"Outcome table has {len(self.outcomes)} rows for {self.n_states} states"
            )
        if self.start_distribution.shape != (self.n_states,):
            raise ModelDefinitionError("Start distribution has the wrong shape")
        if abs(self.start_distribution.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ModelDefinitionError("Start distribution does not sum to 1")
        if self.start_distribution[list(self.terminals)].sum() > 0:
            raise ModelDefinitionError("Start distribution puts mass on terminal states")

        for s, row in enumerate(self.outcomes):
            if len(row) != self.n_actions:
                raise ModelDefinitionError(f"State {s} lists {len(row)} actions")
            for a, outs in enumerate(row):
                total = sum(o.probability for o in outs)
                if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                    raise ModelDefinitionError(
                        f"Probabilities for state {s}, action {self.actions[a]} sum to {total}"
                    )
                if s in self.terminals:
                    if any(o.next_state != s or o.reward != 0.0 for o in outs if o.probability > 0):
                        raise ModelDefinitionError(f"Terminal state {s} is not absorbing")

    @property
    def transition_matrices(self) -> List[sparse.csr_matrix]:
        """One sparse S×S matrix per action."""
        if self._matrices is None:
            n = self.n_states
            matrices = []
            for a in range(self.n_actions):
                rows, cols, data = [], [], []
                for s in range(n):
                    for o in self.outcomes[s][a]:
                        if o.probability > 0:
                            rows.append(s)
                            cols.append(o.next_state)
                            data.append(o.probability)
                matrices.append(sparse.csr_matrix((data, (rows, cols)), shape=(n, n)))
            self._matrices = matrices
        return self._matrices

    @property
    def expected_rewards(self) -> np.ndarray:
        """S×A array of expected one-step rewards."""
        if self._rewards is None:
            r = np.zeros((self.n_states, self.n_actions))
            for s in range(self.n_states):
                for a in range(self.n_actions):
                    r[s, a] = sum(o.probability * o.reward for o in self.outcomes[s][a])
            self._rewards = r
        return self._rewards

    def start_states(self) -> List[int]:
        return [int(s) for s in np.flatnonzero(self.start_distribution > 0)]

    def cumulative(self, state: int, action: int) -> np.ndarray:
        key = (state, action)
        if key not in self._cumulative:
            probs = np.array([o.probability for o in self.outcomes_for(state, action)])
            self._cumulative[key] = np.cumsum(probs)
        return self._cumulative[key]


def sample_transition(
    model: TabularModel, state: int, action: int, rng: np.random.Generator
) -> Outcome:
    """
    Draw one outcome of taking `action` in `state`.

    Args:
        model: The tabular model.
        state: Current state index.
        action: Primitive action index.
        rng: Seeded random stream; identical streams give identical draws.

    Returns:
        Outcome: The sampled outcome (probability field is the outcome's own).
    """
    if model.is_terminal(state):
        raise TerminalStateError(state)
    outs = model.outcomes_for(state, action)
    if len(outs) == 1:
        return outs[0]
    cumulative = model.cumulative(state, action)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return outs[min(index, len(outs) - 1)]


def sample_start(model: TabularModel, rng: np.random.Generator) -> int:
    """Draw an initial state from the start distribution."""
    return int(rng.choice(model.n_states, p=model.start_distribution))


def merge_outcomes(outcomes: Iterable[Outcome]) -> Tuple[Outcome, ...]:
    """
    Combine outcomes sharing next state and reward components, keeping the
    first-seen order so sampling stays reproducible.
    """
    merged: Dict[Tuple[int, float, Tuple[Tuple[str, float], ...]], float] = {}
    for o in outcomes:
        if o.probability <= 0:
            continue
        key = (o.next_state, o.reward, o.components)
        merged[key] = merged.get(key, 0.0) + o.probability
    return tuple(
        Outcome(next_state, probability, reward, components)
        for (next_state, reward, components), probability in merged.items()
    )
