"""
Online MAXQ learners.

`MaxqLearner` runs MAXQ-0 or MAXQ-Q episodes over a task graph, updating a
ValueStore in place. Both algorithms share the recursive interpreter below:
primitives update V by stochastic averaging, composites loop until their
termination predicate holds and update their completion tables after every
completed child invocation. MAXQ-Q keeps two completion tables, C̃ (with
pseudo-rewards, used to act) and C (without, used to report values).
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..config.logging_config import logger
from ..decomp.evaluator import greedy_edge, v_of
from ..decomp.value_store import ValueStore
from ..execution.trajectory import EpisodeStats
from ..mdp.model import TabularModel, sample_start, sample_transition
from ..mdp.state import FactoredState
from ..taskgraph.subtask import Frame, MaxqGraph
from ..utils.errors import ConfigError, GraphDefinitionError, PseudoRewardError, StepCapExceeded
from .config import LearnerConfig
from .exploration import ExplorationState
from .pseudo_reward import adapt_pseudo_reward

DONE = "done"
INTERRUPTED = "interrupted"
ROUTED = "routed"

_UNSET = object()


class UpdateEvent(NamedTuple):
    """One completion update, reported to learner listeners."""
    frame: Frame
    edge: int
    state: int
    exponent: int
    target: float


@dataclass
class _Step:
    state: int
    components: Dict[str, float]


@dataclass
class _Invocation:
    steps: List[_Step]
    final: int
    status: str = DONE
    owner: Optional[str] = None


def choose_action(
    graph: MaxqGraph,
    store: ValueStore,
    exploration: ExplorationState,
    frame: Frame,
    state: FactoredState,
    rng: np.random.Generator,
    tilde: bool = True,
) -> Tuple[int, Frame]:
    """
    Explore among the children of `frame` executable at `state`.

    Children are scored by V + C̃ (or V + C when `tilde` is off) and handed
    to the exploration policy keyed by the node's abstract image of `state`,
    so states sharing an image get the same choice distribution.

    Returns:
        Tuple[int, Frame]: Chosen edge and the child frame it binds.

    Raises:
        GraphDefinitionError: If no child can execute.
    """
    options = graph.executable_edges(frame, state)
    if not options:
        raise GraphDefinitionError(f"No child of {frame.node} can execute at state {state.index}")
    values = [v_of(store, graph, child, state) + store.read_c(frame, i, state, tilde=tilde) for i, child in options]
    key = graph.node_key(frame, state, store.abstract)
    edge = exploration.choose(frame.node, key, [i for i, _ in options], values, rng)
    return edge, dict(options)[edge]


class MaxqLearner:
    """
    MAXQ-0 / MAXQ-Q learner.

    Args:
        graph: Validated task graph.
        model: Environment model the graph was built for.
        config: Learner hyperparameters; `config.algorithm` selects the rule.
        rng: Random stream used for exploration and sampling.
        store: Existing value tables to continue from.
    """

    def __init__(
        self,
        graph: MaxqGraph,
        model: TabularModel,
        config: LearnerConfig,
        rng: np.random.Generator,
        store: Optional[ValueStore] = None,
    ):
        if config.algorithm not in ("maxq0", "maxqq"):
            raise ConfigError(f"MaxqLearner cannot run algorithm {config.algorithm!r}")
        if config.algorithm == "maxq0":
            if not graph.pseudo_rewards_are_zero():
                raise PseudoRewardError(f"MAXQ-0 needs zero pseudo-rewards; graph {graph.name} declares others")
            if config.adaptive_pseudo_reward:
                raise PseudoRewardError("Adaptive pseudo-rewards require MAXQ-Q")
        self.graph = graph
        self.model = model
        self.config = config
        self.rng = rng
        self.store = store or ValueStore(
            graph,
            abstract=config.abstract,
            initial_value=config.initial_value,
            initial_values=config.initial_values,
        )
        self.split = graph.reward_split if config.use_reward_split else None
        self.exploration = ExplorationState(config, graph.composite_nodes())
        self.listeners: List[Callable[[UpdateEvent], None]] = []
        self.visits: Dict[Tuple, int] = {}
        self.total_steps = 0
        self.episodes = 0
        self._tilde = config.algorithm == "maxqq"
        self._interrupt_after: Optional[int] = None
        self._budget: Optional[int] = None
        self._episode_steps = 0
        self._episode_reward = 0.0

    # Episodes

    def run_episode(self, start: Optional[int] = None, interrupt_after=_UNSET) -> EpisodeStats:
        """
        Run one learning episode from `start` (sampled when omitted).

        Args:
            start: Initial state index.
            interrupt_after: Primitive actions allowed before control returns
                to the root; None never interrupts. Defaults to the configured
                decreasing schedule.

        Returns:
            EpisodeStats: Steps, undiscounted return and how the episode ended.
        """
        if interrupt_after is _UNSET:
            interrupt_after = self.config.interruption_budget(self.episodes)
        self._interrupt_after = interrupt_after
        self.episodes += 1
        self._budget = self._interrupt_after
        self._episode_steps = 0
        self._episode_reward = 0.0
        s = sample_start(self.model, self.rng) if start is None else start
        try:
            result = self._invoke(self.graph.root_frame, s)
        except StepCapExceeded as e:
            logger.warning(f"Episode on {self.model.name} aborted: {e}")
            return EpisodeStats(self._episode_steps, self._episode_reward, terminated=False, capped=True)
        return EpisodeStats(
            self._episode_steps,
            self._episode_reward,
            terminated=self.model.is_terminal(result.final),
        )

    def _alpha(self, key: Tuple) -> float:
        if self.config.learning_rate_schedule == "visits":
            self.visits[key] = self.visits.get(key, 0) + 1
            return 1.0 / self.visits[key]
        return self.config.learning_rate

    def _budget_spent(self) -> bool:
        return self._budget is not None and self._budget <= 0

    # Interpreter

    def _invoke(self, frame: Frame, s: int) -> _Invocation:
        node = self.graph.nodes[frame.node]
        if node.is_primitive:
            return self._execute(frame, node.action, s)
        graph = self.graph
        is_root = frame.node == graph.root
        steps: List[_Step] = []
        state = graph.space.decode(s)
        while not graph.terminated(frame, state):
            edge, child = self._choose(frame, state)
            result = self._invoke(child, s)
            steps.extend(result.steps)
            next_state = graph.space.decode(result.final)
            completed = result.status == DONE or (result.status == ROUTED and result.owner == frame.node)
            if completed:
                self._update(frame, edge, child, result.steps, next_state)
                if (
                    self.config.adaptive_pseudo_reward
                    and not graph.nodes[child.node].is_primitive
                    and graph.terminated(child, next_state)
                ):
                    adapt_pseudo_reward(graph, self.store, child, frame, next_state, self.config.pseudo_reward_rate)
            s, state = result.final, next_state
            if not completed and not is_root:
                return _Invocation(steps, s, result.status, result.owner)
            if self._budget_spent() and not graph.terminated(frame, state):
                if not is_root:
                    return _Invocation(steps, s, INTERRUPTED)
                self._budget = self._interrupt_after
        if graph.is_goal(frame, state):
            self.exploration.on_goal(frame.node)
        return _Invocation(steps, s, DONE)

    def _choose(self, frame: Frame, state: FactoredState) -> Tuple[int, Frame]:
        return choose_action(self.graph, self.store, self.exploration, frame, state, self.rng, tilde=self._tilde)

    def _execute(self, frame: Frame, action: int, s: int) -> _Invocation:
        if self._episode_steps >= self.config.step_cap:
            raise StepCapExceeded(self._episode_steps)
        outcome = sample_transition(self.model, s, action, self.rng)
        components = outcome.component_dict()
        self._episode_steps += 1
        self.total_steps += 1
        self._episode_reward += outcome.reward
        if self._budget is not None:
            self._budget -= 1

        reward = outcome.reward if self.split is None else self.split.leaf_reward(components)
        key = self.store.leaf_key(frame.node, s)
        alpha = self._alpha(("V", frame.node, key))
        old = self.store.read_v(frame.node, s)
        self.store.write_v(frame.node, s, (1.0 - alpha) * old + alpha * reward)

        step = _Step(s, components)
        if self.split is not None and self.split.routed(components):
            owners = {self.split.owner(k) for k, v in components.items() if v != 0.0}
            owners.discard(None)
            return _Invocation([step], outcome.next_state, ROUTED, owners.pop())
        return _Invocation([step], outcome.next_state)

    # Updates

    def _owned_returns(self, node: str, steps: List[_Step]) -> List[float]:
        """Discounted sum of the rewards `node` owns from each step onward."""
        gamma = self.model.gamma
        owned = [0.0] * len(steps)
        if self.split is None:
            return owned
        running = 0.0
        for k in range(len(steps) - 1, -1, -1):
            running = self.split.owned_by(node, steps[k].components) + gamma * running
            owned[k] = running
        return owned

    def _update(
        self,
        frame: Frame,
        edge: int,
        child: Frame,
        steps: List[_Step],
        next_state: FactoredState,
    ) -> None:
        graph, store = self.graph, self.store
        gamma = self.model.gamma
        n = len(steps)

        if graph.terminated(frame, next_state):
            pseudo = store.read_pseudo(frame, next_state) if self._tilde else 0.0
            next_tilde = next_plain = 0.0
        else:
            pseudo = 0.0
            best = greedy_edge(store, graph, frame, next_state, tilde=self._tilde)
            best_child = graph.child_frame(frame, best, next_state)
            below = v_of(store, graph, best_child, next_state)
            next_plain = store.read_c(frame, best, next_state) + below
            next_tilde = store.read_c(frame, best, next_state, tilde=True) + below if self._tilde else next_plain

        owned = self._owned_returns(frame.node, steps)
        positions = range(n) if self.config.all_states_updating else range(1)
        if self._tilde:
            positions = reversed(positions)
        for k in positions:
            x = graph.space.decode(steps[k].state)
            if k > 0 and (graph.terminated(frame, x) or graph.child_frame(frame, edge, x) != child):
                continue
            discount = gamma ** (n - k)
            target_plain = owned[k] + discount * next_plain
            target_tilde = owned[k] + discount * (pseudo + next_tilde)
            alpha = self._alpha(("C", frame.node, edge, store.completion_key(frame, edge, x)))
            old_plain = store.read_c(frame, edge, x)
            store.write_c(frame, edge, x, (1.0 - alpha) * old_plain + alpha * target_plain)
            if self._tilde:
                old_tilde = store.read_c(frame, edge, x, tilde=True)
                store.write_c(frame, edge, x, (1.0 - alpha) * old_tilde + alpha * target_tilde, tilde=True)
            else:
                store.write_c(frame, edge, x, (1.0 - alpha) * old_plain + alpha * target_plain, tilde=True)
            for listener in self.listeners:
                listener(UpdateEvent(frame, edge, x.index, n - k, target_tilde))


def maxq0_episode(
    graph: MaxqGraph,
    model: TabularModel,
    store: ValueStore,
    config: LearnerConfig,
    rng: np.random.Generator,
    start: Optional[int] = None,
) -> EpisodeStats:
    """Run one MAXQ-0 episode on `store`."""
    learner = MaxqLearner(graph, model, config.model_copy(update={"algorithm": "maxq0"}), rng, store=store)
    return learner.run_episode(start)


def maxqq_episode(
    graph: MaxqGraph,
    model: TabularModel,
    store: ValueStore,
    config: LearnerConfig,
    rng: np.random.Generator,
    start: Optional[int] = None,
) -> EpisodeStats:
    """Run one MAXQ-Q episode on `store`."""
    learner = MaxqLearner(graph, model, config.model_copy(update={"algorithm": "maxqq"}), rng, store=store)
    return learner.run_episode(start)
