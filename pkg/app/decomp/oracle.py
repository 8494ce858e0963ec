"""
Exact solvers for the hierarchical value decomposition.

Each node invocation is solved bottom-up as a semi-Markov decision problem
whose actions are its children. A child's effect is summarised by its value
vector and its termination kernel K[s, s'] (the discounted probability that
the child, started in s, terminates in s'). Kernels of composite children
come from the absorbing chain their own policy induces.
"""
from typing import Dict, List, NamedTuple, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..config.logging_config import logger
from ..config.settings import settings
from ..mdp.model import TabularModel
from ..taskgraph.analysis import analysis_for
from ..taskgraph.subtask import Frame, MaxqGraph
from ..utils.errors import ConvergenceError, GraphDefinitionError, ImproperPolicyError
from .evaluator import HierarchicalPolicy
from .value_store import ValueStore

PRUNE_BELOW = 1e-15


class FrameSolution(NamedTuple):
    """Value, termination kernel and chosen edge of one invocation, per state."""
    values: np.ndarray
    kernel: sparse.csr_matrix
    policy: np.ndarray


class _Edge(NamedTuple):
    executable: np.ndarray
    values: np.ndarray
    kernel: sparse.csr_matrix


class HierarchySolver:
    """
    Bottom-up solver over the invocations reachable from the root.

    Args:
        graph: Task graph.
        model: Tabular model the graph runs on.
        abstract: Key the produced store by the graph's abstractions.
        policy: Fixed hierarchical policy to evaluate; None solves for the
            recursively optimal policy.
    """

    def __init__(
        self,
        graph: MaxqGraph,
        model: TabularModel,
        tol: Optional[float] = None,
        max_iterations: Optional[int] = None,
        abstract: bool = False,
        policy: Optional[HierarchicalPolicy] = None,
    ):
        self.graph = graph
        self.model = model
        self.tol = settings.oracle.tolerance if tol is None else tol
        self.max_iterations = settings.oracle.max_iterations if max_iterations is None else max_iterations
        self.tie_tolerance = settings.oracle.tie_tolerance
        self.policy = policy
        self.analysis = analysis_for(graph)
        self.store = ValueStore(graph, abstract=abstract)
        self.solutions: Dict[Frame, FrameSolution] = {}
        self._written: Dict[tuple, float] = {}
        self.max_conflict = 0.0

    def run(self) -> ValueStore:
        rewards = self.model.expected_rewards
        for name in self.graph.primitive_nodes():
            action = self.graph.nodes[name].action
            for s in self.analysis.nonterminal:
                self.store.write_v(name, s, float(rewards[s.index, action]))
        self.solve_frame(self.graph.root_frame)
        if self.max_conflict > self.tol:
            logger.warning(
                f"Abstract keys of '{self.graph.name}' merge states with different values "
                f"(max discrepancy {self.max_conflict:.3g})"
            )
        logger.info(f"Solved {len(self.solutions)} invocations of '{self.graph.name}'")
        return self.store

    def solve_frame(self, frame: Frame) -> FrameSolution:
        solution = self.solutions.get(frame)
        if solution is not None:
            return solution
        node = self.graph.nodes[frame.node]
        if node.is_primitive:
            solution = self._primitive_solution(node.action)
        else:
            solution = self._composite_solution(frame)
        self.solutions[frame] = solution
        return solution

    def _primitive_solution(self, action: int) -> FrameSolution:
        values = self.model.expected_rewards[:, action].copy()
        values[self.model.terminal_mask] = 0.0
        kernel = (self.model.gamma * self.model.transition_matrices[action]).tocsr()
        return FrameSolution(values, kernel, np.full(self.model.n_states, -1))

    def _edges(self, frame: Frame, active: np.ndarray) -> List[_Edge]:
        graph = self.graph
        n = self.model.n_states
        states = self.analysis.states
        edges = []
        for e in range(len(graph.nodes[frame.node].children)):
            groups: Dict[Frame, List[int]] = {}
            for s in np.flatnonzero(active):
                child = graph.child_frame(frame, e, states[s])
                if graph.executable(child, states[s]):
                    groups.setdefault(child, []).append(int(s))

            executable = np.zeros(n, dtype=bool)
            values = np.zeros(n)
            rows, cols, data = [], [], []
            for child, members in groups.items():
                solution = self.solve_frame(child)
                idx = np.array(members)
                executable[idx] = True
                values[idx] = solution.values[idx]
                sub = solution.kernel[idx].tocoo()
                rows.append(idx[sub.row])
                cols.append(sub.col)
                data.append(sub.data)
            if rows:
                kernel = sparse.csr_matrix(
                    (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
                )
            else:
                kernel = sparse.csr_matrix((n, n))
            edges.append(_Edge(executable, values, kernel))
        return edges

    def _terminal_values(self, frame: Frame, active: np.ndarray, pseudo: bool) -> np.ndarray:
        values = np.zeros(self.model.n_states)
        if pseudo:
            for s in np.flatnonzero(~active):
                values[s] = self.graph.pseudo_reward(frame, self.analysis.states[s])
        return values

    def _greedy(self, q: np.ndarray) -> np.ndarray:
        best = q.max(axis=1, keepdims=True)
        candidates = q >= best - self.tie_tolerance
        return candidates.argmax(axis=1)

    def _optimize(self, frame: Frame, edges: List[_Edge], active: np.ndarray) -> np.ndarray:
        """Value iteration on the node's SMDP with pseudo-rewards at its exits."""
        n = self.model.n_states
        w = self._terminal_values(frame, active, pseudo=True)
        q = np.full((n, len(edges)), -np.inf)
        for _ in range(self.max_iterations):
            for e, edge in enumerate(edges):
                q[edge.executable, e] = (edge.values + edge.kernel @ w)[edge.executable]
            backup = w.copy()
            backup[active] = q[active].max(axis=1)
            if np.isneginf(backup[active]).any():
                stuck = int(np.flatnonzero(active & np.isneginf(backup))[0])
                raise GraphDefinitionError(f"{frame.node}{list(frame.bindings)} has no executable child at state {stuck}")
            residual = float(np.max(np.abs(backup - w))) if active.any() else 0.0
            w = backup
            if residual <= self.tol:
                break
        else:
            raise ConvergenceError(f"Value iteration for {frame.node}{list(frame.bindings)} did not converge")
        policy = np.full(n, -1)
        policy[active] = self._greedy(q[active])
        return policy

    def _fixed_policy(self, frame: Frame, edges: List[_Edge], active: np.ndarray) -> np.ndarray:
        policy = np.full(self.model.n_states, -1)
        for s in np.flatnonzero(active):
            edge = self.policy.choose(frame, self.analysis.states[s])
            if edge is None or not edges[edge].executable[s]:
                raise ImproperPolicyError(
                    f"Policy picks no executable child for {frame.node}{list(frame.bindings)} at state {s}"
                )
            policy[s] = edge
        return policy

    def _policy_chain(self, edges: List[_Edge], policy: np.ndarray, active: np.ndarray):
        """One-invocation transition matrix and reward of the node's policy."""
        n = self.model.n_states
        blocks = []
        rewards = np.zeros(n)
        for e, edge in enumerate(edges):
            chosen = (policy == e) & active
            if not chosen.any():
                continue
            blocks.append(sparse.diags(chosen.astype(float)) @ edge.kernel)
            rewards[chosen] = edge.values[chosen]
        chain = sum(blocks[1:], blocks[0]).tocsr() if blocks else sparse.csr_matrix((n, n))
        return chain, rewards

    def _check_proper(self, frame: Frame, chain: sparse.csr_matrix, active: np.ndarray) -> None:
        if self.model.gamma < 1.0:
            return
        reach = ~active
        pattern = (chain != 0).astype(float)
        while True:
            grown = reach | ((pattern @ reach.astype(float)) > 0)
            if np.array_equal(grown, reach):
                break
            reach = grown
        if not reach.all():
            stuck = int(np.flatnonzero(~reach)[0])
            raise ImproperPolicyError(f"{frame.node}{list(frame.bindings)} never terminates from state {stuck}")

    def _evaluate(self, chain, rewards, active: np.ndarray, terminal_values: np.ndarray) -> np.ndarray:
        """Values of the node's policy given fixed values at its exits."""
        values = terminal_values.copy()
        values[active] = 0.0
        live = np.flatnonzero(active)
        if len(live):
            inner = chain[live][:, live].tocsc()
            exits = chain[live] @ np.where(active, 0.0, terminal_values)
            system = sparse.identity(len(live), format="csc") - inner
            values[live] = spsolve(system, rewards[live] + exits)
        return values

    def _kernel(self, chain: sparse.csr_matrix, active: np.ndarray) -> sparse.csr_matrix:
        n = self.model.n_states
        to_active = chain @ sparse.diags(active.astype(float))
        to_exit = (chain @ sparse.diags((~active).astype(float))).tocsr()
        kernel = to_exit.copy()
        for _ in range(self.max_iterations):
            updated = (to_active @ kernel + to_exit).tocsr()
            updated.data[np.abs(updated.data) < PRUNE_BELOW] = 0.0
            updated.eliminate_zeros()
            diff = updated - kernel
            kernel = updated
            if diff.nnz == 0 or np.max(np.abs(diff.data)) <= self.tol:
                return kernel
        raise ConvergenceError("Termination kernel did not converge")

    def _record(self, frame: Frame, e: int, s: int, value: float, tilde: bool) -> None:
        state = self.analysis.states[s]
        self.store.write_c(frame, e, state, value, tilde=tilde)
        if self.store.abstract:
            key = (tilde, frame.node, e, self.store.completion_key(frame, e, state))
            previous = self._written.setdefault(key, value)
            self.max_conflict = max(self.max_conflict, abs(previous - value))

    def _composite_solution(self, frame: Frame) -> FrameSolution:
        active = ~self.analysis.terminated_mask(frame)
        edges = self._edges(frame, active)
        if self.policy is None:
            policy = self._optimize(frame, edges, active)
        else:
            policy = self._fixed_policy(frame, edges, active)

        chain, rewards = self._policy_chain(edges, policy, active)
        self._check_proper(frame, chain, active)
        plain = self._evaluate(chain, rewards, active, np.zeros(self.model.n_states))
        contaminated = self._evaluate(chain, rewards, active, self._terminal_values(frame, active, pseudo=True))

        for e, edge in enumerate(edges):
            rows = np.flatnonzero(edge.executable)
            if not len(rows):
                continue
            completion = edge.kernel @ np.where(active, plain, 0.0)
            completion_tilde = edge.kernel @ contaminated
            for s in rows:
                self._record(frame, e, int(s), float(completion[s]), tilde=False)
                self._record(frame, e, int(s), float(completion_tilde[s]), tilde=True)

        values = np.where(active, plain, 0.0)
        return FrameSolution(values, self._kernel(chain, active), policy)


def solve_recursively_optimal(
    graph: MaxqGraph,
    model: TabularModel,
    tol: Optional[float] = None,
    abstract: bool = False,
) -> ValueStore:
    """
    Exact recursively optimal decomposition.

    Args:
        graph: Task graph.
        model: Tabular model.
        tol: DP tolerance.
        abstract: Key the store by the graph's abstractions instead of full states.

    Returns:
        ValueStore: C, C̃ and leaf V for every invocation reachable from the root.
    """
    return HierarchySolver(graph, model, tol=tol, abstract=abstract).run()


def evaluate_hierarchical_policy(
    graph: MaxqGraph,
    model: TabularModel,
    policy: HierarchicalPolicy,
    tol: Optional[float] = None,
) -> ValueStore:
    """Completion values C^π of a fixed hierarchical policy, keyed by full states."""
    return HierarchySolver(graph, model, tol=tol, abstract=False, policy=policy).run()
