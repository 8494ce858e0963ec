"""
Exact dynamic programming over tabular models: value iteration, policy
evaluation and ordered greedy policy extraction.
"""
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..config.logging_config import logger
from ..config.settings import settings
from ..utils.errors import ConvergenceError, ImproperPolicyError
from .model import ActionOrder, TabularModel

NO_ACTION = -1


def q_from_values(model: TabularModel, values: np.ndarray) -> np.ndarray:
    """
    One-step lookahead Q(s, a) = R(s, a) + γ Σ P(s'|s, a) V(s').

    Rows of terminal states are zero.
    """
    q = np.empty((model.n_states, model.n_actions))
    for a, matrix in enumerate(model.transition_matrices):
        q[:, a] = model.expected_rewards[:, a] + model.gamma * (matrix @ values)
    q[model.terminal_mask] = 0.0
    return q


def bellman_residual(model: TabularModel, values: np.ndarray) -> float:
    """Max-norm distance between V and its Bellman optimality backup."""
    backup = q_from_values(model, values).max(axis=1)
    return float(np.max(np.abs(backup - values)))


def value_iteration(
    model: TabularModel,
    tol: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> np.ndarray:
    """
    Compute the optimal state values.

    Args:
        model: The tabular model.
        tol: Required max Bellman residual of the returned vector.
        max_iterations: Sweep cap.

    Returns:
        np.ndarray: V* with terminal entries 0.

    Raises:
        ConvergenceError: If the residual is still above tol at the cap.
    """
    tol = settings.oracle.tolerance if tol is None else tol
    max_iterations = settings.oracle.max_iterations if max_iterations is None else max_iterations
    values = np.zeros(model.n_states)
    residual = np.inf
    for iteration in range(max_iterations):
        backup = q_from_values(model, values).max(axis=1)
        residual = float(np.max(np.abs(backup - values)))
        if residual <= tol:
            logger.debug(f"Value iteration on {model.name} converged after {iteration} sweeps")
            return values
        values = backup
    raise ConvergenceError(
        f"Value iteration on {model.name} did not converge in {max_iterations} sweeps",
        residual=residual,
    )


def _policy_matrix(model: TabularModel, policy: np.ndarray):
    """Transition matrix and reward vector of a deterministic policy."""
    n = model.n_states
    rows, cols, data = [], [], []
    rewards = np.zeros(n)
    for s in range(n):
        if model.terminal_mask[s]:
            continue
        a = int(policy[s])
        for o in model.outcomes_for(s, a):
            if o.probability > 0:
                rows.append(s)
                cols.append(o.next_state)
                data.append(o.probability)
        rewards[s] = model.expected_rewards[s, a]
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n)), rewards


def _reaches_termination(matrix: sparse.csr_matrix, terminal_mask: np.ndarray) -> np.ndarray:
    """States from which some terminal state is reachable under the chain."""
    reach = terminal_mask.copy()
    while True:
        grown = reach | ((matrix @ reach.astype(float)) > 0)
        if np.array_equal(grown, reach):
            return reach
        reach = grown


def policy_evaluation(
    model: TabularModel,
    policy: np.ndarray,
    tol: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> np.ndarray:
    """
    Exact values of a deterministic stationary policy.

    Args:
        model: The tabular model.
        policy: Action index per state; entries of terminal states are ignored.
        tol: Residual tolerance checked on the solution.
        max_iterations: Sweep cap for the iterative refinement fallback.

    Returns:
        np.ndarray: V^π with terminal entries 0.

    Raises:
        ImproperPolicyError: If γ = 1 and some state never terminates under π.
        ConvergenceError: If the solution fails the residual check.
    """
    tol = settings.oracle.tolerance if tol is None else tol
    max_iterations = settings.oracle.max_iterations if max_iterations is None else max_iterations
    matrix, rewards = _policy_matrix(model, policy)
    terminal = model.terminal_mask

    if model.gamma >= 1.0:
        reach = _reaches_termination(matrix, terminal)
        if not reach.all():
            stuck = int(np.flatnonzero(~reach)[0])
            raise ImproperPolicyError(
                f"Policy never terminates from state {stuck} of {model.name}"
            )

    live = np.flatnonzero(~terminal)
    values = np.zeros(model.n_states)
    if len(live):
        sub = matrix[live][:, live]
        system = sparse.identity(len(live), format="csc") - model.gamma * sub.tocsc()
        values[live] = spsolve(system, rewards[live])

    residual = np.inf
    # Refine the direct solve until the residual check passes
    for _ in range(max_iterations):
        backup = rewards + model.gamma * (matrix @ values)
        backup[terminal] = 0.0
        residual = float(np.max(np.abs(backup - values)))
        values = backup
        if residual <= tol:
            return values
    raise ConvergenceError(f"Policy evaluation on {model.name} diverged", residual=residual)


def ordered_greedy_policy(
    q: np.ndarray,
    order: Optional[ActionOrder] = None,
    tie_tolerance: Optional[float] = None,
    terminal_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Greedy policy breaking near-ties by a fixed action order.

    Among actions whose value is within tie_tolerance of the row maximum, the
    one with the lowest rank is chosen.

    Args:
        q: S×A action values.
        order: Tie-breaking order; identity when omitted.
        tie_tolerance: Width of the tie band.
        terminal_mask: States that get NO_ACTION.

    Returns:
        np.ndarray: Action index per state.
    """
    tie_tolerance = settings.oracle.tie_tolerance if tie_tolerance is None else tie_tolerance
    order = ActionOrder.identity(q.shape[1]) if order is None else order
    best = q.max(axis=1, keepdims=True)
    candidates = q >= best - tie_tolerance
    ranks = np.where(candidates, order.ranks[np.newaxis, :], np.iinfo(int).max)
    policy = ranks.argmin(axis=1)
    if terminal_mask is not None:
        policy = np.where(terminal_mask, NO_ACTION, policy)
    return policy


def one_step_improved_policy(
    model: TabularModel,
    values: np.ndarray,
    order: Optional[ActionOrder] = None,
) -> np.ndarray:
    """Ordered greedy policy with respect to a one-step lookahead on `values`."""
    q = q_from_values(model, values)
    return ordered_greedy_policy(q, order, terminal_mask=model.terminal_mask)
