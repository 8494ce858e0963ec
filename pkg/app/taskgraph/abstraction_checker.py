"""
Safety checks for the state abstractions declared on a task graph.

Five conditions are checked:
  - leaf irrelevance: exact comparison of expected rewards per abstract image
  - max node irrelevance: structural factorisation test over the subtree
  - result distribution irrelevance: funnel test on reachable results
  - termination: every reachable result of the child satisfies the parent goal
  - shielding: every omitted table entry sits behind a terminated ancestor
"""
from collections import defaultdict
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from pydantic import BaseModel, Field

from ..config.logging_config import logger
from ..mdp.model import Outcome, TabularModel
from ..mdp.state import FactoredState
from .analysis import GraphAnalysis, analysis_for
from .storage import abstract_table_keys
from .subtask import Frame, MaxqGraph

PRECISION = 9


class Verdict(str, Enum):
    SAFE = "safe"
    STRUCTURAL = "safe (structural)"
    UNVERIFIED = "unverified"
    VIOLATED = "violated"


class Counterexample(BaseModel):
    first: int
    second: Optional[int] = None
    detail: str = ""


class ConditionResult(BaseModel):
    condition: str
    node: str
    child: str = ""
    verdict: Verdict
    detail: str = ""
    counterexample: Optional[Counterexample] = None


class SafetyReport(BaseModel):
    """Verdict per node and edge."""
    graph: str
    results: List[ConditionResult] = Field(default_factory=list)

    @property
    def safe(self) -> bool:
        return all(r.verdict in (Verdict.SAFE, Verdict.STRUCTURAL) for r in self.results)

    def violations(self) -> List[ConditionResult]:
        return [r for r in self.results if r.verdict == Verdict.VIOLATED]

    def find(self, condition: str, node: str, child: str = "") -> Optional[ConditionResult]:
        for r in self.results:
            if r.condition == condition and r.node == node and r.child == child:
                return r
        return None


class AbstractionChecker:
    """Runs the five safety conditions over a graph and its model."""

    def __init__(self, graph: MaxqGraph, model: TabularModel):
        self.graph = graph
        self.model = model
        self.analysis: GraphAnalysis = analysis_for(graph)
        self.split = graph.reward_split
        self._results_cache: Dict[Tuple[Frame, int], FrozenSet[int]] = {}
        self._edge_keys: Optional[Dict[Tuple[str, int], Set[Tuple]]] = None

    # Reward and outcome helpers

    def _aborted(self, outcome: Outcome, subtree: Set[str]) -> bool:
        """Outcome ends the episode with reward owned outside the subtree."""
        if self.split is None or outcome.next_state not in self.model.terminals:
            return False
        return any(
            value != 0.0 and self.split.owner(name) not in (None, *subtree)
            for name, value in outcome.components
        )

    def _owned_reward(self, outcome: Outcome, subtree: Set[str]) -> float:
        if self.split is None:
            return outcome.reward
        return sum(
            value for name, value in outcome.component_dict().items()
            if self.split.owner(name) is None or self.split.owner(name) in subtree
        )

    def _kept_outcomes(self, state: int, action: int, subtree: Set[str]) -> List[Tuple[Outcome, float]]:
        """Outcomes with their probability renormalised over non-aborted ones."""
        outs = [o for o in self.model.outcomes_for(state, action) if not self._aborted(o, subtree)]
        total = sum(o.probability for o in outs)
        if total <= 0:
            return []
        return [(o, o.probability / total) for o in outs]

    def _result_states(self, child: Frame, state: int) -> FrozenSet[int]:
        """Terminal states of `child` reachable from `state` under any policy of its subtree."""
        key = (child, state)
        cached = self._results_cache.get(key)
        if cached is not None:
            return cached
        graph = self.graph
        subtree = set(graph.descendants(child.node))
        node = graph.nodes[child.node]
        states = self.analysis.states
        if node.is_primitive:
            results = frozenset(o.next_state for o, _ in self._kept_outcomes(state, node.action, subtree))
            self._results_cache[key] = results
            return results

        actions = [graph.nodes[leaf].action for leaf in graph.leaves_under(child.node)]
        seen = {state}
        frontier = [state]
        found: Set[int] = set()
        while frontier:
            x = frontier.pop()
            for a in actions:
                for o, _ in self._kept_outcomes(x, a, subtree):
                    y = o.next_state
                    if y in seen:
                        continue
                    seen.add(y)
                    if graph.terminated(child, states[y]):
                        found.add(y)
                    else:
                        frontier.append(y)
        results = frozenset(found)
        self._results_cache[key] = results
        return results

    # Conditions

    def check_leaf_irrelevance(self, name: str) -> ConditionResult:
        node = self.graph.nodes[name]
        if node.abstraction is None:
            return ConditionResult(condition="leaf_irrelevance", node=name, verdict=Verdict.SAFE, detail="no abstraction")
        seen: Dict[Tuple, Tuple[float, int]] = {}
        for s in self.analysis.nonterminal:
            expected = sum(
                o.probability * self._owned_reward(o, {name})
                for o in self.model.outcomes_for(s.index, node.action)
            )
            key = self.graph.node_key(Frame(name), s, True)
            if key in seen:
                other_value, other_state = seen[key]
                if abs(other_value - expected) > 1e-9:
                    return ConditionResult(
                        condition="leaf_irrelevance",
                        node=name,
                        verdict=Verdict.VIOLATED,
                        detail=f"expected reward {other_value} vs {expected} for image {key}",
                        counterexample=Counterexample(first=other_state, second=s.index),
                    )
            else:
                seen[key] = (expected, s.index)
        return ConditionResult(condition="leaf_irrelevance", node=name, verdict=Verdict.SAFE)

    def check_max_node_irrelevance(self, name: str) -> ConditionResult:
        graph = self.graph
        node = graph.nodes[name]
        if node.abstraction is None:
            return ConditionResult(
                condition="max_node_irrelevance", node=name, verdict=Verdict.SAFE, detail="no abstraction"
            )
        abstraction = node.abstraction
        if not abstraction.is_structural:
            return ConditionResult(
                condition="max_node_irrelevance", node=name, verdict=Verdict.UNVERIFIED,
                detail="derived features are not covered by the structural test",
            )
        if set(abstraction.params) != set(node.param_names):
            return ConditionResult(
                condition="max_node_irrelevance", node=name, verdict=Verdict.UNVERIFIED,
                detail="dropped parameters are not covered by the structural test",
            )

        x_vars = list(abstraction.variables)
        y_vars = [v for v in graph.space.names if v not in x_vars]
        subtree = set(graph.descendants(name))
        composite = [n for n in graph.topological_order() if n in subtree and not graph.nodes[n].is_primitive]
        leaves = [graph.nodes[n].action for n in graph.leaves_under(name)]

        active: List[FactoredState] = []
        own_frames = self.analysis.frames(name)
        for s in self.analysis.nonterminal:
            if any(not graph.terminated(f, s) for f in own_frames):
                active.append(s)

        def violated(first: int, second: int, detail: str) -> ConditionResult:
            return ConditionResult(
                condition="max_node_irrelevance", node=name, verdict=Verdict.VIOLATED, detail=detail,
                counterexample=Counterexample(first=first, second=second, detail=detail),
            )

        # Termination, goal, pseudo-reward and child bindings depend only on X
        frames = [f for n in composite for f in self.analysis.frames(n)]
        signatures: Dict[Tuple, Tuple[Tuple, int]] = {}
        for s in active:
            signature = []
            for f in frames:
                terminated = graph.terminated(f, s)
                signature.append((
                    terminated,
                    graph.is_goal(f, s),
                    round(graph.pseudo_reward(f, s), PRECISION) if terminated else 0.0,
                    tuple(graph.child_frame(f, i, s) for i in range(len(graph.nodes[f.node].children))),
                ))
            x = s.project(x_vars)
            signature = tuple(signature)
            if x in signatures and signatures[x][0] != signature:
                return violated(signatures[x][1], s.index, f"subtree predicates differ for image {x}")
            signatures.setdefault(x, (signature, s.index))

        def project(state: int, names: List[str]) -> Tuple:
            return self.analysis.states[state].project(names)

        terminals = self.model.terminals
        for a in leaves:
            x_dists: Dict[Tuple, Tuple[Tuple, int]] = {}
            y_dists: Dict[Tuple, Tuple[Tuple, int]] = {}
            for s in active:
                kept = self._kept_outcomes(s.index, a, subtree)
                if not kept:
                    continue
                x_marginal: Dict[Tuple, float] = defaultdict(float)
                rewards: Dict[Tuple, float] = {}
                # Y is only defined on continuing outcomes
                joint: Dict[Tuple, float] = defaultdict(float)
                x_continuing: Dict[Tuple, float] = defaultdict(float)
                y_marginal: Dict[Tuple, float] = defaultdict(float)
                for o, p in kept:
                    x_next = project(o.next_state, x_vars)
                    r = round(self._owned_reward(o, subtree), PRECISION)
                    if rewards.setdefault(x_next, r) != r:
                        return violated(s.index, s.index, f"reward not determined by X' under action {a}")
                    x_marginal[x_next] += p
                    if o.next_state in terminals:
                        continue
                    y_next = project(o.next_state, y_vars)
                    joint[(x_next, y_next)] += p
                    x_continuing[x_next] += p
                    y_marginal[y_next] += p
                mass = sum(y_marginal.values())
                for x_next in x_continuing:
                    for y_next in y_marginal:
                        p = joint.get((x_next, y_next), 0.0)
                        if abs(p * mass - x_continuing[x_next] * y_marginal[y_next]) > 1e-9:
                            return violated(
                                s.index, s.index, f"transition does not factor over X and Y under action {a}"
                            )

                x_sig = tuple(sorted((k, round(p, PRECISION), rewards[k]) for k, p in x_marginal.items()))
                x = s.project(x_vars)
                if x in x_dists and x_dists[x][0] != x_sig:
                    return violated(x_dists[x][1], s.index, f"X-dynamics of action {a} depend on Y")
                x_dists.setdefault(x, (x_sig, s.index))
                if mass <= 0.0:
                    continue
                y_sig = tuple(sorted((k, round(p / mass, PRECISION)) for k, p in y_marginal.items()))
                y = s.project(y_vars)
                if y in y_dists and y_dists[y][0] != y_sig:
                    return violated(y_dists[y][1], s.index, f"Y-dynamics of action {a} depend on X")
                y_dists.setdefault(y, (y_sig, s.index))

        return ConditionResult(condition="max_node_irrelevance", node=name, verdict=Verdict.STRUCTURAL)

    def _edge_starts(self, name: str, edge_index: int):
        """(parent frame, start state, child frame) for every executable invocation."""
        graph = self.graph
        for frame in self.analysis.frames(name):
            for s in self.analysis.nonterminal:
                if graph.terminated(frame, s):
                    continue
                child = graph.child_frame(frame, edge_index, s)
                if graph.executable(child, s):
                    yield frame, s, child

    def check_result_distribution(self, name: str, edge_index: int) -> ConditionResult:
        """
        Funnel test: every start sharing an edge key must reach the same set of
        result images. A single goal image per key proves safety; larger or
        non-goal result sets leave the edge unverified.
        """
        graph = self.graph
        node = graph.nodes[name]
        edge = node.children[edge_index]
        condition = "result_distribution_irrelevance"
        if edge.result_abstraction is None:
            return ConditionResult(condition=condition, node=name, child=edge.label, verdict=Verdict.SAFE,
                                   detail="no result abstraction")
        if self.model.gamma < 1.0:
            return ConditionResult(condition=condition, node=name, child=edge.label, verdict=Verdict.UNVERIFIED,
                                   detail="funnel test applies to undiscounted models only")

        parent_vars = list(node.abstraction.variables) if node.abstraction else list(graph.space.names)
        images: Dict[Tuple, Tuple[FrozenSet, int]] = {}
        inconclusive = ""
        for frame, s, child in self._edge_starts(name, edge_index):
            image = frozenset(
                (self.analysis.states[r].project(parent_vars), graph.is_goal(child, self.analysis.states[r]))
                for r in self._result_states(child, s.index)
            )
            key = graph.completion_key(frame, edge_index, s, True)
            if key in images and images[key][0] != image:
                return ConditionResult(
                    condition=condition, node=name, child=edge.label, verdict=Verdict.VIOLATED,
                    detail=f"reachable results depend on variables dropped from key {key}",
                    counterexample=Counterexample(first=images[key][1], second=s.index),
                )
            images.setdefault(key, (image, s.index))
            if not inconclusive:
                if any(not is_goal for _, is_goal in image):
                    inconclusive = "child can end outside its goal"
                elif len(image) > 1:
                    inconclusive = "child goal results span several abstract images"

        if inconclusive:
            return ConditionResult(condition=condition, node=name, child=edge.label,
                                   verdict=Verdict.UNVERIFIED, detail=inconclusive)
        return ConditionResult(condition=condition, node=name, child=edge.label, verdict=Verdict.SAFE)

    def check_termination(self, name: str, edge_index: int) -> ConditionResult:
        graph = self.graph
        edge = graph.nodes[name].children[edge_index]
        condition = "termination"
        for frame, s, child in self._edge_starts(name, edge_index):
            for r in self._result_states(child, s.index):
                if not graph.is_goal(frame, self.analysis.states[r]):
                    return ConditionResult(
                        condition=condition, node=name, child=edge.label, verdict=Verdict.VIOLATED,
                        detail="child can terminate where the parent goal does not hold",
                        counterexample=Counterexample(first=s.index, second=r),
                    )
        return ConditionResult(condition=condition, node=name, child=edge.label, verdict=Verdict.SAFE)

    def _unshielded_chain(
        self, frame: Frame, state: FactoredState, memo: Dict[Frame, Optional[List[Frame]]]
    ) -> Optional[List[Frame]]:
        """
        A root-to-`frame` call chain at `state` on which no invocation is
        terminated, found by walking parent edges upward. None when every
        chain crosses a terminated invocation.
        """
        if frame in memo:
            return memo[frame]
        memo[frame] = None
        graph = self.graph
        if graph.terminated(frame, state):
            return None
        if frame.node == graph.root:
            chain: Optional[List[Frame]] = [frame]
        else:
            chain = None
            for parent_name, edge_index in graph.parents_of(frame.node):
                for bindings in graph.nodes[parent_name].binding_domain():
                    parent = Frame(parent_name, bindings)
                    if graph.child_frame(parent, edge_index, state) != frame:
                        continue
                    above = self._unshielded_chain(parent, state, memo)
                    if above is not None:
                        chain = above + [frame]
                        break
                if chain is not None:
                    break
        memo[frame] = chain
        return chain

    def _omitted_entries(self, name: str) -> List[Tuple[Frame, FactoredState]]:
        """Executable invocations of `name` with a completion entry missing from the abstracted tables."""
        if self._edge_keys is None:
            self._edge_keys = abstract_table_keys(self.graph)[1]
        graph = self.graph
        node = graph.nodes[name]
        omitted = []
        for s in self.analysis.nonterminal:
            for frame in self.analysis.frames(name):
                if graph.terminated(frame, s):
                    continue
                for i, edge in enumerate(node.children):
                    if edge.terminating or not graph.executable(graph.child_frame(frame, i, s), s):
                        continue
                    if graph.completion_key(frame, i, s, True) not in self._edge_keys[(name, i)]:
                        omitted.append((frame, s))
                        break
        return omitted

    def check_shielding(self, name: str, omitted: Optional[Iterable[int]] = None) -> ConditionResult:
        """
        Every invocation left out of the node's tables must be shielded: each
        root-to-node call chain at that state crosses a terminated invocation.

        Args:
            name: Composite node to check.
            omitted: States at which every invocation of the node is declared
                omitted. Defaults to the entries the abstracted tables leave out.

        Returns:
            ConditionResult: VIOLATED with the first unshielded omission.
        """
        condition = "shielding"
        if not any(f.node == name for s in self.analysis.nonterminal for f in self.analysis.live_frames(s.index)):
            return ConditionResult(condition=condition, node=name, verdict=Verdict.UNVERIFIED,
                                   detail="node is never reachable")
        if omitted is None:
            entries = self._omitted_entries(name)
        else:
            frames = self.analysis.frames(name)
            entries = [(f, self.analysis.states[s]) for s in omitted for f in frames]

        memos: Dict[int, Dict[Frame, Optional[List[Frame]]]] = {}
        for frame, s in entries:
            chain = self._unshielded_chain(frame, s, memos.setdefault(s.index, {}))
            if chain is not None:
                path = " -> ".join(f"{f.node}{list(f.bindings) if f.bindings else ''}" for f in chain)
                return ConditionResult(
                    condition=condition, node=name, verdict=Verdict.VIOLATED,
                    detail=f"omitted {frame.node} is reachable at state {s.index} through {path}",
                    counterexample=Counterexample(first=s.index, detail=path),
                )
        shielded = len({s.index for _, s in entries})
        return ConditionResult(condition=condition, node=name, verdict=Verdict.SAFE,
                               detail=f"omissions at {shielded} states are shielded")

    def run(self) -> SafetyReport:
        report = SafetyReport(graph=self.graph.name)
        for name in self.graph.topological_order():
            node = self.graph.nodes[name]
            if node.is_primitive:
                report.results.append(self.check_leaf_irrelevance(name))
                continue
            report.results.append(self.check_max_node_irrelevance(name))
            report.results.append(self.check_shielding(name))
            for i, edge in enumerate(node.children):
                if edge.result_abstraction is not None:
                    report.results.append(self.check_result_distribution(name, i))
                if edge.terminating:
                    report.results.append(self.check_termination(name, i))
        for violation in report.violations():
            logger.warning(
                f"{violation.condition} violated at {violation.node}"
                f"{'->' + violation.child if violation.child else ''}: {violation.detail}"
            )
        return report


def check_abstraction_safety(graph: MaxqGraph, model: TabularModel) -> SafetyReport:
    """
    Check every declared abstraction of the graph against the model.

    Args:
        graph: The task graph.
        model: The tabular model.

    Returns:
        SafetyReport: One result per node condition and abstracted edge.
    """
    return AbstractionChecker(graph, model).run()
