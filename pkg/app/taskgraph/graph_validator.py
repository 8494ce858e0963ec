"""
Structural validation of task graphs against a model.
"""
from typing import List, Tuple

from pydantic import BaseModel, Field

from ..config.logging_config import logger
from ..mdp.model import TabularModel
from ..utils.errors import GraphDefinitionError
from .analysis import analysis_for
from .subtask import Abstraction, MaxqGraph


class ValidationReport(BaseModel):
    """Outcome of validating a graph."""
    valid: bool = True
    errors: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    def fail(self, message: str) -> None:
        self.valid = False
        self.errors.append(message)

    def as_tuple(self) -> Tuple[bool, str]:
        return self.valid, "; ".join(self.errors)


class GraphValidator:
    """
    Validator for MAXQ task graphs.
    """

    @staticmethod
    def validate_graph(graph: MaxqGraph, model: TabularModel) -> ValidationReport:
        """
        Validate a task graph against the model it will run on.

        Args:
            graph: The task graph.
            model: The tabular model.

        Returns:
            ValidationReport: Errors for violated invariants, warnings for
            legal but unusual constructions.
        """
        report = ValidationReport()
        try:
            graph.topological_order()
        except GraphDefinitionError as e:
            report.fail(str(e))
            return report

        if graph.space is not model.space and graph.space.n_states != model.n_states:
            report.fail("Graph and model use different state spaces")
            return report

        root = graph.node(graph.root)
        if root.is_primitive:
            report.fail("The root must be a composite subtask")
        if root.params:
            report.fail("The root cannot take parameters")

        reachable = set(graph.topological_order())
        for name, node in graph.nodes.items():
            if name not in reachable:
                report.warnings.append(f"Node '{name}' is unreachable from the root")
            if node.is_primitive:
                GraphValidator._validate_primitive(node, model, report)
            else:
                GraphValidator._validate_composite(graph, name, report)

        if report.valid:
            try:
                GraphValidator._validate_predicates(graph, report)
            except Exception as e:
                logger.error(f"Error evaluating predicates of graph '{graph.name}': {str(e)}")
                report.fail(f"Predicate evaluation failed: {str(e)}")

        if report.valid:
            logger.debug(f"Graph '{graph.name}' passed validation")
        else:
            logger.warning(f"Graph '{graph.name}' failed validation: {report.errors}")
        return report

    @staticmethod
    def _validate_primitive(node, model: TabularModel, report: ValidationReport) -> None:
        if node.children:
            report.fail(f"Primitive '{node.name}' has children")
        if not 0 <= node.action < model.n_actions:
            report.fail(f"Primitive '{node.name}' references action {node.action}")
        if node.params:
            report.fail(f"Primitive '{node.name}' cannot take parameters")
        if node.abstraction is not None and node.abstraction.params:
            report.fail(f"Primitive '{node.name}' abstraction retains parameters")

    @staticmethod
    def _validate_abstraction(
        graph: MaxqGraph, owner: str, abstraction: Abstraction, params: List[str], report: ValidationReport
    ) -> None:
        for var in abstraction.variables:
            if var not in graph.space.positions:
                report.fail(f"{owner}: abstraction names unknown variable '{var}'")
        for param in abstraction.params:
            if param not in params:
                report.fail(f"{owner}: abstraction names unknown parameter '{param}'")

    @staticmethod
    def _validate_composite(graph: MaxqGraph, name: str, report: ValidationReport) -> None:
        node = graph.node(name)
        if not node.children:
            report.fail(f"Composite '{name}' has no children")
        if node.termination is None and name != graph.root:
            report.fail(f"Composite '{name}' has no termination predicate")
        params = list(node.param_names)
        if node.abstraction is not None:
            GraphValidator._validate_abstraction(graph, name, node.abstraction, params, report)
        if callable(node.pseudo_reward):
            report.warnings.append(
                f"'{name}' uses a pseudo-reward function; it may be nonzero on goal states"
            )

        for i, edge in enumerate(node.children):
            child = graph.node(edge.child)
            bound = sorted(p for p, _ in edge.bindings)
            if bound != sorted(child.param_names):
                report.fail(
                    f"Edge {name}->{edge.child} binds {bound}, child expects {sorted(child.param_names)}"
                )
            if edge.result_abstraction is not None:
                GraphValidator._validate_abstraction(
                    graph, f"{name}->{edge.child}", edge.result_abstraction, params, report
                )

    @staticmethod
    def _validate_predicates(graph: MaxqGraph, report: ValidationReport) -> None:
        """Goal implies termination, and bindings stay inside their domains."""
        analysis = analysis_for(graph)
        for name in graph.composite_nodes():
            node = graph.node(name)
            for frame in analysis.frames(name):
                for s in analysis.states:
                    if graph.is_goal(frame, s) and not graph.terminated(frame, s):
                        report.fail(f"{name}{frame.bindings}: goal holds but termination does not at state {s.index}")
                        return
                for s in analysis.nonterminal:
                    if graph.terminated(frame, s):
                        continue
                    for i, edge in enumerate(node.children):
                        child_frame = graph.child_frame(frame, i, s)
                        child = graph.node(edge.child)
                        for value, param in zip(child_frame.bindings, child.params):
                            if not 0 <= value < param.cardinality:
                                report.fail(
                                    f"{name}->{edge.child} binds {param.name}={value} outside its domain at state {s.index}"
                                )
                                return


graph_validator = GraphValidator()


def validate_graph(graph: MaxqGraph, model: TabularModel) -> ValidationReport:
    return GraphValidator.validate_graph(graph, model)
