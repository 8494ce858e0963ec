"""
Command line interface for the MAXQ engine: training runs, storage accounting,
exact solving and abstraction safety checks.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

import click
import numpy as np
import pandas as pd

from ..config.logging_config import logger
from ..decomp.evaluator import v_of
from ..decomp.oracle import solve_recursively_optimal
from ..decomp.value_store import save_store
from ..envs.registry import environment_registry, make_environment
from ..harness.experiment import CONFIGURATIONS, ExperimentConfig, run_experiment
from ..harness.report import accounting_table
from ..mdp.dynamic_programming import value_iteration
from ..taskgraph.abstraction_checker import check_abstraction_safety
from ..taskgraph.graph_validator import validate_graph
from ..taskgraph.storage import flat_storage_count, storage_count
from ..utils.errors import MaxqError


def _load_overrides(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise click.BadParameter(f"Cannot read {path}: {str(e)}")


class CLI:
    """
    Operations behind the click commands. Each returns a result dictionary
    with a `success` flag so failures are reported rather than raised.
    """

    @staticmethod
    def run(
        config_file: Optional[str],
        env: Optional[str],
        configuration: Optional[str],
        seed: Optional[int],
        trials: Optional[int],
        episodes: Optional[int],
        out: Optional[str],
    ) -> Dict[str, Any]:
        try:
            updates: Dict[str, Any] = {
                "environment": env,
                "configuration": configuration,
                "episodes": episodes,
                "output_dir": out,
            }
            if trials is not None:
                updates["trials"] = trials
                updates["seeds"] = list(range(seed or 0, (seed or 0) + trials))
            elif seed is not None:
                updates["seeds"] = [seed]
            if config_file:
                config = ExperimentConfig.from_file(config_file, **updates)
            else:
                config = ExperimentConfig(**{k: v for k, v in updates.items() if v is not None})
            bundle = run_experiment(config)
            mean = bundle.mean_curve()
            return {
                "success": True,
                "label": config.label,
                "trials": len(bundle.trials),
                "final_mean_return": float(mean["smoothed_return"].iloc[-1]) if not mean.empty else None,
                "storage": bundle.accounting.total,
                "capped_episodes": bundle.capped_episodes,
                "files": {k: str(v) for k, v in bundle.files.items()},
            }
        except (MaxqError, ValueError) as e:
            logger.error(f"Run failed: {str(e)}")
            return {"success": False, "error": str(e)}

    @staticmethod
    def account(env: str, overrides: Dict[str, Any], abstract: bool) -> Dict[str, Any]:
        try:
            environment = make_environment(env, overrides)
            count = storage_count(environment.graph, abstract=abstract)
            return {
                "success": True,
                "table": accounting_table(count),
                "total": count.total,
                "flat": flat_storage_count(environment.model),
            }
        except MaxqError as e:
            logger.error(f"Accounting failed: {str(e)}")
            return {"success": False, "error": str(e)}

    @staticmethod
    def solve(env: str, overrides: Dict[str, Any], abstract: bool, out: Optional[str]) -> Dict[str, Any]:
        try:
            environment = make_environment(env, overrides)
            graph, model = environment.graph, environment.model
            store = solve_recursively_optimal(graph, model, abstract=abstract)
            hierarchical = np.array([v_of(store, graph, graph.root_frame, s) for s in graph.space])
            optimal = value_iteration(model)
            starts = model.start_distribution
            result = {
                "success": True,
                "hierarchical_start_value": float(starts @ hierarchical),
                "optimal_start_value": float(starts @ optimal),
                "max_gap": float(np.max(optimal - hierarchical)),
                "entries": store.entry_count(),
            }
            if out:
                result["store"] = str(save_store(store, out))
            return result
        except MaxqError as e:
            logger.error(f"Solve failed: {str(e)}")
            return {"success": False, "error": str(e)}

    @staticmethod
    def check(env: str, overrides: Dict[str, Any]) -> Dict[str, Any]:
        try:
            environment = make_environment(env, overrides)
            validation = validate_graph(environment.graph, environment.model)
            report = check_abstraction_safety(environment.graph, environment.model)
            frame = pd.DataFrame(
                [
                    {
                        "condition": r.condition,
                        "node": r.node,
                        "child": r.child,
                        "verdict": r.verdict.value,
                        "detail": r.detail,
                    }
                    for r in report.results
                ]
            )
            return {
                "success": True,
                "valid": validation.valid,
                "errors": validation.errors,
                "warnings": validation.warnings,
                "safe": report.safe,
                "table": frame.to_string(index=False),
                "violations": [r.model_dump(mode="json") for r in report.violations()],
            }
        except MaxqError as e:
            logger.error(f"Check failed: {str(e)}")
            return {"success": False, "error": str(e)}


def _echo_failure(result: Dict[str, Any]) -> None:
    click.echo(f"Error: {result.get('error', 'Unknown error')}", err=True)
    raise SystemExit(1)


@click.group()
def cli():
    """MAXQ hierarchical reinforcement learning engine."""
    pass


env_option = click.option(
    "--env", "-e", default="taxi", type=click.Choice(environment_registry.names()), help="Environment name"
)
config_option = click.option("--config", "-c", "config_file", help="JSON file of environment overrides")


@cli.command()
@click.option("--config", "-c", "config_file", help="JSON experiment file")
@click.option("--env", "-e", default=None, type=click.Choice(environment_registry.names()), help="Environment name")
@click.option("--configuration", "-k", default=None, type=click.Choice(CONFIGURATIONS), help="Learner configuration")
@click.option("--seed", "-s", type=int, default=None, help="First seed")
@click.option("--trials", "-t", type=int, default=None, help="Number of seeded trials")
@click.option("--episodes", "-n", type=int, default=None, help="Episodes per trial")
@click.option("--out", "-o", default=None, help="Output directory for reports")
def run(config_file, env, configuration, seed, trials, episodes, out):
    """Train a configuration over several seeds and write curves."""
    result = CLI.run(config_file, env, configuration, seed, trials, episodes, out)
    if not result["success"]:
        _echo_failure(result)
    click.echo(json.dumps(result, indent=2))


@cli.command()
@env_option
@config_option
@click.option("--abstract/--no-abstract", default=True, help="Count with or without state abstraction")
@click.option("--out", "-o", default=None, help="Write the table to this file")
def account(env, config_file, abstract, out):
    """Print the storage accounting of an environment's task graph."""
    result = CLI.account(env, _load_overrides(config_file), abstract)
    if not result["success"]:
        _echo_failure(result)
    if out:
        Path(out).write_text(result["table"])
        click.echo(f"Accounting written to {out}")
    click.echo(result["table"])
    click.echo(f"Flat Q table: {result['flat']}")


@cli.command()
@env_option
@config_option
@click.option("--abstract/--no-abstract", default=False, help="Key the solved store by the abstractions")
@click.option("--out", "-o", default=None, help="Write the solved store as JSON lines")
def solve(env, config_file, abstract, out):
    """Solve the recursively optimal decomposition exactly."""
    result = CLI.solve(env, _load_overrides(config_file), abstract, out)
    if not result["success"]:
        _echo_failure(result)
    click.echo(json.dumps(result, indent=2))


@cli.command()
@env_option
@config_option
def check(env, config_file):
    """Validate the task graph and check its abstractions for safety."""
    result = CLI.check(env, _load_overrides(config_file))
    if not result["success"]:
        _echo_failure(result)
    click.echo(result["table"])
    for message in result["errors"]:
        click.echo(f"error: {message}")
    for message in result["warnings"]:
        click.echo(f"warning: {message}")
    click.echo("All abstractions safe" if result["safe"] else f"{len(result['violations'])} violations")
