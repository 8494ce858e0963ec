"""
Report files for experiment bundles: learning-curve CSVs, storage accounting
tables, value-store checkpoints and a plotting script.
"""
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Iterable, Optional, Union

import pandas as pd

from ..config.logging_config import logger
from ..config.settings import settings
from ..decomp.value_store import save_store
from ..taskgraph.storage import StorageCount
from ..utils.errors import ConfigError

if TYPE_CHECKING:
    from .experiment import ExperimentBundle

CURVE_DTYPES = {
    "primitive_step": "int64",
    "trial": "int64",
    "seed": "int64",
    "cumulative_reward": "float64",
    "episode_return": "float64",
    "episode": "int64",
}

PLOT_SCRIPT = '''"""Plot the learning curves of {label}."""
import matplotlib.pyplot as plt
import pandas as pd

mean = pd.read_csv("{mean_file}")
fig, ax = plt.subplots(figsize=(8, 5))
ax.plot(mean["primitive_step"], mean["smoothed_return"], label="{label}")
ax.set_xlabel("Primitive actions")
ax.set_ylabel("Mean reward per trial ({window}-trial moving average)")
ax.legend()
fig.savefig("{label}.png", dpi=150)
'''


def accounting_table(count: StorageCount) -> str:
    """Per-table itemisation followed by the total."""
    frame = count.to_frame()
    mode = "with abstraction" if count.abstract else "without abstraction"
    lines = [f"Storage for {count.graph} ({mode})", ""]
    if not frame.empty:
        lines.append(frame.to_string(index=False))
    lines.append("")
    lines.append(f"Total: {count.total}")
    return "\n".join(lines) + "\n"


def emit_report(
    bundle: "ExperimentBundle",
    output_dir: Optional[Union[str, Path]] = None,
    reports: Optional[Iterable[str]] = None,
) -> Dict[str, Path]:
    """
    Write the selected reports of a bundle.

    Args:
        bundle: Completed experiment.
        output_dir: Target directory; defaults to the config's, then to the
            harness output root.
        reports: Subset of "curves", "accounting", "plot", "store"; defaults
            to the config's selection.

    Returns:
        Dict[str, Path]: Written file per report kind.

    Raises:
        ConfigError: If the directory cannot be written.
    """
    config = bundle.config
    label = config.label
    out = Path(output_dir or config.output_dir or settings.harness.output_root / label)
    reports = set(reports if reports is not None else config.reports)
    files: Dict[str, Path] = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "curves" in reports or "plot" in reports:
            files["curves"] = out / f"{label}.curves.csv"
            bundle.curves().to_csv(files["curves"], index=False)
            files["mean"] = out / f"{label}.mean.csv"
            bundle.mean_curve().to_csv(files["mean"], index=False)
        if "accounting" in reports:
            files["accounting"] = out / f"{label}.accounting.txt"
            files["accounting"].write_text(accounting_table(bundle.accounting))
        if "plot" in reports:
            files["plot"] = out / f"plot_{label.replace('-', '_')}.py"
            files["plot"].write_text(
                PLOT_SCRIPT.format(label=label, mean_file=files["mean"].name, window=config.window)
            )
        if "store" in reports:
            stored = [t for t in bundle.trials if t.store is not None]
            if stored:
                files["store"] = save_store(stored[0].store, out / f"{label}.seed{stored[0].seed}.store.jsonl")
    except OSError as e:
        raise ConfigError(f"Cannot write reports to {out}: {str(e)}")
    bundle.files.update(files)
    logger.info(f"Wrote {len(files)} report files for {label} to {out}")
    return files


def read_curves(path: Union[str, Path]) -> pd.DataFrame:
    """Load a curves CSV written by `emit_report`."""
    return pd.read_csv(path, dtype=CURVE_DTYPES)
