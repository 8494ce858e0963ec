"""
Smoothing for learning curves.
"""
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd


def moving_average(series: Union[Sequence[float], np.ndarray], window: int) -> np.ndarray:
    """
    Centered moving average that keeps the series length.

    The window for position i starts at i - window // 2 and is shifted
    inward at the edges so it always covers `window` points. A window longer
    than the series averages the whole series.

    Args:
        series: Values to smooth.
        window: Number of points per average, at least 1.

    Returns:
        np.ndarray: Smoothed values, same length as `series`.
    """
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    values = np.asarray(series, dtype=float)
    n = len(values)
    if n == 0:
        return values.copy()
    window = min(window, n)
    sums = np.concatenate(([0.0], np.cumsum(values)))
    starts = np.clip(np.arange(n) - window // 2, 0, n - window)
    return (sums[starts + window] - sums[starts]) / window


def steps_to_level(
    steps: Union[Sequence[int], np.ndarray],
    returns: Union[Sequence[float], np.ndarray],
    level: float,
    window: int,
) -> Optional[int]:
    """
    Primitive steps taken when the trailing mean return first reaches `level`.

    Only full windows count, so an early lucky episode cannot satisfy it.

    Args:
        steps: Cumulative primitive steps at the end of each episode.
        returns: Return of each episode.
        level: Mean return to reach.
        window: Episodes per trailing mean, at least 1.

    Returns:
        Optional[int]: Cumulative steps at the first qualifying episode, None if never reached.
    """
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    trailing = pd.Series(np.asarray(returns, dtype=float)).rolling(window, min_periods=window).mean()
    hits = np.flatnonzero(trailing.to_numpy() >= level)
    if not len(hits):
        return None
    return int(np.asarray(steps)[hits[0]])
