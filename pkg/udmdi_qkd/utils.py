import math
from typing import Optional, Sequence

import numpy as np


def build_grid(
    values: Optional[Sequence[float]] = None,
    start: Optional[float] = None,
    stop: Optional[float] = None,
    step: Optional[float] = None,
) -> list[float]:
    """
    Expand a sweep grid from an explicit list or a ``(start, stop, step)`` triple.

    The range form includes ``stop`` when it lies on the lattice. Lattice points
    are computed as ``start + i * step`` and rounded to 12 decimals, so grids
    built on different machines print identically.

    Args:
        values: Explicit grid values; takes precedence over the range.
        start: First grid value.
        stop: Last admissible grid value.
        step: Positive spacing.

    Returns:
        The grid as a list of floats (possibly empty).
    """
    if values is not None:
        return [float(v) for v in values]
    if start is None or stop is None or step is None:
        return []
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(max(count, 0))]


def format_float(value: Optional[float]) -> str:
    """Render a float for CSV output with 10 significant digits."""
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.10g}"


def derive_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """
    Seed stream for one unit of work (a Monte Carlo trial).

    ``SeedSequence`` hashes the master entropy together with the spawn key, so the
    stream for ``index`` depends only on ``(master_seed, index)`` and never on the
    order in which workers pick up their tasks.
    """
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


def chunked(count: int, size: int) -> list[range]:
    """Split ``range(count)`` into consecutive ranges of at most ``size`` items."""
    size = max(1, size)
    return [range(lo, min(lo + size, count)) for lo in range(0, count, size)]
