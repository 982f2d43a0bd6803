"""Weight initialization."""

from __future__ import annotations

import numpy as np


def xavier_limit(fan_in: int, fan_out: int) -> float:
    """Bound of the uniform interval: sqrt(6 / (fan_in + fan_out))."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got ({fan_in}, {fan_out})")
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def xavier_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int | None = None,
    fan_out: int | None = None,
) -> np.ndarray:
    """Draw uniformly from [-limit, +limit] with the Xavier/Glorot limit.

    Fans default to a 2-d weight matrix's dimensions; convolution kernels and
    gate blocks pass their receptive-field fans explicitly.
    """
    if fan_in is None or fan_out is None:
        if len(shape) != 2:
            raise ValueError("fans must be given explicitly for non-matrix shapes")
        fan_in, fan_out = shape
    limit = xavier_limit(fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)
