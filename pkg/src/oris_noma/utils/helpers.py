from typing import Sequence

import numpy as np


def db_to_linear(value_db: float) -> float:
    """
    Converts a power ratio in dB to its linear value, 10^(dB/10).
    """
    return float(10.0 ** (value_db / 10.0))


def rate_threshold(rate: float) -> float:
    """
    SINR threshold for a target spectral efficiency.

    Args:
        rate (float): Target rate in bit/s/Hz.

    Returns:
        float: 2^R - 1.
    """
    return float(2.0 ** rate - 1.0)


def derived_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """
    Builds a child seed sequence addressed by an integer path (scenario, point, receiver, ...).

    The same (seed, path) always gives the same stream, independently of how
    the work is scheduled.
    """
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))


def linspace(start: float, stop: float, steps: int) -> Sequence[float]:
    """
    Evenly spaced sweep values from start to stop, both included, as plain floats.
    """
    return [float(x) for x in np.linspace(start, stop, steps)]
