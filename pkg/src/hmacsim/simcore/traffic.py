"""Application packet generators."""

from __future__ import annotations

import math

import numpy as np


class TrafficError(ValueError):
    pass


def traffic_source(
    node: int,
    pattern: str,
    rng: np.random.Generator,
    cycle: int,
    horizon: int,
    *,
    start_frame: int = 1,
    burst: int = 1,
    rate: float = 1.0,
    jitter: bool = True,
    count: int = 0,
) -> list[int]:
    """Creation ticks of every packet ``node`` generates before ``horizon``.

    ``uniform``: one packet at a uniformly random offset inside
    ``start_frame``.  ``constant``: ``rate`` packets per frame, the k-th at
    ``k / rate`` frames past ``start_frame`` plus, with ``jitter``, a
    uniform offset inside that frame; at most ``count`` packets when
    ``count`` is positive.  ``burst``: ``burst`` packets at the
    boundary of ``start_frame``.
    """
    base = start_frame * cycle
    if pattern == "none":
        return []
    if pattern == "uniform":
        return [base + int(rng.integers(0, cycle))]
    if pattern == "burst":
        if burst < 1:
            raise TrafficError("burst size must be positive")
        return [base] * burst
    if pattern == "constant":
        if not rate > 0:
            raise TrafficError("rate must be positive")
        out = []
        k = 0
        while count <= 0 or k < count:
            t = base + math.floor(k * cycle / rate)
            if jitter:
                t += int(rng.integers(0, cycle))
            if t >= horizon:
                break
            out.append(t)
            k += 1
        return out
    raise TrafficError(f"unknown traffic pattern {pattern!r}")
