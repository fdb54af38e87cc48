"""Independent oracles for the request-collision formulas.

These never touch the binomial expressions in :mod:`hmacsim.analytic`;
they count collisions over explicit placements of requests into mini-slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmacsim import _kernels


@dataclass(frozen=True)
class MonteCarloEstimate:
    collided_mean: float
    collided_stderr: float
    ratio_mean: float
    ratio_stderr: float
    trials: int


def exhaustive_expected_collided(contenders: int, slots: int) -> float:
    """Exact mean collided count by enumerating every placement."""
    if contenders < 1 or slots < 1:
        raise ValueError("contenders and slots must be positive")
    if slots**contenders > 50_000_000:
        raise ValueError("placement space too large to enumerate")
    return _kernels.enumerate_collided(contenders, slots) / slots**contenders


def exhaustive_success_ratio(contenders: int, slots: int) -> float:
    return 1.0 - exhaustive_expected_collided(contenders, slots) / contenders


def monte_carlo_collided(
    contenders: int,
    slots: int,
    trials: int = 1_000_000,
    seed: int = 0,
    chunk: int = 200_000,
) -> MonteCarloEstimate:
    rng = np.random.default_rng(seed)
    s1 = 0.0
    s2 = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        placements = rng.integers(0, slots, size=(m, contenders))
        c = _kernels.collided_per_trial(placements, slots).astype(np.float64)
        s1 += c.sum()
        s2 += (c * c).sum()
        done += m
    mean = s1 / trials
    var = max(s2 / trials - mean * mean, 0.0) * trials / (trials - 1)
    se = (var / trials) ** 0.5
    return MonteCarloEstimate(
        collided_mean=float(mean),
        collided_stderr=float(se),
        ratio_mean=float(1.0 - mean / contenders),
        ratio_stderr=float(se / contenders),
        trials=trials,
    )
