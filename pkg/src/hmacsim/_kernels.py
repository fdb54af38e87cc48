"""Hot loops for the request-collision oracles.

Each kernel has a numba version and a pure-numpy version with identical
results.  Set ``HMACSIM_DISABLE_NUMBA=1`` to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("HMACSIM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
except ImportError:  # pragma: no cover - depends on environment
    njit = None

USING_NUMBA = njit is not None


def collided_per_trial_numpy(placements: np.ndarray, slots: int) -> np.ndarray:
    """Requests per row that share their slot with another request."""
    trials, n = placements.shape
    flat = placements.astype(np.int64) + slots * np.arange(trials, dtype=np.int64)[:, None]
    counts = np.bincount(flat.ravel(), minlength=trials * slots).reshape(trials, slots)
    return np.where(counts >= 2, counts, 0).sum(axis=1)


def enumerate_collided_numpy(contenders: int, slots: int) -> int:
    """Total collided requests summed over all ``slots**contenders`` placements."""
    total = slots**contenders
    idx = np.arange(total, dtype=np.int64)
    digits = np.empty((total, contenders), dtype=np.int64)
    for k in range(contenders):
        digits[:, k] = idx % slots
        idx //= slots
    return int(collided_per_trial_numpy(digits, slots).sum())


if USING_NUMBA:

    @njit(cache=True)
    def _collided_per_trial_jit(placements, slots):
        trials, n = placements.shape
        out = np.zeros(trials, dtype=np.int64)
        counts = np.zeros(slots, dtype=np.int64)
        for t in range(trials):
            for s in range(slots):
                counts[s] = 0
            for i in range(n):
                counts[placements[t, i]] += 1
            c = 0
            for s in range(slots):
                if counts[s] >= 2:
                    c += counts[s]
            out[t] = c
        return out

    @njit(cache=True)
    def _enumerate_collided_jit(contenders, slots):
        digits = np.zeros(contenders, dtype=np.int64)
        counts = np.zeros(slots, dtype=np.int64)
        total = 0
        while True:
            for s in range(slots):
                counts[s] = 0
            for i in range(contenders):
                counts[digits[i]] += 1
            for s in range(slots):
                if counts[s] >= 2:
                    total += counts[s]
            # mixed-radix increment
            k = 0
            while k < contenders:
                digits[k] += 1
                if digits[k] < slots:
                    break
                digits[k] = 0
                k += 1
            if k == contenders:
                return total

    def collided_per_trial(placements: np.ndarray, slots: int) -> np.ndarray:
        return _collided_per_trial_jit(np.ascontiguousarray(placements, dtype=np.int64), slots)

    def enumerate_collided(contenders: int, slots: int) -> int:
        return int(_enumerate_collided_jit(contenders, slots))

else:
    collided_per_trial = collided_per_trial_numpy
    enumerate_collided = enumerate_collided_numpy
