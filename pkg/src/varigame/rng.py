"""Deterministic 64-bit seed mixing and the counter-based random stream.

The whole toolkit draws randomness from a splitmix64 stream: the state is a
64-bit counter advanced by the golden-ratio increment and passed through an
avalanche finalizer.  Per-run streams are derived from a base seed and a run
index so results are reproducible and independent of how runs are scheduled
across threads.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer (a bijection on 64-bit integers)."""
    z = (x + GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_run_seed(seed_base: int, run_index: int) -> int:
    """Seed for run ``run_index`` of a batch with base seed ``seed_base``.

    ``mix64`` is a bijection, so for a fixed base the map is injective in the
    run index.
    """
    return mix64((seed_base & _MASK) ^ mix64(run_index & _MASK))


def mix64_vec(x: np.ndarray) -> np.ndarray:
    """Vectorized ``mix64`` over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (x + np.uint64(GOLDEN)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


class RandomStream:
    """Caller-owned random stream shared between Python code and kernels.

    The state lives in a one-element uint64 array so numba kernels can
    advance it in place.
    """

    def __init__(self, seed: int):
        self._state = np.array([seed & _MASK], dtype=np.uint64)

    @classmethod
    def for_run(cls, seed_base: int, run_index: int) -> "RandomStream":
        return cls(derive_run_seed(seed_base, run_index))

    @property
    def state(self) -> np.ndarray:
        return self._state

    def next_u64(self) -> int:
        s = (int(self._state[0]) + GOLDEN) & _MASK
        self._state[0] = s
        z = ((s ^ (s >> 30)) * _M1) & _MASK
        z = ((z ^ (z >> 27)) * _M2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)
