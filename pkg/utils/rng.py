"""
Deterministic, splittable random number generator

Rng(seed) wraps numpy's counter-based Philox bit generator keyed by a 64-bit
seed. derive(i) produces a child stream whose seed is a pure function of
(parent seed, i), so sibling streams never depend on how many draws the
parent or another child made.
"""

from typing import Any, Optional, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


def mix64(value: int) -> int:
    """splitmix64 finalizer"""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Rng:
    """Seeded random stream; one instance must not be shared across threads"""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def derive(self, child_index: int) -> "Rng":
        return Rng(mix64(self.seed ^ mix64(int(child_index) & MASK64)))

    # ==================== DRAWS ====================

    def random(self, size: Optional[Any] = None):
        return self._gen.random(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Optional[Any] = None):
        return self._gen.uniform(low, high, size)

    def normal(self, mean: float = 0.0, std: float = 1.0, size: Optional[Any] = None):
        return self._gen.normal(mean, std, size)

    def integers(self, low: int, high: Optional[int] = None, size: Optional[Any] = None):
        """Half-open [low, high) like numpy"""
        return self._gen.integers(low, high, size)

    def choice(self, options: Sequence[Any]):
        if len(options) == 0:
            raise ValueError("choice from an empty sequence")
        return options[int(self._gen.integers(0, len(options)))]

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
