"""Hierarchical reproducible random streams.

A ``RandomStream`` is identified by a root seed and a path of child indices.
Its generator is built from ``numpy.random.SeedSequence(seed, spawn_key=path)``
so the draws of a stream depend only on that identity, never on how many
other streams were created before it or in which process.
"""

from functools import cached_property
from typing import Tuple

import numpy as np


class RandomStream:
    """A deterministic stream with derivable independent children.

    Attributes:
        seed: Root seed
        path: Child indices from the root
    """

    def __init__(self, seed: int, path: Tuple[int, ...] = ()) -> None:
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        if any(index < 0 for index in path):
            raise ValueError(f"child indices must be >= 0, got {path}")
        self.seed = int(seed)
        self.path = tuple(int(index) for index in path)

    def child(self, index: int) -> "RandomStream":
        """The independent sub-stream number ``index``."""
        return RandomStream(self.seed, self.path + (index,))

    @cached_property
    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(sequence))

    def uniform(self) -> float:
        """A draw from the open interval (0, 1)."""
        while True:
            u = float(self.generator.random())
            if u > 0.0:
                return u

    def normal(self, mean: float = 0.0, sigma: float = 1.0) -> float:
        return float(self.generator.normal(mean, sigma))

    def exponential(self, mean: float = 1.0) -> float:
        return float(self.generator.exponential(mean))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"

    def __getstate__(self) -> dict:
        return {"seed": self.seed, "path": self.path}

    def __setstate__(self, state: dict) -> None:
        self.seed = state["seed"]
        self.path = state["path"]
