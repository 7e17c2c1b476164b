"""Counter-based random streams.

Every draw is a pure function of ``(seed, replication_index, substream, counter)``:
the key of a Philox generator is derived from the first three, and the
counter selects a disjoint block of the Philox sequence.  Streams can
therefore be replayed, split and run in any order without changing the
numbers any replication sees.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["RngStream", "default_seed"]

_SEED_ENV = "OPT_LAB_SEED"


def default_seed(fallback: int = 0) -> int:
    """Seed taken from ``OPT_LAB_SEED`` if set, else ``fallback``."""
    raw = os.environ.get(_SEED_ENV)
    if raw is None or raw.strip() == "":
        return fallback
    return int(raw)


class RngStream:
    """A splittable stream owned by exactly one run.

    Parameters
    ----------
    seed : int
        64-bit experiment seed.
    replication_index : int
        Index of the replication; distinct indices give independent streams.
    counter : int
        Number of draw calls already made.  Each call to a sampling method
        consumes one counter value.
    substream : tuple of int
        Extra path components, used by :meth:`spawn`.
    """

    def __init__(self, seed: int, replication_index: int = 0, counter: int = 0,
                 substream: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.replication_index = int(replication_index)
        self.counter = int(counter)
        self.substream = tuple(int(s) for s in substream)
        entropy = [self.seed, self.replication_index, *self.substream]
        key = np.random.SeedSequence(entropy).generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def __repr__(self) -> str:
        return (f"RngStream(seed={self.seed}, replication_index={self.replication_index}, "
                f"counter={self.counter}, substream={self.substream})")

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.seed, self.replication_index, self.counter

    def spawn(self, *path: int) -> RngStream:
        """Independent child stream identified by ``path`` (counter starts at 0)."""
        return RngStream(self.seed, self.replication_index, 0, self.substream + tuple(path))

    def copy(self) -> RngStream:
        return RngStream(self.seed, self.replication_index, self.counter, self.substream)

    def _next(self) -> np.random.Generator:
        # high counter word carries the call index; low words run inside the call
        c = self.counter
        self._state["state"]["counter"] = np.array([0, 0, c & 0xFFFFFFFFFFFFFFFF, c >> 64],
                                                   dtype=np.uint64)
        self._state["buffer_pos"] = 4
        self._state["has_uint32"] = 0
        self._state["uinteger"] = 0
        self._bitgen.state = self._state
        self.counter += 1
        return self._gen

    def normal(self, size=None) -> np.ndarray:
        return self._next().standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._next().uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._next().integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` by Fisher-Yates."""
        perm = np.arange(n)
        if n < 2:
            self.counter += 1
            return perm
        # swap partner for position i is uniform on {0, ..., i}
        partners = self._next().integers(0, np.arange(n, 1, -1))
        for pos, j in zip(range(n - 1, 0, -1), partners):
            perm[pos], perm[j] = perm[j], perm[pos]
        return perm
