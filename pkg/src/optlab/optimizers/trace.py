"""Per-iteration records of a single run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trace", "measure_mask", "default_stride", "DIVERGENCE_NORM"]

DIVERGENCE_NORM = 1e12


def default_stride(T: int) -> int:
    return max(1, T // 200)


def measure_mask(T: int, stride: int | None = None) -> np.ndarray:
    """Where the (possibly expensive) measure is evaluated.

    Every ``k <= 64``, every multiple of ``stride``, every power of two and
    ``T`` itself; the dyadic points feed the complexity and tail checks.
    """
    stride = default_stride(T) if stride is None else max(1, int(stride))
    k = np.arange(T + 1)
    mask = (k <= 64) | (k % stride == 0) | (k == T)
    p = 1
    while p <= T:
        mask[p] = True
        p *= 2
    return mask


@dataclass
class Trace:
    """Records for ``k = 0..T``; ``measure`` is NaN off the logging stride and
    ``step_len[T]`` is NaN.  ``extras`` holds additional per-k columns
    (envelope value, natural residual) on the same stride.
    """

    method: str
    k: np.ndarray
    alpha: np.ndarray
    obj: np.ndarray
    measure: np.ndarray
    step_len: np.ndarray
    final_x: np.ndarray
    seed: int = 0
    replication: int = 0
    diverged: bool = False
    offset: int = 0
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.k[-1])

    def __len__(self) -> int:
        return len(self.k)

    def columns(self) -> dict:
        return {"k": self.k, "alpha": self.alpha, "obj": self.obj,
                "measure": self.measure, "step_len": self.step_len}

    def same_path(self, other: "Trace") -> bool:
        """Bit-level equality of the iterate sequence (everything but the measure)."""
        cols = ("k", "alpha", "obj", "step_len")
        if not all(_same(self.columns()[c], other.columns()[c]) for c in cols):
            return False
        if set(self.snapshots) != set(other.snapshots):
            return False
        if not all(_same(self.snapshots[k], other.snapshots[k]) for k in self.snapshots):
            return False
        return _same(self.final_x, other.final_x)

    def identical_to(self, other: "Trace") -> bool:
        """Bit-level equality of all numeric columns and the final iterate."""
        if not all(_same(self.columns()[c], other.columns()[c]) for c in self.columns()):
            return False
        return _same(self.final_x, other.final_x)


def _same(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and a.tobytes() == b.tobytes()
