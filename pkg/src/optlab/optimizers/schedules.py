"""Step-size schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

__all__ = ["Schedule", "SCHEDULE_KINDS", "make_schedule", "schedule_value"]

SCHEDULE_KINDS = ("constant", "inv_k", "inv_k_log", "alternating_h")


@dataclass(frozen=True)
class Schedule:
    """``constant``: ``c``; ``inv_k``: ``c/(k+1)^p``; ``inv_k_log``:
    ``c/((k+1) log(k+2))``; ``alternating_h``: ``1/(k+2)`` at even ``k`` and
    ``1/((k+1)(k+2))`` at odd ``k``.
    """

    kind: str
    c: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}; choose from {SCHEDULE_KINDS}")
        if not self.c > 0:
            raise ValueError("schedule constant c must be positive")
        if self.kind == "inv_k" and not self.p > 0:
            raise ValueError("inv_k exponent p must be positive")

    def value(self, k: int) -> float:
        return schedule_value(self, k)

    @property
    def declared_properties(self) -> frozenset:
        if self.kind == "constant":
            return frozenset({"sum_diverges"})
        if self.kind in ("inv_k_log", "alternating_h"):
            return frozenset({"sum_diverges", "sum_sq_finite", "sum_cube_finite"})
        flags = set()
        if self.p <= 1:
            flags.add("sum_diverges")
        if self.p > 0.5:
            flags.add("sum_sq_finite")
        if self.p > 1.0 / 3.0:
            flags.add("sum_cube_finite")
        return frozenset(flags)

    @property
    def monotone(self) -> bool:
        return self.kind != "alternating_h"

    def first_admissible(self, cap: float) -> int:
        """Smallest offset ``j`` with ``alpha_{j+i} <= cap`` for every ``i >= 0``."""
        if not cap > 0:
            raise ValueError("cap must be positive")
        if math.isinf(cap) or self.value(0) <= cap:
            if self.kind != "alternating_h":
                return 0
        if self.kind == "constant":
            raise ValueError(f"constant step {self.c} exceeds the cap {cap}")
        if self.kind == "alternating_h":
            # even-index values 1/(k+2) dominate the tail
            j = max(0, math.ceil(1.0 / cap - 2.0))
            while j > 0 and max(self.value(j - 1), self.value(j)) <= cap:
                j -= 1
            return j
        lo, hi = 0, 1
        while self.value(hi) > cap:
            lo, hi = hi, 2 * hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.value(mid) > cap:
                lo = mid
            else:
                hi = mid
        return hi

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != "alternating_h":
            d["c"] = self.c
        if self.kind == "inv_k":
            d["p"] = self.p
        return d


def schedule_value(s: Schedule, k: int) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    if s.kind == "constant":
        return s.c
    if s.kind == "inv_k":
        return s.c / (k + 1) ** s.p
    if s.kind == "inv_k_log":
        return s.c / ((k + 1) * math.log(k + 2))
    return 1.0 / (k + 2) if k % 2 == 0 else 1.0 / ((k + 1) * (k + 2))


def make_schedule(spec: Mapping | Schedule) -> Schedule:
    if isinstance(spec, Schedule):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    allowed = {"c", "p"}
    extra = set(spec) - allowed
    if extra:
        raise ValueError(f"unknown schedule keys {sorted(extra)}")
    return Schedule(kind, float(spec.get("c", 1.0)), float(spec.get("p", 1.0)))
