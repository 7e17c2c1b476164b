"""Verdict containers and their JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["PASS", "FAIL", "INCONCLUSIVE", "SKIPPED", "ConditionReport", "DecompositionReport",
           "to_jsonable"]

PASS, FAIL, INCONCLUSIVE, SKIPPED = "pass", "fail", "inconclusive", "skipped"


def to_jsonable(v):
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return to_jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    statistics: dict = field(default_factory=dict)
    eligible_k_range: tuple | None = None
    config_hash: str = ""
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class DecompositionReport(ConditionReport):
    """Frozen-state resampling of ``x^{k+1} - x^k = mu^p1 A_k + mu^p2 B_k``."""

    martingale_ok: bool = False
    moment_ok: bool = False
    ceiling_ok: bool = False
    resampling: str = "oracle"
