"""Replication ensembles and jackknife statistics."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..optimizers.trace import Trace
from ..rng import RngStream

__all__ = ["Ensemble", "MIN_REPLICATIONS", "jackknife_stderr", "jackknife", "run_ensemble"]

MIN_REPLICATIONS = 8


def jackknife(stat: Callable[[np.ndarray], np.ndarray], samples: np.ndarray) -> np.ndarray:
    """Jackknife standard error of ``stat`` over the leading axis of ``samples``."""
    samples = np.asarray(samples, dtype=float)
    R = samples.shape[0]
    if R < 2:
        return np.full(np.shape(stat(samples)), np.nan)
    loo = np.stack([stat(np.delete(samples, i, axis=0)) for i in range(R)])
    return np.sqrt((R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


def jackknife_stderr(samples: np.ndarray) -> np.ndarray:
    """Jackknife standard error of the mean over axis 0 (closed form).

    For the sample mean the leave-one-out estimator reduces to ``std/sqrt(R)``.
    """
    samples = np.asarray(samples, dtype=float)
    R = samples.shape[0]
    if R < 2:
        return np.full(samples.shape[1:], np.nan)
    total = samples.sum(axis=0)
    loo = (total - samples) / (R - 1)
    return np.sqrt((R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


@dataclass
class Ensemble:
    """``R`` traces sharing problem, schedule and horizon.

    ``constants`` holds the declared problem constants (``L``, ``C``, ``D``,
    lower bounds, ``theta`` and so on) needed by the checks.
    """

    traces: list
    constants: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        if not self.traces:
            raise ValueError("an ensemble needs at least one trace")
        methods = {t.method for t in self.traces}
        if len(methods) != 1:
            raise ValueError(f"mixed methods in one ensemble: {sorted(methods)}")

    @property
    def R(self) -> int:
        return len(self.traces)

    @property
    def method(self) -> str:
        return self.traces[0].method

    @property
    def T(self) -> int:
        return max(t.T for t in self.traces)

    @property
    def n_diverged(self) -> int:
        return sum(bool(t.diverged) for t in self.traces)

    @property
    def alpha(self) -> np.ndarray:
        longest = max(self.traces, key=len)
        return longest.alpha

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.T + 1)

    def column(self, name: str) -> np.ndarray:
        """``R x (T+1)`` array of a trace column or extra, NaN-padded."""
        out = np.full((self.R, self.T + 1), np.nan)
        for i, t in enumerate(self.traces):
            v = t.columns()[name] if name in t.columns() else t.extras.get(name)
            if v is None:
                raise KeyError(f"column {name!r} missing from replication {i}")
            out[i, : len(v)] = v
        return out

    def has_column(self, name: str) -> bool:
        t = self.traces[0]
        return name in t.columns() or name in t.extras

    def logged(self, name: str = "measure") -> np.ndarray:
        """Indices ``k`` where every replication has a finite value."""
        col = self.column(name)
        return np.flatnonzero(np.all(np.isfinite(col), axis=0))

    def mean(self, name: str, power: float = 1.0) -> np.ndarray:
        return np.mean(self.column(name) ** power, axis=0)

    def stderr(self, name: str, power: float = 1.0) -> np.ndarray:
        return jackknife_stderr(self.column(name) ** power)

    @classmethod
    def from_arrays(cls, alpha, measure, obj=None, step_len=None, method: str = "synthetic",
                    constants: dict | None = None) -> "Ensemble":
        """Build an ensemble from ``R x (T+1)`` arrays (or one row)."""
        measure = np.atleast_2d(np.asarray(measure, dtype=float))
        R, n = measure.shape
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
        obj = np.zeros((R, n)) if obj is None else np.atleast_2d(np.asarray(obj, dtype=float))
        if step_len is None:
            step_len = np.full((R, n), np.nan)
        step_len = np.atleast_2d(np.asarray(step_len, dtype=float))
        traces = [Trace(method, np.arange(n), alpha.copy(), obj[i].copy(), measure[i].copy(),
                        step_len[i].copy(), np.zeros(1), replication=i) for i in range(R)]
        return cls(traces, dict(constants or {}))


def _run_one(args):
    runner, seed, rep, substream = args
    return runner(RngStream(seed, rep, substream=substream))


def run_ensemble(runner: Callable[[RngStream], Trace], R: int, seed: int, jobs: int = 1,
                 substream: Sequence[int] = (), constants: dict | None = None,
                 config: dict | None = None, config_hash: str = "") -> Ensemble:
    """Run ``R`` independent replications; replication ``r`` uses stream ``(seed, r)``.

    With ``jobs > 1`` the runner must be picklable (a module-level function or
    a ``functools.partial`` of one).  Results do not depend on ``jobs``.
    """
    R = int(R)
    if R < 1:
        raise ValueError("R must be positive")
    tasks = [(runner, int(seed), r, tuple(substream)) for r in range(R)]
    if jobs and jobs > 1 and R > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            traces = list(pool.map(_run_one, tasks))
    else:
        traces = [_run_one(t) for t in tasks]
    return Ensemble(traces, dict(constants or {}), dict(config or {}), config_hash)
