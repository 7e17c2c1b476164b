"""Trace persistence: one CSV per replication plus a JSON manifest.

The CSV header is fixed as ``k,alpha,obj,measure,step_len``.  Extra per-k
columns (envelope value, natural residual) go to a sidecar CSV with header
``k,<names...>``.  Floats are written with ``repr`` so a reload is bit-exact.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .optimizers.trace import Trace
from .verifier.ensemble import Ensemble
from .verifier.reports import to_jsonable

__all__ = ["FORMAT_VERSION", "CSV_HEADER", "TraceIOError", "write_trace_csv", "read_trace_csv",
           "write_ensemble", "read_manifest", "load_ensemble", "summarize", "from_jsonable"]

FORMAT_VERSION = 1
CSV_HEADER = ("k", "alpha", "obj", "measure", "step_len")
MANIFEST = "manifest.json"


class TraceIOError(OSError):
    """A trace or manifest could not be written or read."""


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path: Path, header, cols) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])


def _read_rows(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceIOError(f"{path}: empty file")
    header, body = tuple(rows[0]), rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


def write_trace_csv(tr: Trace, path: str | os.PathLike) -> None:
    c = tr.columns()
    _write_rows(Path(path), CSV_HEADER, [c[n] for n in CSV_HEADER])


def read_trace_csv(path: str | os.PathLike) -> dict:
    header, data = _read_rows(Path(path))
    if header != CSV_HEADER:
        raise TraceIOError(f"{path}: header {','.join(header)} is not {','.join(CSV_HEADER)}")
    out = {n: data[:, i].copy() for i, n in enumerate(header)}
    out["k"] = out["k"].astype(np.int64)
    return out


def from_jsonable(v):
    """Inverse of the string encoding of non-finite floats."""
    if isinstance(v, dict):
        return {k: from_jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [from_jsonable(x) for x in v]
    if v == "inf":
        return float("inf")
    if v == "-inf":
        return float("-inf")
    return v


def summarize(ens: Ensemble) -> dict:
    """Final mean measure over non-diverged replications and the divergence count."""
    finals = []
    for t in ens.traces:
        if t.diverged:
            continue
        m = t.measure[np.isfinite(t.measure)]
        if m.size:
            finals.append(m[-1])
    return {"R": ens.R, "T": ens.T, "n_diverged": ens.n_diverged,
            "final_mean_measure": float(np.mean(finals)) if finals else float("nan")}


def write_ensemble(ens: Ensemble, out_dir: str | os.PathLike) -> Path:
    """Write every replication, then the manifest; returns the manifest path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        reps = []
        for t in ens.traces:
            name = f"rep_{t.replication:04d}.csv"
            write_trace_csv(t, out / name)
            entry = {"file": name, "replication": t.replication, "seed": t.seed, "offset": t.offset,
                     "diverged": bool(t.diverged), "warnings": list(t.warnings),
                     "final_x": [_fmt(v) for v in np.asarray(t.final_x).reshape(-1)],
                     "meta": t.meta}
            if t.extras:
                ename = f"rep_{t.replication:04d}.extras.csv"
                names = sorted(t.extras)
                _write_rows(out / ename, ("k",) + tuple(names), [t.k] + [t.extras[n] for n in names])
                entry["extras_file"] = ename
            reps.append(entry)
        manifest = {"format_version": FORMAT_VERSION, "method": ens.method, "config": ens.config,
                    "config_hash": ens.config_hash, "constants": ens.constants,
                    "replications": reps, "summary": summarize(ens)}
        path = out / MANIFEST
        text = json.dumps(to_jsonable(manifest), indent=2, sort_keys=True)
        path.write_text(text + "\n")
    except OSError as exc:
        raise TraceIOError(f"cannot write to {out}: {exc}") from exc
    return path


def read_manifest(path: str | os.PathLike) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST
    try:
        m = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceIOError(f"cannot read manifest {p}: {exc}") from exc
    if m.get("format_version") != FORMAT_VERSION:
        raise TraceIOError(f"{p}: unsupported format_version {m.get('format_version')}")
    m["_dir"] = str(p.parent)
    return from_jsonable(m)


def load_ensemble(path: str | os.PathLike) -> Ensemble:
    """Rebuild the :class:`Ensemble` described by a manifest (or its directory)."""
    m = read_manifest(path)
    base = Path(m["_dir"])
    traces = []
    try:
        for e in m["replications"]:
            c = read_trace_csv(base / e["file"])
            extras = {}
            if "extras_file" in e:
                header, data = _read_rows(base / e["extras_file"])
                extras = {n: data[:, i].copy() for i, n in enumerate(header) if n != "k"}
            traces.append(Trace(m["method"], c["k"], c["alpha"], c["obj"], c["measure"], c["step_len"],
                                np.array([float(v) for v in e["final_x"]]), seed=e["seed"],
                                replication=e["replication"], diverged=e["diverged"],
                                offset=e["offset"], warnings=list(e["warnings"]), extras=extras,
                                meta=e.get("meta") or {}))
    except (OSError, KeyError, ValueError) as exc:
        raise TraceIOError(f"cannot load traces from {base}: {exc}") from exc
    return Ensemble(traces, m["constants"], m["config"], m["config_hash"])
