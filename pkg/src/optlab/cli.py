"""Command line entry point: ``run``, ``verify``, ``plot`` and ``counterexample``.

Exit codes: 0 success, 1 a verified condition failed, 2 invalid config or
arguments, 3 I/O failure, 4 every replication diverged (manifest still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import apply_overrides, load_config_file, set_dotted
from .counterexample import CounterexampleTrace, counterexample_summary, run_counterexample
from .experiment import ConfigError, build, normalize_config, run_config
from .io import TraceIOError, load_ensemble, write_ensemble
from .optimizers import make_schedule
from .plotting import PLOT_KINDS, make_plot
from .rng import RngStream, default_seed
from .stationarity import envelope_lipschitz, moreau_prox
from .verifier import (FAIL, SKIPPED, ConditionParams, ConditionReport, MeasureSpec, check_complexity_curve,
                       check_P1, check_P2, check_P3, check_recursion, to_jsonable)

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FAIL", "EXIT_CONFIG", "EXIT_IO", "EXIT_DIVERGED"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3, 4
CONDITIONS = ("P1", "P2", "P3", "P3prime", "recursion:<name>", "complexity")

# flag -> dotted config key
RUN_FLAGS = {
    "method": "method", "model_type": "model_type", "C": "oracle.C", "D": "oracle.D",
    "noise_kind": "oracle.noise_kind", "T": "T", "reps": "reps", "seed": "seed",
    "measure": "measure", "stride": "stride", "theta": "theta", "alpha_cap": "alpha_cap",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="optlab", description="Stochastic optimization experiments and condition checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an ensemble and write traces plus a manifest")
    r.add_argument("--config", help="TOML config file; flags override it")
    r.add_argument("--method", choices=("sgd", "rr", "prox_sgd", "smm"))
    r.add_argument("--problem", help="catalog problem name (replaces the config's problem table)")
    r.add_argument("--regularizer", help="regularizer kind (replaces the config's regularizer table)")
    r.add_argument("--lam", type=float, help="regularizer weight")
    r.add_argument("--model-type", dest="model_type", choices=("subgradient", "prox_linear", "proximal_point"))
    r.add_argument("--C", type=float)
    r.add_argument("--D", type=float)
    r.add_argument("--noise-kind", dest="noise_kind")
    r.add_argument("--schedule", help="schedule kind (replaces the config's schedule table)")
    r.add_argument("--c", type=float, help="schedule constant")
    r.add_argument("--p", type=float, help="schedule exponent")
    r.add_argument("--T", type=int)
    r.add_argument("--reps", type=int)
    r.add_argument("--seed", type=int, help="base seed (fallback: OPT_LAB_SEED, then 0)")
    r.add_argument("--measure", choices=("grad", "nat_residual", "env_grad"))
    r.add_argument("--stride", type=int)
    r.add_argument("--theta", type=float)
    r.add_argument("--alpha-cap", dest="alpha_cap", type=float)
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override such as problem.dim=3 (repeatable)")
    r.add_argument("--out", default="run_out", help="output directory")
    r.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")

    v = sub.add_parser("verify", help="check conditions on a saved ensemble")
    v.add_argument("manifest", help="manifest.json or its directory")
    v.add_argument("--conditions", required=True,
                   help=f"comma-separated list from {', '.join(CONDITIONS)}")
    v.add_argument("--out", help="reports JSON path (default: next to the manifest)")
    for name, default in (("a", 2.0), ("b", 2.0), ("q", 2.0), ("p1", 2.0), ("p2", 2.0)):
        v.add_argument(f"--{name}", type=float, default=default)
    v.add_argument("--A", type=float, help="P3 constant A (default derived from the method)")
    v.add_argument("--B", type=float, help="P3 constant B (default derived from the method)")
    v.add_argument("--factor", type=float, default=2.0, help="P2 increment shrink factor")
    v.add_argument("--threshold", type=float, default=-0.4, help="complexity slope threshold")

    pl = sub.add_parser("plot", help="write an SVG plot")
    pl.add_argument("source", help="manifest (or its directory) or a counterexample CSV")
    pl.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pl.add_argument("--recursion", help="recursion name for recursion_slack")
    pl.add_argument("--out", help="SVG path (default: <kind>.svg next to the source)")

    c = sub.add_parser("counterexample", help="run the alternating-step counterexample")
    c.add_argument("--T", type=int, default=10_000)
    c.add_argument("--out", default="counterexample_out")
    c.add_argument("--plot", action="store_true", help="also write counterexample.svg")
    return p


# ---------------------------------------------------------------- run

def _run_config(args) -> dict:
    cfg = load_config_file(args.config) if args.config else {}
    if args.problem:
        cfg["problem"] = {"name": args.problem}
    if args.regularizer:
        cfg["regularizer"] = {"kind": args.regularizer}
    if args.lam is not None:
        set_dotted(cfg, "regularizer.lam", args.lam)
    if args.schedule:
        cfg["schedule"] = {"kind": args.schedule}
    for flag, key in (("c", "schedule.c"), ("p", "schedule.p")):
        if getattr(args, flag) is not None:
            set_dotted(cfg, key, getattr(args, flag))
    for flag, key in RUN_FLAGS.items():
        if getattr(args, flag) is not None:
            set_dotted(cfg, key, getattr(args, flag))
    apply_overrides(cfg, args.set)
    if "seed" not in cfg:
        cfg["seed"] = default_seed(0)
    return cfg


def cmd_run(args) -> int:
    cfg = normalize_config(_run_config(args))
    ens = run_config(cfg, jobs=max(1, args.jobs))
    path = write_ensemble(ens, args.out)
    print(json.dumps({"manifest": str(path), "config_hash": ens.config_hash, "R": ens.R,
                      "n_diverged": ens.n_diverged}))
    if ens.n_diverged == ens.R:
        print("error: every replication diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


# ---------------------------------------------------------------- verify

def _skip(name, reason, h=""):
    return ConditionReport(name, SKIPPED, {}, None, h, reason)


def _measure_fn(ens, comps):
    m = ens.method
    if m in ("sgd", "rr"):
        obj = comps.objective
        return MeasureSpec(obj.gradient, float(obj.lipschitz))
    th = ens.constants["theta"]
    cp = comps.cp
    if not cp.smooth:
        return None
    return MeasureSpec(lambda x: moreau_prox(cp, th, x).env_grad, envelope_lipschitz(cp, th))


def _p1(ens, comps):
    ms = _measure_fn(ens, comps)
    if ms is None:
        return _skip("P1", "declared envelope modulus needs a smooth f", ens.config_hash)
    x0 = comps.x0

    def sampler(rng):
        x = x0 + rng.normal(size=x0.shape)
        return x, x + 10.0 ** rng.uniform(-4, 0) * rng.normal(size=x0.shape)

    rep = check_P1(ms, sampler, n_pairs=100, rng=RngStream(ens.config.get("seed", 0), 0, substream=(1,)))
    rep.config_hash = ens.config_hash
    return rep


def _p3_constants(ens, args):
    """Method-derived ``(A, B)`` for the step-length bound with ``q = 2``.

    The objective gap is replaced by its largest ensemble mean, which makes
    ``A`` a data-dependent but conservative constant.
    """
    c = ens.constants
    m = ens.method
    if m == "sgd":
        gap = float(np.nanmax(ens.mean("obj"))) - c["f_lower"]
        return c["C"] * max(gap, 0.0) + c["D"], 1.0
    if m == "prox_sgd" and ens.has_column("env"):
        L, C, D, Lp, th = c["L"], c["C"], c["D"], c["L_phi"], c["theta"]
        gap = max(float(np.nanmax(ens.mean("env"))) - c["psi_lower"], 0.0)
        return 8 * (2 * L + C) * gap + 4 * (((2 * L + C) * th + 1) * Lp ** 2 + D), 0.0
    if m == "smm" and np.isfinite(c.get("L_model", np.inf)):
        L, Lp = c["L_model"], c["L_phi"]
        return 16 * (L + Lp) ** 2 + 8 * L ** 2, 0.0
    return None


def _p3(ens, args, relations):
    name = "P3" if relations == "P4" else "P3prime"
    A, B = args.A, args.B
    if A is None or B is None:
        derived = _p3_constants(ens, args)
        if derived is None:
            return _skip(name, f"no default step-length constants for method {ens.method}; pass --A and --B",
                         ens.config_hash)
        A = derived[0] if A is None else A
        B = derived[1] if B is None else B
    cp = ConditionParams(args.a, args.b, args.q, args.p1, args.p2, A, B)
    s = make_schedule(ens.config["schedule"]) if "schedule" in ens.config else None
    return check_P3(ens, cp, s, relations=relations)


def run_condition(name: str, ens, args, comps=None) -> ConditionReport:
    """Evaluate one named condition; inapplicable ones come back skipped."""
    try:
        if name == "P1":
            if comps is None:
                return _skip("P1", "needs the run config to rebuild the measure", ens.config_hash)
            return _p1(ens, comps)
        if name == "P2":
            return check_P2(ens, a=args.a, factor=args.factor)
        if name in ("P3", "P3prime"):
            return _p3(ens, args, "P4" if name == "P3" else "P4prime")
        if name == "complexity":
            return check_complexity_curve(ens, threshold=args.threshold)
        if name.startswith("recursion:"):
            return check_recursion(ens, name.split(":", 1)[1])
    except (ValueError, KeyError) as exc:
        return _skip(name, str(exc), ens.config_hash)
    raise ConfigError(f"unknown condition {name!r}; choose from {', '.join(CONDITIONS)}")


def cmd_verify(args) -> int:
    names = [n.strip() for n in args.conditions.split(",") if n.strip()]
    for n in names:
        if n not in ("P1", "P2", "P3", "P3prime", "complexity") and not n.startswith("recursion:"):
            raise ConfigError(f"unknown condition {n!r}; choose from {', '.join(CONDITIONS)}")
    ens = load_ensemble(args.manifest)
    comps = None
    if "P1" in names and ens.config:
        try:
            comps = build(normalize_config(ens.config))
        except ConfigError:
            comps = None
    reports = [run_condition(n, ens, args, comps) for n in names]
    doc = {"config_hash": ens.config_hash, "reports": [r.to_dict() for r in reports]}
    text = json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n"
    src = Path(args.manifest)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent) / "reports.json"
    try:
        out.write_text(text)
    except OSError as exc:
        raise TraceIOError(f"cannot write {out}: {exc}") from exc
    for r in reports:
        line = f"{r.condition}: {r.verdict}"
        print(line + (f" ({r.reason})" if r.reason else ""))
    return EXIT_FAIL if any(r.verdict == FAIL for r in reports) else EXIT_OK


# ---------------------------------------------------------------- plot and counterexample

CE_HEADER = ("k", "x", "grad", "alpha", "obj", "running_min_sq")


def write_counterexample_csv(tr: CounterexampleTrace, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CE_HEADER) + "\n")
        for row in zip(*(getattr(tr, n) for n in CE_HEADER)):
            fh.write(str(int(row[0])) + "," + ",".join(repr(float(v)) for v in row[1:]) + "\n")


def read_counterexample_csv(path) -> CounterexampleTrace:
    with open(path) as fh:
        header = tuple(fh.readline().strip().split(","))
        if header != CE_HEADER:
            raise KeyError(f"{path} is not a counterexample trace (columns {','.join(header)})")
        data = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    cols = {n: data[:, i] for i, n in enumerate(CE_HEADER)}
    cols["k"] = cols["k"].astype(np.int64)
    return CounterexampleTrace(**cols)


def cmd_plot(args) -> int:
    src = Path(args.source)
    if args.kind == "counterexample":
        obj = read_counterexample_csv(src)
    else:
        obj = load_ensemble(src)
    try:
        svg = make_plot(args.kind, obj, args.recursion)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent) / f"{args.kind}.svg"
    try:
        out.write_text(svg)
    except OSError as exc:
        raise TraceIOError(f"cannot write {out}: {exc}") from exc
    print(str(out))
    return EXIT_OK


def cmd_counterexample(args) -> int:
    try:
        tr = run_counterexample(args.T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    summary = counterexample_summary(tr)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_counterexample_csv(tr, out / "counterexample.csv")
        (out / "summary.json").write_text(json.dumps(to_jsonable(summary), indent=2, sort_keys=True) + "\n")
        if args.plot:
            (out / "counterexample.svg").write_text(make_plot("counterexample", tr))
    except OSError as exc:
        raise TraceIOError(f"cannot write to {out}: {exc}") from exc
    print(json.dumps(to_jsonable(summary), sort_keys=True))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "plot": cmd_plot, "counterexample": cmd_counterexample}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
