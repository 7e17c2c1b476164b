"""Experiment configuration: validation, component assembly and replication runs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import partial
from typing import Mapping

import numpy as np

from .optimizers import (MODEL_TYPES, OracleSubgradientModel, build_smm_problem, finite_sum_model,
                         make_schedule, run_prox_sgd, run_rr, run_sgd, run_smm, smm_theta)
from .optimizers.models import SMM_CATALOG
from .problems import AbcOracle, FiniteSumObjective, build_problem
from .regularizers import make_regularizer
from .rng import RngStream
from .stationarity import CompositeProblem, default_alpha, default_theta
from .verifier.ensemble import Ensemble, run_ensemble

__all__ = ["ConfigError", "METHODS", "MEASURES", "normalize_config", "config_hash", "build",
           "Components", "run_replication", "run_config"]

METHODS = ("sgd", "rr", "prox_sgd", "smm")
MEASURES = ("grad", "nat_residual", "env_grad")
UNHASHED = ("out", "jobs")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


DEFAULTS = {
    "method": "sgd",
    "problem": {"name": "quadratic"},
    "regularizer": None,
    "model_type": None,
    "oracle": {"C": 0.0, "D": 0.0, "noise_kind": "gaussian_isotropic"},
    "schedule": {"kind": "inv_k", "c": 1.0, "p": 1.0},
    "T": 1000,
    "reps": 8,
    "seed": 0,
    "measure": None,
    "stride": None,
    "x0": None,
    "theta": None,
    "alpha_cap": None,
}


def normalize_config(cfg: Mapping) -> dict:
    """Fill defaults, coerce types and check method/spec compatibility."""
    out = json.loads(json.dumps(DEFAULTS))
    for key, v in cfg.items():
        if key in ("problem", "oracle", "schedule", "regularizer") and isinstance(v, Mapping):
            base = out.get(key) or {}
            if key in ("problem", "schedule", "regularizer") and ("name" in v or "kind" in v):
                base = {}
            base = dict(base)
            base.update(v)
            out[key] = base
        else:
            out[key] = v
    if out["method"] not in METHODS:
        raise ConfigError(f"unknown method {out['method']!r}; choose from {METHODS}")
    try:
        out["T"] = int(out["T"])
        out["reps"] = int(out["reps"])
        out["seed"] = int(out["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"T, reps and seed must be integers: {exc}") from exc
    if out["T"] < 1 or out["reps"] < 1:
        raise ConfigError("T and reps must be positive")
    if not 0 <= out["seed"] < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    m = out["method"]
    name = out["problem"].get("name")
    if m in ("prox_sgd", "smm") and not out["regularizer"]:
        raise ConfigError(f"method {m} requires a regularizer")
    if m == "smm" and out["model_type"] not in MODEL_TYPES:
        raise ConfigError(f"method smm requires model_type in {MODEL_TYPES}")
    if m != "smm" and name in SMM_CATALOG:
        raise ConfigError(f"problem {name} is only available to method smm")
    measure = out["measure"] or ("grad" if m in ("sgd", "rr") else "env_grad")
    if m in ("sgd", "rr") and measure != "grad":
        raise ConfigError(f"method {m} supports measure grad only")
    if m == "smm" and measure != "env_grad":
        raise ConfigError("method smm supports measure env_grad only")
    if m == "prox_sgd" and measure == "grad":
        raise ConfigError("method prox_sgd measures nat_residual or env_grad")
    out["measure"] = measure
    if out["stride"] is not None:
        out["stride"] = int(out["stride"])
    for key in ("theta", "alpha_cap"):
        if out[key] is not None:
            out[key] = float(out[key])
    return out


def config_hash(cfg: Mapping) -> str:
    """sha256 of the canonical JSON of the semantic fields."""
    sem = {k: v for k, v in cfg.items() if k not in UNHASHED}
    text = json.dumps(sem, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Components:
    method: str
    objective: object
    oracle: AbcOracle | None
    cp: CompositeProblem | None
    model: object
    schedule: object
    x0: np.ndarray
    constants: dict


def _x0(cfg, dim):
    v = cfg.get("x0")
    if v is None:
        return np.ones(dim)
    x = np.asarray(v, dtype=float).reshape(-1)
    if x.size == 1:
        x = np.full(dim, float(x[0]))
    if x.size != dim:
        raise ConfigError(f"x0 has length {x.size}, problem dimension is {dim}")
    return x


def build(cfg: Mapping) -> Components:
    """Assemble problem, oracle, regularizer, model and constants from a normalized config."""
    m = cfg["method"]
    try:
        sched = make_schedule(cfg["schedule"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    pspec = cfg["problem"]
    try:
        if m == "smm" and pspec.get("name") in SMM_CATALOG:
            model = build_smm_problem(pspec, cfg["model_type"])
            obj = model.objective
        else:
            obj = build_problem(pspec)
            model = None
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"problem: {exc}") from exc
    if m == "rr" and not isinstance(obj, FiniteSumObjective):
        raise ConfigError(f"method rr requires a finite-sum problem; {pspec.get('name')} is not one")
    oc = cfg["oracle"]
    oracle = None
    if not (m == "smm" and model is not None):
        try:
            oracle = AbcOracle(obj, float(oc.get("C", 0.0)), float(oc.get("D", 0.0)),
                               oc.get("noise_kind", "gaussian_isotropic"))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"oracle: {exc}") from exc
    phi = None
    cp = None
    if cfg.get("regularizer"):
        r = dict(cfg["regularizer"])
        kind = r.pop("kind", r.pop("name", None))
        try:
            phi = make_regularizer(kind, r, obj.dim)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"regularizer: {exc}") from exc
        cp = CompositeProblem(obj, phi)
    const = {"f_lower": float(obj.lower_bound)}
    if m == "smm" and model is None:
        if cfg["model_type"] == "subgradient":
            model = OracleSubgradientModel(oracle)
        elif isinstance(obj, FiniteSumObjective):
            model = finite_sum_model(obj, cfg["model_type"])
        else:
            raise ConfigError(f"model_type {cfg['model_type']} needs a finite-sum or model-based problem")
    if getattr(obj, "smooth", True):
        const["L"] = float(obj.lipschitz)
    if oracle is not None:
        const.update(C=oracle.C, D=oracle.D)
    if isinstance(obj, FiniteSumObjective):
        const["N"] = obj.N
    if cp is not None:
        const.update(tau=phi.tau, L_phi=float(phi.lipschitz_Lphi), psi_lower=cp.psi_lower)
    if m == "prox_sgd":
        const["theta"] = cfg["theta"] or default_theta(cp)
        const["alpha_nat"] = default_alpha(cp)
    if m == "smm":
        const.update(theta=cfg["theta"] or smm_theta(model, phi), eta=model.eta(phi),
                     tau_model=float(model.tau), L_model=float(model.lipschitz))
    try:
        x0 = _x0(cfg, obj.dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Components(m, obj, oracle, cp, model, sched, x0, const)


def run_replication(cfg: Mapping, rng: RngStream, comps: Components | None = None):
    """Run one replication of a normalized config on stream ``rng``."""
    c = comps or build(cfg)
    m, T, stride = c.method, cfg["T"], cfg.get("stride")
    if m == "sgd":
        return run_sgd(c.objective, c.oracle, c.schedule, c.x0, T, rng, stride=stride)
    if m == "rr":
        return run_rr(c.objective, c.schedule, c.x0, T, rng, stride=stride)
    if m == "prox_sgd":
        return run_prox_sgd(c.cp, c.oracle, c.schedule, c.x0, T, rng, theta=c.constants["theta"],
                            alpha_cap=cfg.get("alpha_cap"), stride=stride, measure=cfg["measure"])
    return run_smm(c.cp, c.model, c.schedule, c.x0, T, rng, theta=c.constants["theta"],
                   alpha_cap=cfg.get("alpha_cap"), stride=stride)


def _replicate(cfg, rng):
    return run_replication(cfg, rng)


def run_config(cfg: Mapping, jobs: int = 1) -> Ensemble:
    """Normalize, build and run all replications of a config."""
    cfg = normalize_config(cfg)
    comps = build(cfg)
    if jobs > 1:
        runner = partial(_replicate, cfg)
    else:
        runner = partial(run_replication, cfg, comps=comps)
    ens = run_ensemble(runner, cfg["reps"], cfg["seed"], jobs=jobs, constants=comps.constants,
                       config=cfg, config_hash=config_hash(cfg))
    if ens.traces:
        ens.constants["offset"] = ens.traces[0].offset
    return ens
