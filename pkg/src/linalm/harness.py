"""Experiment driver: instance construction, reference resolution, method
dispatch, rate fitting, and CSV trace emission."""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import blalm, instances, lalm, pdyn
from .lalm import SolverConfig
from .model import kkt_residual
from .trace import write_trace_csv

CACHE_ENV_VAR = "LINALM_CACHE_DIR"
DEFAULT_CACHE_DIR = ".linalm_cache"

METHODS = ("lalm", "blalm", "pdyn")
PROBLEMS = ("bpdn", "qcqp", "minimax")


@dataclass
class ExperimentConfig:
    """One benchmark run: a method, an instance, and solver parameters.

    ``problem`` is one of 'bpdn', 'qcqp', 'minimax', 'tiny:<kind>', or a
    path to a serialized instance JSON file. ``problem_opts`` carries
    instance-size overrides (rows, cols, sparsity, noise, p, m, ...).
    ``reference`` is 'auto' (hand value for tiny instances, brute force up
    to dimension 3, otherwise a cached long solver run) or 'none'.
    """

    method: str
    problem: str
    solver: SolverConfig = dataclass_field(default_factory=SolverConfig)
    epochs: int = 100_000
    seed: int = 0
    blocks: Optional[int] = None
    ergodic: bool = True
    out: Optional[str] = None
    reference: str = "auto"
    problem_opts: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.epochs < 1:
            raise ValueError("epochs budget must be >= 1")
        if self.reference not in ("auto", "none"):
            raise ValueError("reference must be 'auto' or 'none'")


@dataclass
class RunResult:
    path: Path
    result: object
    reference: Optional[instances.ReferenceSolution]


def build_problem(config):
    """Construct the ProblemInstance named by the config."""
    name, opts, seed = config.problem, dict(config.problem_opts), config.seed
    if name.startswith("tiny:"):
        prob, _ = instances.tiny_reference(name.split(":", 1)[1])
    elif name == "bpdn":
        prob = instances.gen_bpdn(instances.BpdnSpec(seed=seed, **opts))
    elif name == "qcqp":
        prob = instances.gen_qcqp(instances.QcqpSpec(seed=seed, **opts))
    elif name == "minimax":
        _, prob = instances.random_minimax_1d(seed=seed, **opts)
    elif name.endswith(".json"):
        prob = instances.load_instance(name)
    else:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}, "
                         "'tiny:<kind>', or an instance JSON path")
    if config.blocks is not None:
        prob = prob.with_blocks(config.blocks)
    return prob


def cache_dir():
    return Path(os.environ.get(CACHE_ENV_VAR, DEFAULT_CACHE_DIR))


def resolve_reference(prob, config, clock=None):
    """Reference optimal value per the config policy; None when disabled."""
    if config.reference == "none":
        return None
    if prob.meta.get("kind") == "tiny" and prob.f0_star is not None:
        _, ref = instances.tiny_reference(prob.meta["tiny"])
        return ref
    if prob.dim <= 3:
        return instances.brute_force_reference(prob)
    return long_run_reference(prob, budget=max(1_000_000, 10 * config.epochs),
                              cache=cache_dir(), clock=clock)


def long_run_reference(prob, budget, target=1e-10, eta0=None, cache=None,
                       clock=None):
    """High-accuracy reference from a long backtracking solver run.

    Runs the full-vector solver until every KKT residual component is at
    most ``target`` or the iteration budget (required to be at least 10^6)
    is exhausted, and caches the result on disk keyed by the instance
    content hash. An unmet target produces a warning and the best point
    found, with its residual recorded.
    """
    if budget < 1_000_000:
        raise ValueError("long-run reference needs a budget of at least 1e6 "
                         "iterations")
    key = None
    if cache is not None:
        key = instances.instance_digest(prob)
        path = Path(cache) / f"{key}.json"
        if path.exists():
            data = json.loads(path.read_text())
            return instances.ReferenceSolution(
                np.array(data["x"]), np.array(data["y"]), np.array(data["z"]),
                data["f0"], data["provenance"], data.get("residual"))

    cfg = SolverConfig(beta=1.0, step_mode="backtracking", eta0=eta0,
                       max_epochs=budget, tol=target, record_every=10)
    res = lalm.solve(prob.with_f0_star(None), cfg, x0=prob.meta.get("x0"),
                     clock=clock, method_label="reference")
    kkt = kkt_residual(res.w, prob)
    residual = max(kkt)
    if residual > target:
        warnings.warn(f"reference run stopped at KKT residual {residual:.3e} "
                      f"(target {target:.1e}); using best point found")
    ref = instances.ReferenceSolution(res.w.x, res.w.y, res.w.z,
                                      float(prob.f0(res.w.x)), "long-run",
                                      residual=residual)
    if key is not None:
        path = Path(cache) / f"{key}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({
            "x": ref.x.tolist(), "y": ref.y.tolist(), "z": ref.z.tolist(),
            "f0": ref.f0, "provenance": ref.provenance,
            "residual": ref.residual}))
    return ref


def run(config, clock=None):
    """Build the instance, resolve its reference, run the method, write CSV.

    Returns a RunResult carrying the CSV path, the SolveResult, and the
    resolved reference (if any). ``clock`` overrides the wall-clock source
    for the trace, making repeated runs byte-identical.
    """
    prob = build_problem(config)
    reference = resolve_reference(prob, config, clock=clock)
    prob = prob.with_f0_star(None if reference is None else reference.f0)

    solver_cfg = SolverConfig(
        beta=config.solver.beta, rho_y=config.solver.rho_y,
        rho_z=config.solver.rho_z, delta=config.solver.delta,
        step_mode=config.solver.step_mode,
        backtrack_factor=config.solver.backtrack_factor,
        eta0=config.solver.eta0, max_epochs=config.epochs,
        tol=config.solver.tol, record_every=config.solver.record_every)

    x0 = prob.meta.get("x0")
    if config.method == "lalm":
        result = lalm.solve(prob, solver_cfg, x0=x0, clock=clock)
    elif config.method == "blalm":
        result = blalm.solve(prob, solver_cfg, x0=x0, seed=config.seed,
                             clock=clock)
    else:
        result = pdyn.solve(prob, solver_cfg, x0=x0, clock=clock)

    if not config.ergodic:
        for rec in result.trace:
            rec.erg_obj_gap = rec.erg_feas = None
            rec.erg_obj_gap_scaled = rec.erg_feas_scaled = None

    out = config.out or f"{config.method}_{_slug(config.problem)}.csv"
    path = write_trace_csv(result.trace, out)
    return RunResult(Path(path), result, reference)


def _slug(name):
    return name.replace(":", "_").replace("/", "_").replace(".json", "")


def fit_loglog_slope(epochs, values):
    """Least-squares slope of log(value) against log(epoch)."""
    epochs = np.asarray(epochs, dtype=float)
    values = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(epochs), np.log(values), 1)[0])


def rate_fit(trace, column, window):
    """Decay-rate fit for one trace column over an epoch window.

    Keeps records with window[0] <= epoch <= window[1] and a finite positive
    value in ``column``; a slope near -1 on the log-log scale corresponds to
    O(1/k) decay. Requires at least 10 usable samples.
    """
    lo, hi = window
    epochs, values = [], []
    for rec in trace:
        val = getattr(rec, column)
        if rec.epoch < lo or rec.epoch > hi or val is None:
            continue
        if val > 0 and np.isfinite(val):
            epochs.append(rec.epoch)
            values.append(val)
    if len(values) < 10:
        raise ValueError(f"need at least 10 positive samples in the window, "
                         f"found {len(values)}")
    return fit_loglog_slope(epochs, values)
