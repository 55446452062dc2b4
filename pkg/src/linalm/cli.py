"""Command-line benchmark runner.

    linalm solve --problem bpdn --method lalm --epochs 1000 --out run.csv

Flags override values from an optional JSON config file (flat keys named
like the flags). Exit status is nonzero when instance construction or the
solver fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, run
from .lalm import SolverConfig

_SOLVER_KEYS = ("beta", "rho_y", "rho_z", "delta", "step_mode",
                "backtrack_factor", "eta0", "tol", "record_every")
_RUN_KEYS = ("problem", "method", "seed", "blocks", "epochs", "out",
             "ergodic", "reference", "problem_opts")


def build_parser():
    parser = argparse.ArgumentParser(prog="linalm")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run one method on one instance")
    p.add_argument("--problem", help="bpdn | qcqp | minimax | tiny:<kind> | FILE.json")
    p.add_argument("--method", choices=("lalm", "blalm", "pdyn"))
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--rho-y", dest="rho_y", type=float)
    p.add_argument("--rho-z", dest="rho_z", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--blocks", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--eta0", type=float)
    p.add_argument("--config", help="JSON file with flag-named keys")
    p.add_argument("--out", help="trace CSV path")
    return parser


def _merged_options(args):
    opts = {}
    if args.config:
        with open(args.config) as fh:
            opts.update(json.load(fh))
    for key in ("problem", "method", "seed", "beta", "rho_y", "rho_z", "delta",
                "blocks", "epochs", "tol", "eta0", "out"):
        val = getattr(args, key)
        if val is not None:
            opts[key] = val
    return opts


def config_from_options(opts):
    unknown = set(opts) - set(_SOLVER_KEYS) - set(_RUN_KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    if "problem" not in opts or "method" not in opts:
        raise ValueError("--problem and --method are required (flag or config file)")
    solver = SolverConfig(**{k: opts[k] for k in _SOLVER_KEYS if k in opts})
    return ExperimentConfig(
        method=opts["method"], problem=opts["problem"], solver=solver,
        epochs=int(opts.get("epochs", 100_000)), seed=int(opts.get("seed", 0)),
        blocks=opts.get("blocks"), ergodic=bool(opts.get("ergodic", True)),
        out=opts.get("out"), reference=opts.get("reference", "auto"),
        problem_opts=opts.get("problem_opts", {}))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_options(_merged_options(args))
        result = run(config)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rec = result.result.trace[-1]
    print(f"wrote {result.path} ({result.result.epochs} epochs, "
          f"final feasibility {rec.feas:.3e}, KKT stationarity {rec.kkt_stat:.3e})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
