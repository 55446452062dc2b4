"""Linearized augmented Lagrangian solver.

Each iteration takes one proximal gradient step on the augmented Lagrangian
in the primal variable, then ascends the equality multipliers along the new
residual and the inequality multipliers along the floored constraint
values. The primal step size 1/eta comes either from analytic curvature
bounds or from backtracking on the smooth-part descent inequality; eta
never decreases across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import auglag
from .model import PrimalDualPoint
from .trace import MetricsRecorder, record_epochs, should_stop

# Relative slack admitted when testing the descent inequality, so that a
# step size exactly at the curvature bound is not rejected by roundoff.
_DESCENT_RTOL = 1e-12


class SolverError(RuntimeError):
    """Solver aborted; carries the trace recorded up to the failure."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []


@dataclass
class SolverConfig:
    """Parameters shared by the full-vector and block solvers.

    rho_y and rho_z default to beta for the full-vector solver and to
    beta/n_blocks for the block solver; both must lie in (0, beta] so the
    inequality multipliers stay nonnegative. In backtracking mode the trial
    step starts from eta0 (default max(1, L_g) when L_g is known, else 1)
    and is multiplied by backtrack_factor until the descent inequality
    holds. tol <= 0 disables early stopping.
    """

    beta: float = 1.0
    rho_y: Optional[float] = None
    rho_z: Optional[float] = None
    delta: float = 0.0
    step_mode: str = "backtracking"
    backtrack_factor: float = 1.5
    eta0: Optional[float] = None
    max_epochs: int = 1000
    tol: float = 0.0
    record_every: Optional[int] = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.step_mode not in ("analytic", "backtracking"):
            raise ValueError("step_mode must be 'analytic' or 'backtracking'")
        if self.backtrack_factor <= 1:
            raise ValueError("backtrack_factor must exceed 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def resolve_rho(self, n_blocks=1):
        """(rho_y, rho_z) with block-aware defaults, validated against beta."""
        rho_y = self.beta / n_blocks if self.rho_y is None else self.rho_y
        rho_z = self.beta / n_blocks if self.rho_z is None else self.rho_z
        for name, rho in (("rho_y", rho_y), ("rho_z", rho_z)):
            if not 0 < rho <= self.beta:
                raise ValueError(f"{name}={rho} must lie in (0, beta]")
        return rho_y, rho_z

    def eta_seed(self, prob):
        """Initial backtracking step-size guess."""
        if self.eta0 is not None:
            if self.eta0 <= 0:
                raise ValueError("eta0 must be positive")
            return self.eta0
        if prob.g.lipschitz is not None:
            return max(1.0, prob.g.lipschitz)
        return 1.0


class ErgodicAccumulator:
    """Running weighted sum of primal iterates; never stores the history."""

    def __init__(self, dim, mode="weighted"):
        if mode not in ("weighted", "uniform"):
            raise ValueError("mode must be 'weighted' or 'uniform'")
        self.mode = mode
        self._sum = np.zeros(dim)
        self.weight = 0.0
        self.count = 0

    def add(self, x, weight=1.0):
        if weight <= 0:
            raise ValueError("accumulation weight must be positive")
        self._sum += weight * x
        self.weight += weight
        self.count += 1

    def average(self):
        """Weighted average sum / total weight."""
        if self.count == 0:
            raise ValueError("no iterates accumulated")
        return self._sum / self.weight

    def scaled(self, normalizer):
        """Running sum divided by an explicit normalizer."""
        if self.count == 0:
            raise ValueError("no iterates accumulated")
        return self._sum / normalizer


@dataclass
class SolveResult:
    """Final iterates, ergodic point, and the recorded trace."""

    w: PrimalDualPoint
    ergodic_x: Optional[np.ndarray]
    trace: list
    epochs: int
    stopped_early: bool
    eta: float
    # Block solver only: running sum divided by 1 + k/n instead of by the
    # iterate count (the two normalizations differ by a factor approaching n).
    ergodic_x_scaled: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)


def multiplier_step_y(y, r_new, rho_y):
    """Equality multiplier ascent y + rho_y * (A x_new - b)."""
    return y + rho_y * r_new


def multiplier_step_z(z, fvals_new, rho_z, beta):
    """Floored inequality multiplier ascent.

    Componentwise z_j + rho_z * max(-z_j / beta, f_j(x_new)); keeps z >= 0
    whenever rho_z <= beta.
    """
    if len(z) == 0:
        return z
    return z + rho_z * np.maximum(-z / beta, fvals_new)


def analytic_eta(eta_prev, x, z, beta, delta, prob, fvals=None):
    """Monotone analytic step bound max(eta_prev, L_F(x, z) + delta)."""
    return max(eta_prev, auglag.smooth_lipschitz(x, z, beta, prob, fvals=fvals) + delta)


def primal_candidate(w, grad, eta, prob):
    """Prox-gradient step: prox of h with weight 1/eta at x - grad/eta."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return prob.h.prox(w.x - grad / eta, 1.0 / eta)


def descent_holds(value_new, value_base, inner, eta, step_sq):
    """Smooth-part descent test value_new <= base + inner + (eta/2)||dx||^2,
    with a tiny relative slack for roundoff."""
    bound = value_base + inner + 0.5 * eta * step_sq
    slack = _DESCENT_RTOL * max(1.0, abs(value_base), abs(bound))
    return value_new <= bound + slack


def backtrack_primal(w, grad, eta_start, config, prob, max_trials=201):
    """Grow eta geometrically until the prox-gradient candidate satisfies the
    descent inequality on the smooth part of the augmented Lagrangian.

    Returns (eta, x_new, r_new, fvals_new, smooth_new, trials) where trials
    counts the step-size multiplications performed; more than 200
    multiplications raise SolverError.
    """
    beta = config.beta
    base = auglag.smooth_value(w, beta, prob)
    eta = eta_start
    for trial in range(max_trials):
        x_new = primal_candidate(w, grad, eta, prob)
        dx = x_new - w.x
        cand = PrimalDualPoint(x_new, w.y, w.z, prob.affine.residual(x_new),
                               prob.constraint_values(x_new))
        val = auglag.smooth_value(cand, beta, prob)
        if np.isfinite(val) and descent_holds(val, base, float(grad @ dx), eta,
                                              float(dx @ dx)):
            return eta, x_new, cand.r, cand.fvals, val, trial
        eta *= config.backtrack_factor
    raise SolverError(f"backtracking failed after {max_trials - 1} step-size "
                      "increases; oracle values may be non-finite")


def solve(prob, config, x0=None, y0=None, z0=None, callback=None, clock=None,
          method_label="lalm"):
    """Run the full-vector solver.

    Parameters
    ----------
    prob : ProblemInstance
    config : SolverConfig
        One epoch equals one iteration here.
    x0, y0, z0 : arrays, optional
        Starting point (defaults to zeros; z0 must be nonnegative).
    callback : callable, optional
        Invoked as callback(iteration, w) after every iteration.
    clock : callable, optional
        Wall-clock source for trace timestamps (testing hook).

    Returns
    -------
    SolveResult with the final triple, the 1/eta-weighted ergodic average,
    and the recorded trace.
    """
    w = PrimalDualPoint.at(prob, np.zeros(prob.dim) if x0 is None else x0, y0, z0)
    rho_y, rho_z = config.resolve_rho(n_blocks=1)
    beta, delta = config.beta, config.delta
    analytic = config.step_mode == "analytic"
    eta = 0.0 if analytic else config.eta_seed(prob)

    acc = ErgodicAccumulator(prob.dim, mode="weighted")
    recorder = MetricsRecorder(prob, method_label, f0_star=prob.f0_star, clock=clock)
    schedule = record_epochs(config.max_epochs, config.record_every)
    records = [recorder.snapshot(0, w)]
    stopped = False
    epoch = 0

    for k in range(config.max_epochs):
        grad = auglag.smooth_grad(w, beta, prob)
        if analytic:
            eta = analytic_eta(eta, w.x, w.z, beta, delta, prob, fvals=w.fvals)
            x_new = primal_candidate(w, grad, eta, prob)
            r_new = prob.affine.residual(x_new)
            fvals_new = prob.constraint_values(x_new)
        else:
            eta, x_new, r_new, fvals_new, val, _ = backtrack_primal(
                w, grad, eta, config, prob)
        if not (np.all(np.isfinite(x_new)) and np.isfinite(prob.g(x_new))):
            raise SolverError(f"non-finite iterate at iteration {k}", records)

        y_new = multiplier_step_y(w.y, r_new, rho_y)
        z_new = multiplier_step_z(w.z, fvals_new, rho_z, beta)
        w = PrimalDualPoint(x_new, y_new, z_new, r_new, fvals_new)
        acc.add(x_new, 1.0 / eta)
        epoch = k + 1
        if callback is not None:
            callback(epoch, w)
        if epoch in schedule:
            rec = recorder.snapshot(epoch, w, eta_max=eta, erg_x=acc.average())
            records.append(rec)
            if config.tol > 0 and should_stop(rec, config.tol,
                                              prob.f0_star is not None):
                stopped = True
                break

    return SolveResult(w=w, ergodic_x=acc.average(), trace=records,
                       epochs=epoch, stopped_early=stopped, eta=eta)
