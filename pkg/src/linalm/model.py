"""Problem model shared by all solvers.

Defines the building blocks of a composite convex program

    minimize    g(x) + h(x)
    subject to  A x = b,  f_j(x) <= 0  (j = 1..m),

where ``g`` and every ``f_j`` are convex with Lipschitz gradients and ``h``
is a proper closed convex function accessed through its proximal mapping.
Also provides the optimality metrics (KKT residuals, objective/feasibility
gaps) used for stopping and reporting.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# smooth functions


class SmoothFunction:
    """Convex differentiable function with value and gradient oracles.

    Subclasses implement ``__call__`` and ``grad``; ``lipschitz`` is the
    Lipschitz constant of the gradient when known (None otherwise).
    ``tracker`` returns per-solve mutable state supporting cheap block
    updates; the default re-evaluates from scratch.
    """

    lipschitz = None

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def values(self, pts):
        """Evaluate on an (n, dim) array of points, one value per row."""
        return np.array([self(p) for p in np.asarray(pts, dtype=float)])

    def tracker(self, x):
        return FullTracker(self, x)


class OracleFunction(SmoothFunction):
    """Smooth function given by black-box value/gradient callables."""

    def __init__(self, value, grad, lipschitz=None):
        self._value = value
        self._grad = grad
        self.lipschitz = lipschitz

    def __call__(self, x):
        return float(self._value(np.asarray(x, dtype=float)))

    def grad(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)


class ZeroFunction(SmoothFunction):
    """g identically zero (gradient zero, Lipschitz constant zero)."""

    lipschitz = 0.0

    def __call__(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def values(self, pts):
        return np.zeros(len(pts))


class QuadraticFunction(SmoothFunction):
    """f(x) = 0.5 x'Qx + c'x + d with Q symmetric positive semidefinite."""

    def __init__(self, Q, c, d=0.0, lipschitz=None):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.d = float(d)
        self.lipschitz = lipschitz

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.Q @ x) + self.c @ x + self.d)

    def grad(self, x):
        return self.Q @ np.asarray(x, dtype=float) + self.c

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        return 0.5 * np.einsum("ni,ij,nj->n", pts, self.Q, pts) + pts @ self.c + self.d

    def tracker(self, x):
        return QuadraticTracker(self, x)


class LeastSquaresFunction(SmoothFunction):
    """f(x) = ||Ax - b||^2 - offset, the residual-power form used by BPDN."""

    def __init__(self, A, b, offset=0.0, lipschitz=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.offset = float(offset)
        # 2 ||A||^2 bounds the gradient's Lipschitz constant exactly
        self.lipschitz = lipschitz

    def __call__(self, x):
        r = self.A @ np.asarray(x, dtype=float) - self.b
        return float(r @ r - self.offset)

    def grad(self, x):
        return 2.0 * (self.A.T @ (self.A @ np.asarray(x, dtype=float) - self.b))

    def values(self, pts):
        res = np.asarray(pts, dtype=float) @ self.A.T - self.b
        return np.einsum("ni,ni->n", res, res) - self.offset

    def tracker(self, x):
        return LeastSquaresTracker(self, x)


class LinearFunction(SmoothFunction):
    """f(x) = a'x + shift (gradient constant, Lipschitz constant zero)."""

    lipschitz = 0.0

    def __init__(self, a, shift=0.0):
        self.a = np.asarray(a, dtype=float)
        self.shift = float(shift)

    def __call__(self, x):
        return float(self.a @ np.asarray(x, dtype=float) + self.shift)

    def grad(self, x):
        return self.a.copy()

    def values(self, pts):
        return np.asarray(pts, dtype=float) @ self.a + self.shift

    def tracker(self, x):
        return LinearTracker(self, x)


# ---------------------------------------------------------------------------
# incremental trackers
#
# A tracker is per-solve mutable state for one smooth function. It holds the
# current value and answers block gradients and value changes for a
# candidate change of one coordinate block, in time proportional to the
# block width where the function structure allows it.


class FullTracker:
    """Fallback tracker: every query re-evaluates the wrapped function."""

    def __init__(self, fn, x):
        self.fn = fn
        self.x = np.array(x, dtype=float)
        self.value = fn(self.x)

    def grad(self):
        return self.fn.grad(self.x)

    def block_grad(self, sl):
        return self.fn.grad(self.x)[sl]

    def delta_value(self, sl, dx):
        trial = self.x.copy()
        trial[sl] += dx
        return self.fn(trial) - self.value

    def commit(self, sl, dx):
        self.x[sl] += dx
        self.value = self.fn(self.x)

    def rebase(self, x):
        self.x = np.array(x, dtype=float)
        self.value = self.fn(self.x)


class QuadraticTracker:
    """Maintains q = Qx so block gradients and value deltas are O(p * width)."""

    def __init__(self, fn, x):
        self.fn = fn
        self.rebase(x)

    def rebase(self, x):
        x = np.asarray(x, dtype=float)
        self.qx = self.fn.Q @ x
        self.value = float(0.5 * x @ self.qx + self.fn.c @ x + self.fn.d)

    def grad(self):
        return self.qx + self.fn.c

    def block_grad(self, sl):
        return self.qx[sl] + self.fn.c[sl]

    def delta_value(self, sl, dx):
        return float(dx @ self.qx[sl] + 0.5 * dx @ (self.fn.Q[sl, sl] @ dx)
                     + self.fn.c[sl] @ dx)

    def commit(self, sl, dx):
        self.value += self.delta_value(sl, dx)
        self.qx += self.fn.Q[:, sl] @ dx


class LeastSquaresTracker:
    """Maintains the residual u = Ax - b for ||Ax - b||^2 - offset."""

    def __init__(self, fn, x):
        self.fn = fn
        self.rebase(x)

    def rebase(self, x):
        self.u = self.fn.A @ np.asarray(x, dtype=float) - self.fn.b
        self.value = float(self.u @ self.u - self.fn.offset)

    def grad(self):
        return 2.0 * (self.fn.A.T @ self.u)

    def block_grad(self, sl):
        return 2.0 * (self.fn.A[:, sl].T @ self.u)

    def delta_value(self, sl, dx):
        du = self.fn.A[:, sl] @ dx
        return float(2.0 * self.u @ du + du @ du)

    def commit(self, sl, dx):
        du = self.fn.A[:, sl] @ dx
        self.value += float(2.0 * self.u @ du + du @ du)
        self.u += du


class LinearTracker:
    """Tracker for a'x + shift; gradient is constant."""

    def __init__(self, fn, x):
        self.fn = fn
        self.rebase(x)

    def rebase(self, x):
        self.value = self.fn(x)

    def grad(self):
        return self.fn.a.copy()

    def block_grad(self, sl):
        return self.fn.a[sl]

    def delta_value(self, sl, dx):
        return float(self.fn.a[sl] @ dx)

    def commit(self, sl, dx):
        self.value += float(self.fn.a[sl] @ dx)


# ---------------------------------------------------------------------------
# prox functions


class ProxFunction:
    """Proper closed convex function accessed through value and prox oracles.

    ``prox(v, weight)`` returns argmin_u  value(u) + ||u - v||^2 / (2 weight);
    as weight grows the output tends to the minimizer set (for indicators,
    the projection onto the domain). ``domain`` is a (lower, upper) pair when
    the effective domain is a box, else None. ``block(sl)`` returns the
    restriction to one coordinate block for separable functions, else None.
    """

    domain = None
    is_indicator = False

    def value(self, x):
        raise NotImplementedError

    def prox(self, v, weight):
        raise NotImplementedError

    def block(self, sl):
        return None

    def values(self, pts):
        return np.array([self.value(p) for p in np.asarray(pts, dtype=float)])


class ZeroProx(ProxFunction):
    """h identically zero; prox is the identity."""

    is_indicator = True  # indicator of the whole space

    def value(self, x):
        return 0.0

    def prox(self, v, weight):
        return np.array(v, dtype=float)

    def block(self, sl):
        return self

    def values(self, pts):
        return np.zeros(len(pts))


class L1Norm(ProxFunction):
    """h(x) = scale * ||x||_1; prox is soft thresholding."""

    def __init__(self, scale=1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)

    def value(self, x):
        return self.scale * float(np.sum(np.abs(x)))

    def prox(self, v, weight):
        return prox_l1(v, weight * self.scale)

    def block(self, sl):
        return self

    def values(self, pts):
        return self.scale * np.sum(np.abs(np.asarray(pts, dtype=float)), axis=1)


class BoxIndicator(ProxFunction):
    """Indicator of the box [lower, upper]; prox is the projection (clamp)."""

    is_indicator = True

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("box requires lower <= upper componentwise")
        self.domain = (self.lower, self.upper)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if np.all(x >= self.lower) and np.all(x <= self.upper):
            return 0.0
        return np.inf

    def prox(self, v, weight):
        return project_box(v, self.lower, self.upper)

    def block(self, sl):
        return BoxIndicator(self.lower[sl], self.upper[sl])

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        ok = np.all(pts >= self.lower, axis=1) & np.all(pts <= self.upper, axis=1)
        return np.where(ok, 0.0, np.inf)


# ---------------------------------------------------------------------------
# constraints


class InequalityConstraint:
    """One smooth constraint fn(x) <= 0.

    ``grad_bound`` is an upper bound on ||grad fn|| over the domain when
    available; together with ``fn.lipschitz`` it enables analytic step
    sizes. Either may be None, in which case solvers fall back to
    backtracking.
    """

    def __init__(self, fn, grad_bound=None):
        self.fn = fn
        self.grad_bound = None if grad_bound is None else float(grad_bound)

    @property
    def lipschitz(self):
        return self.fn.lipschitz

    def __call__(self, x):
        return self.fn(x)

    def grad(self, x):
        return self.fn.grad(x)

    def values(self, pts):
        return self.fn.values(pts)

    def tracker(self, x):
        return self.fn.tracker(x)


class AffineConstraint:
    """Equality constraints A x = b with adjoint and column-block access."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")
        self._op_norm_sq = None

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def rows(self):
        return self.A.shape[0]

    @property
    def is_empty(self):
        return self.A.shape[0] == 0

    def apply(self, x):
        return self.A @ x

    def adjoint(self, y):
        return self.A.T @ y

    def residual(self, x):
        return self.A @ x - self.b

    def block(self, sl):
        """Column block A_i for a contiguous coordinate slice."""
        return self.A[:, sl]

    def op_norm_sq(self, tol=1e-8):
        """Cached ||A||^2 (largest eigenvalue of A'A)."""
        if self._op_norm_sq is None:
            self._op_norm_sq = 0.0 if self.is_empty else operator_norm_sq(self.A, tol)
        return self._op_norm_sq


def even_blocks(dim, n):
    """Partition [0, dim) into n contiguous slices with widths differing by <= 1."""
    if not 1 <= n <= dim:
        raise ValueError(f"need 1 <= n <= dim, got n={n}, dim={dim}")
    bounds = np.linspace(0, dim, n + 1).round().astype(int)
    return tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))


def _check_blocks(blocks, dim):
    pos = 0
    for sl in blocks:
        if sl.start != pos or sl.stop <= sl.start or sl.step not in (None, 1):
            raise ValueError("blocks must be contiguous, disjoint, and ordered")
        pos = sl.stop
    if pos != dim:
        raise ValueError("blocks must cover all coordinates")


class ProblemInstance:
    """Immutable composite convex program.

    Parameters
    ----------
    g : SmoothFunction
    h : ProxFunction
    dim : int
        Number of primal variables.
    affine : AffineConstraint, optional
        Equality part; None means no equality constraints.
    constraints : sequence of InequalityConstraint, optional
    blocks : sequence of slice, optional
        Contiguous disjoint coordinate blocks covering [0, dim).
    f0_star : float, optional
        Known optimal value, used for gap reporting.
    meta : dict, optional
        Generator metadata (spec, seed, ground truth, ...).
    """

    def __init__(self, g, h, dim, affine=None, constraints=(), blocks=None,
                 f0_star=None, meta=None):
        self.g = g
        self.h = h
        self.dim = int(dim)
        self.affine = AffineConstraint.empty(dim) if affine is None else affine
        self.constraints = tuple(constraints)
        if blocks is not None:
            blocks = tuple(blocks)
            _check_blocks(blocks, self.dim)
        self.blocks = blocks
        self.f0_star = None if f0_star is None else float(f0_star)
        self.meta = dict(meta or {})

    @property
    def m(self):
        return len(self.constraints)

    @property
    def n_blocks(self):
        return None if self.blocks is None else len(self.blocks)

    def f0(self, x):
        """Composite objective g(x) + h(x); +inf outside dom(h)."""
        return self.g(x) + self.h.value(x)

    def constraint_values(self, x):
        return np.array([con(x) for con in self.constraints])

    def constraint_grads(self, x):
        if not self.constraints:
            return np.zeros((0, self.dim))
        return np.stack([con.grad(x) for con in self.constraints])

    def with_blocks(self, n):
        """Copy of this instance carrying an even n-block partition."""
        return ProblemInstance(self.g, self.h, self.dim, self.affine,
                               self.constraints, even_blocks(self.dim, n),
                               self.f0_star, self.meta)

    def with_f0_star(self, f0_star):
        return ProblemInstance(self.g, self.h, self.dim, self.affine,
                               self.constraints, self.blocks, f0_star, self.meta)


@dataclass
class PrimalDualPoint:
    """Primal-dual triple with cached equality residual and constraint values."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    r: np.ndarray
    fvals: np.ndarray

    @classmethod
    def at(cls, prob, x, y=None, z=None):
        x = np.array(x, dtype=float).ravel()
        if x.shape[0] != prob.dim:
            raise ValueError(f"x has dim {x.shape[0]}, expected {prob.dim}")
        y = np.zeros(prob.affine.rows) if y is None else np.array(y, dtype=float).ravel()
        z = np.zeros(prob.m) if z is None else np.array(z, dtype=float).ravel()
        if y.shape[0] != prob.affine.rows:
            raise ValueError("y length does not match equality constraint count")
        if z.shape[0] != prob.m:
            raise ValueError("z length does not match inequality constraint count")
        if np.any(z < 0):
            raise ValueError("multipliers z must be nonnegative")
        return cls(x, y, z, prob.affine.residual(x), prob.constraint_values(x))

    def refresh(self, prob):
        """Recompute the cached residual and constraint values from x."""
        self.r = prob.affine.residual(self.x)
        self.fvals = prob.constraint_values(self.x)


# ---------------------------------------------------------------------------
# elementary operations


def prox_l1(v, tau):
    """Soft thresholding: componentwise sign(v) * max(|v| - tau, 0)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("prox_l1 requires finite input")
    if tau <= 0:
        raise ValueError("threshold must be positive")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def project_box(v, lower, upper):
    """Componentwise clamp of v into [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("box requires lower <= upper componentwise")
    return np.clip(np.asarray(v, dtype=float), lower, upper)


EpsOptimality = namedtuple("EpsOptimality", "obj_gap feasibility ok")

KktResidual = namedtuple("KktResidual", "stationarity feasibility complementarity")


def lagrangian_gap(x_new, at, prob):
    """Lagrangian-gap functional of a candidate point against a primal-dual pair.

    Returns f0(x_new) - f0(at.x) + y'(A x_new - b) + sum_j z_j f_j(x_new).
    Nonnegative for every x_new whenever ``at`` is a KKT point.
    """
    x_new = np.asarray(x_new, dtype=float)
    gap = prob.f0(x_new) - prob.f0(at.x)
    if not prob.affine.is_empty:
        gap += float(at.y @ prob.affine.residual(x_new))
    if prob.constraints:
        gap += float(at.z @ prob.constraint_values(x_new))
    return gap


def feasibility_residual(x, prob, r=None, fvals=None):
    """||Ax - b|| plus the summed positive parts of the inequality values."""
    r = prob.affine.residual(x) if r is None else r
    fvals = prob.constraint_values(x) if fvals is None else fvals
    return float(np.linalg.norm(r) + np.sum(np.maximum(fvals, 0.0)))


def eps_optimality(x_new, f0_star, eps, prob):
    """Objective gap and feasibility residual, and whether both are <= eps."""
    f0_star = float(f0_star)
    if not np.isfinite(f0_star):
        raise ValueError("f0_star must be finite")
    obj_gap = abs(prob.f0(x_new) - f0_star)
    feas = feasibility_residual(x_new, prob)
    return EpsOptimality(obj_gap, feas, bool(obj_gap <= eps and feas <= eps))


def kkt_residual(w, prob):
    """Stationarity, primal feasibility, and complementarity residuals.

    Stationarity is measured through the unit-weight prox-gradient map
    ||x - prox_h(x - (grad g + A'y + sum_j z_j grad f_j))||, so all three
    components vanish exactly at a KKT point (for x in dom(h)).
    """
    if np.any(w.z < 0):
        raise ValueError("multipliers z must be nonnegative")
    total = prob.g.grad(w.x)
    if not prob.affine.is_empty:
        total = total + prob.affine.adjoint(w.y)
    for zj, con in zip(w.z, prob.constraints):
        if zj != 0.0:
            total = total + zj * con.grad(w.x)
    stationarity = float(np.linalg.norm(w.x - prob.h.prox(w.x - total, 1.0)))
    feas = feasibility_residual(w.x, prob, r=w.r, fvals=w.fvals)
    comp = float(np.sum(np.abs(w.z * w.fvals))) if prob.m else 0.0
    return KktResidual(stationarity, feas, comp)


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the best estimate."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def operator_norm_sq(A, tol=1e-8, max_iter=None):
    """Largest eigenvalue of A'A by power iteration with Rayleigh quotients.

    Stops when the relative change of the estimate is at most ``tol``;
    raises PowerIterationError (carrying the best estimate) after
    ``max_iter`` iterations (default 10 * columns, floored at 1000 so that
    small matrices with nearly degenerate top eigenvalues still converge).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0 or not A.any():
        return 0.0
    dim = A.shape[1]
    if max_iter is None:
        max_iter = max(10 * dim, 1000)
    v = np.random.default_rng(0).standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0  # v landed in the nullspace of a rank-deficient A
        v = w / norm_w
        if abs(new - estimate) <= tol * max(abs(new), 1e-300):
            return new
        estimate = new
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations", estimate)
