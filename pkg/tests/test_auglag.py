import numpy as np
import pytest

from linalm import auglag
from linalm.auglag import (auglag_value, constraint_penalty, penalty_lipschitz,
                           scalar_penalty, scalar_penalty_deriv, smooth_grad,
                           smooth_grad_block, smooth_lipschitz, smooth_value)
from linalm.instances import BpdnSpec, QcqpSpec, gen_bpdn, gen_qcqp
from linalm.lalm import SolverConfig, backtrack_primal, primal_candidate
from linalm.model import (BoxIndicator, InequalityConstraint, PrimalDualPoint,
                          ProblemInstance, QuadraticFunction, ZeroProx)

from conftest import central_diff_grad


def random_state(prob, rng, z_scale=1.0):
    if prob.h.domain is not None:
        x = rng.uniform(*prob.h.domain)
    else:
        x = rng.normal(size=prob.dim)
    y = rng.normal(size=prob.affine.rows)
    z = rng.uniform(0, z_scale, size=prob.m)
    return PrimalDualPoint.at(prob, x, y, z)


# ---------------------------------------------------------------------------
# scalar penalty


def test_scalar_penalty_branch_values():
    assert scalar_penalty(0.0, 0.0, 1.0) == 0.0
    assert scalar_penalty(1.0, 1.0, 2.0) == pytest.approx(2.0)
    assert scalar_penalty(-2.0, 1.0, 1.0) == pytest.approx(-0.5)
    # both branches agree on the switching surface
    assert scalar_penalty(-1.0, 1.0, 1.0) == pytest.approx(-0.5)


def test_scalar_penalty_continuity_at_switch_exact():
    for beta, v in ((1.0, 1.0), (2.0, 3.0), (0.5, -0.7)):
        u = -v / beta
        quad_branch = u * v + 0.5 * beta * u * u
        cap_branch = -v * v / (2 * beta)
        assert abs(quad_branch - cap_branch) <= 1e-12
        assert abs(scalar_penalty_deriv(u, v, beta)) <= 1e-12


def test_scalar_penalty_deriv_values():
    assert scalar_penalty_deriv(0.0, 0.0, 1.0) == 0.0
    assert scalar_penalty_deriv(1.0, 1.0, 1.0) == 2.0
    assert scalar_penalty_deriv(-2.0, 1.0, 1.0) == 0.0


def test_scalar_penalty_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        scalar_penalty(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        scalar_penalty_deriv(1.0, 1.0, -1.0)


def test_scalar_penalty_deriv_is_fd_of_penalty(rng):
    for _ in range(50):
        u, v, beta = rng.normal(), rng.normal(), rng.uniform(0.2, 3)
        num = central_diff_grad(lambda t: scalar_penalty(t[0], v, beta),
                                np.array([u]))[0]
        assert num == pytest.approx(scalar_penalty_deriv(u, v, beta), abs=1e-4)


def test_scalar_penalty_deriv_lipschitz_in_u(rng):
    # |d_u penalty(u1) - d_u penalty(u2)| <= beta |u1 - u2|
    for _ in range(100):
        u1, u2, v, beta = rng.normal(), rng.normal(), rng.normal(), rng.uniform(0.2, 3)
        d = abs(scalar_penalty_deriv(u1, v, beta) - scalar_penalty_deriv(u2, v, beta))
        assert d <= beta * abs(u1 - u2) + 1e-12


# ---------------------------------------------------------------------------
# summed penalty and augmented Lagrangian values


def scalar_prob():
    # min 0.5 x^2 with one constraint f(x) = x (affine)
    from linalm.model import LinearFunction
    return ProblemInstance(
        QuadraticFunction([[1.0]], [0.0], lipschitz=1.0), ZeroProx(), dim=1,
        constraints=[InequalityConstraint(LinearFunction([1.0]), grad_bound=1.0)])


def test_constraint_penalty_cases(rng):
    prob = scalar_prob()
    assert constraint_penalty([-1.0], [0.0], 1.0, prob) == 0.0
    # no constraints: empty sum
    plain = ProblemInstance(QuadraticFunction([[1.0]], [0.0]), ZeroProx(), dim=1)
    assert constraint_penalty([0.5], np.zeros(0), 1.0, plain) == 0.0
    # two-constraint branch-wise evaluation
    vals = scalar_penalty(np.array([1.0, -2.0]), np.array([1.0, 1.0]), 1.0)
    assert vals.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        constraint_penalty([0.0], [1.0, 2.0], 1.0, prob)


def test_constraint_penalty_nonpositive_when_feasible(rng):
    # feasible x and z >= 0 force a nonpositive penalty sum
    prob = gen_qcqp(QcqpSpec(m=4, p=6, seed=2))
    lo, hi = prob.h.domain
    count = 0
    while count < 100:
        x = rng.uniform(lo / 4, hi / 4)
        if np.any(prob.constraint_values(x) > 0):
            continue
        count += 1
        z = rng.uniform(0, 3, size=prob.m)
        assert constraint_penalty(x, z, 1.0, prob) <= 1e-12


def test_auglag_value_hand_cases():
    prob = scalar_prob()
    # x=1, z=1, beta=1: 0.5 + penalty(1, 1) = 0.5 + 1.5
    w = PrimalDualPoint.at(prob, [1.0], z=[1.0])
    assert auglag_value(w, 1.0, prob) == pytest.approx(2.0)
    # no constraints at all: g + h
    plain = ProblemInstance(QuadraticFunction([[1.0]], [0.0]), ZeroProx(), dim=1)
    w = PrimalDualPoint.at(plain, [2.0])
    assert auglag_value(w, 1.0, plain) == pytest.approx(2.0)


def test_auglag_value_feasible_equals_objective():
    # feasible x, z = 0, Ax = b: multiplier and penalty terms all vanish
    from linalm.model import AffineConstraint
    prob = ProblemInstance(
        QuadraticFunction(np.eye(2), np.zeros(2)), ZeroProx(), dim=2,
        affine=AffineConstraint([[1.0, 1.0]], [1.0]))
    w = PrimalDualPoint.at(prob, [0.5, 0.5], y=[3.0])
    assert auglag_value(w, 2.0, prob) == pytest.approx(prob.f0([0.5, 0.5]))


def test_auglag_value_infinite_outside_domain():
    prob = ProblemInstance(QuadraticFunction([[1.0]], [0.0]),
                           BoxIndicator([-1.0], [1.0]), dim=1)
    w = PrimalDualPoint.at(prob, [2.0])
    assert auglag_value(w, 1.0, prob) == np.inf


# ---------------------------------------------------------------------------
# smooth gradient


def test_smooth_grad_hand_case():
    prob = scalar_prob()
    w = PrimalDualPoint.at(prob, [2.0], z=[1.0])
    np.testing.assert_allclose(smooth_grad(w, 1.0, prob), [5.0])


def test_smooth_grad_inactive_penalty(rng):
    prob = gen_qcqp(QcqpSpec(m=2, p=5, seed=3))
    x = np.zeros(5)  # strictly feasible, z = 0: only grad g remains
    w = PrimalDualPoint.at(prob, x)
    np.testing.assert_allclose(smooth_grad(w, 1.0, prob), prob.g.grad(x))


@pytest.mark.parametrize("maker", [
    lambda: gen_bpdn(BpdnSpec(rows=10, cols=20, sparsity=3, seed=7)),
    lambda: gen_qcqp(QcqpSpec(m=3, p=20, seed=7)),
])
def test_smooth_grad_matches_fd(maker, rng):
    prob = maker()
    beta = 0.7
    for _ in range(20):
        w = random_state(prob, rng)

        def value_at(x):
            trial = PrimalDualPoint.at(prob, x, w.y, w.z)
            return smooth_value(trial, beta, prob)

        num = central_diff_grad(value_at, w.x)
        ana = smooth_grad(w, beta, prob)
        err = np.linalg.norm(num - ana) / (1.0 + np.linalg.norm(ana))
        assert err <= 1e-5


def test_block_gradient_slices_match_full(rng):
    prob = gen_qcqp(QcqpSpec(m=3, p=12, seed=5)).with_blocks(4)
    for _ in range(20):
        w = random_state(prob, rng)
        full = smooth_grad(w, 1.0, prob)
        parts = [smooth_grad_block(w, 1.0, prob, i) for i in range(4)]
        np.testing.assert_allclose(np.concatenate(parts), full, atol=1e-12)
        # tracker-based assembly agrees when trackers are freshly based
        trackers = [prob.g.tracker(w.x)] + [c.tracker(w.x) for c in prob.constraints]
        parts_t = [smooth_grad_block(w, 1.0, prob, i, trackers=trackers)
                   for i in range(4)]
        np.testing.assert_allclose(np.concatenate(parts_t), full, atol=1e-10)


def test_block_gradient_single_block_is_full(rng):
    prob = gen_qcqp(QcqpSpec(m=2, p=6, seed=6)).with_blocks(1)
    w = random_state(prob, rng)
    np.testing.assert_allclose(smooth_grad_block(w, 1.0, prob, 0),
                               smooth_grad(w, 1.0, prob))


def test_block_gradient_requires_partition():
    prob = gen_qcqp(QcqpSpec(m=2, p=6, seed=6))
    w = PrimalDualPoint.at(prob, np.zeros(6))
    with pytest.raises(ValueError):
        smooth_grad_block(w, 1.0, prob, 0)


@pytest.mark.slow
def test_block_gradient_cost_scales_with_width():
    # maintained-state partial gradients cost ~1/n of a full gradient
    import time
    n = 40
    prob = gen_qcqp(QcqpSpec(m=3, p=800, seed=0)).with_blocks(n)
    w = random_state(prob, np.random.default_rng(0), z_scale=1.0)
    trackers = [prob.g.tracker(w.x)] + [c.tracker(w.x) for c in prob.constraints]

    reps = 50
    smooth_grad(w, 1.0, prob)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        smooth_grad(w, 1.0, prob)
    full = (time.perf_counter() - t0) / reps

    smooth_grad_block(w, 1.0, prob, 0, trackers=trackers)
    t0 = time.perf_counter()
    for rep in range(reps):
        smooth_grad_block(w, 1.0, prob, rep % n, trackers=trackers)
    part = (time.perf_counter() - t0) / reps
    assert part < full * 3.0 / n, (part, full)


# ---------------------------------------------------------------------------
# curvature bounds


def test_penalty_lipschitz_hand_case():
    # one constraint x^2 on [-1, 1]: B = 2, L = 2
    fn = QuadraticFunction([[2.0]], [0.0], 0.0, lipschitz=2.0)
    prob = ProblemInstance(
        QuadraticFunction([[1.0]], [0.0], lipschitz=1.0),
        BoxIndicator([-1.0], [1.0]), dim=1,
        constraints=[InequalityConstraint(fn, grad_bound=2.0)])
    val = penalty_lipschitz([0.5], [1.0], 1.0, prob)
    assert val == pytest.approx(1.0 * 4.0 + 2.0 * 1.25)


def test_penalty_lipschitz_inactive_reduces_to_grad_bounds():
    prob = gen_qcqp(QcqpSpec(m=3, p=4, seed=8))
    beta = 2.0
    expect = beta * sum(c.grad_bound ** 2 for c in prob.constraints)
    assert penalty_lipschitz(np.zeros(4), np.zeros(3), beta, prob) == \
        pytest.approx(expect)


def test_penalty_lipschitz_requires_constants():
    prob = gen_bpdn(BpdnSpec(rows=5, cols=8, sparsity=2, seed=0))
    with pytest.raises(ValueError, match="backtracking"):
        penalty_lipschitz(np.zeros(8), np.zeros(1), 1.0, prob)


def test_penalty_lipschitz_monotone_in_z(rng):
    prob = gen_qcqp(QcqpSpec(m=3, p=5, seed=9))
    for _ in range(20):
        x = rng.uniform(-10, 10, size=5)
        z = rng.uniform(0, 2, size=3)
        z_up = z + rng.uniform(0, 1, size=3)
        assert penalty_lipschitz(x, z_up, 1.0, prob) >= \
            penalty_lipschitz(x, z, 1.0, prob)


def test_penalty_gradient_lipschitz_sampled(rng):
    # the bound dominates gradient differences over sampled pairs in the box
    prob = gen_qcqp(QcqpSpec(m=3, p=20, seed=0))
    lo, hi = prob.h.domain
    beta = 1.0
    z = rng.uniform(0, 2, size=3)
    xs = rng.uniform(lo, hi, size=(200, 20))
    xh = rng.uniform(lo, hi, size=(200, 20))

    def penalty_grad(w):
        coef = scalar_penalty_deriv(prob.constraint_values(w), z, beta)
        out = np.zeros(20)
        for cj, con in zip(coef, prob.constraints):
            out += cj * con.grad(w)
        return out

    for a, b in zip(xs, xh):
        bound = penalty_lipschitz(a, z, beta, prob)
        diff = np.linalg.norm(penalty_grad(b) - penalty_grad(a))
        assert diff <= bound * np.linalg.norm(b - a) + 1e-8


def test_smooth_lipschitz_composition():
    # no affine part, no constraints: just L_g
    plain = ProblemInstance(QuadraticFunction([[3.0]], [0.0], lipschitz=3.0),
                            ZeroProx(), dim=1)
    assert smooth_lipschitz([0.0], np.zeros(0), 1.0, plain) == 3.0
    # identity A adds beta * 1
    from linalm.model import AffineConstraint
    with_eq = ProblemInstance(
        QuadraticFunction(np.eye(2), np.zeros(2), lipschitz=1.0), ZeroProx(),
        dim=2, affine=AffineConstraint(np.eye(2), np.zeros(2)))
    assert smooth_lipschitz(np.zeros(2), np.zeros(0), 1.0, with_eq) == \
        pytest.approx(2.0, rel=1e-6)


def test_descent_inequality_holds_at_smooth_lipschitz(rng):
    # the prox-gradient candidate at eta = L_F always satisfies the
    # smooth-part descent inequality
    prob = gen_qcqp(QcqpSpec(m=3, p=10, seed=11))
    beta = 0.5
    cfg = SolverConfig(beta=beta)
    for _ in range(50):
        w = random_state(prob, rng, z_scale=2.0)
        eta = smooth_lipschitz(w.x, w.z, beta, prob, fvals=w.fvals)
        grad = smooth_grad(w, beta, prob)
        x_new = primal_candidate(w, grad, eta, prob)
        cand = PrimalDualPoint.at(prob, x_new, w.y, w.z)
        lhs = smooth_value(cand, beta, prob)
        dx = x_new - w.x
        rhs = (smooth_value(w, beta, prob) + grad @ dx
               + 0.5 * eta * float(dx @ dx))
        assert lhs <= rhs + 1e-10 * max(1.0, abs(rhs))
