import numpy as np
import pytest


def central_diff_grad(fn, x, step=None):
    """Finite-difference oracle: central differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * (1.0 + np.linalg.norm(x))
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return grad


def assert_grad_matches(fn, grad_fn, points, rtol=1e-5):
    """Check an analytic gradient against the finite-difference oracle."""
    for x in points:
        num = central_diff_grad(fn, x)
        ana = np.asarray(grad_fn(x))
        err = np.linalg.norm(num - ana) / (1.0 + np.linalg.norm(ana))
        assert err <= rtol, f"gradient mismatch {err:.2e} at {x}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fejer_quantities(prob, ref, cfg, solve_fn, **kwargs):
    """Per-iteration weighted distances (eta_k/2)||x_{k+1}-x*||^2 + dual terms
    against a verified KKT point, recorded along one solve."""
    from linalm.model import PrimalDualPoint, kkt_residual

    w_star = PrimalDualPoint.at(prob, ref.x, ref.y, ref.z)
    assert max(kkt_residual(w_star, prob)) <= 1e-8  # verified KKT point
    rho_y, rho_z = cfg.resolve_rho()
    points = []
    res = solve_fn(prob, cfg, callback=lambda k, w: points.append(
        (w.x.copy(), w.y.copy(), w.z.copy())), **kwargs)
    etas = [r.eta_max for r in res.trace if r.eta_max is not None]
    assert len(etas) == len(points)
    vals = []
    for eta, (x, y, z) in zip(etas, points):
        d = 0.5 * eta * np.linalg.norm(x - ref.x) ** 2
        if ref.y.size:
            d += np.linalg.norm(y - ref.y) ** 2 / (2 * rho_y)
        if ref.z.size:
            d += np.linalg.norm(z - ref.z) ** 2 / (2 * rho_z)
        vals.append(d)
    return np.array(vals)
