"""
Finite minimax via the epigraph reformulation
=============================================

min over a box of max_j f_j(x) becomes a smooth constrained program in
(x, t): minimize t subject to f_j(x) - t <= 0. The solver's value is checked
against a dense grid search.
"""

import numpy as np

from linalm import SolverConfig
from linalm import lalm
from linalm.instances import random_minimax_1d

for seed in range(3):
    fns, prob = random_minimax_1d(m=3, seed=seed, box=(-5.0, 5.0))

    # brute-force oracle: the best of 1e5 grid points
    grid = np.linspace(-5.0, 5.0, 100_000)[:, None]
    oracle = float(np.max(np.stack([fn.values(grid) for fn in fns]), 0).min())

    # the stored start is strictly feasible: t0 exceeds every f_j(x0)
    res = lalm.solve(prob, SolverConfig(beta=1.0, rho_y=1.0, rho_z=1.0,
                                        max_epochs=20_000, record_every=2000),
                     x0=prob.meta["x0"])
    x_opt, t_opt = res.w.x[:-1], res.w.x[-1]
    achieved = max(fn(x_opt) for fn in fns)

    print(f"seed {seed}: grid minimum {oracle:.6f}   solver {achieved:.6f}   "
          f"x* = {x_opt[0]:+.4f}   gap {abs(achieved - oracle):.1e}")
