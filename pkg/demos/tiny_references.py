"""
Hand-checkable reference problems
=================================

Three tiny constrained programs whose optima are known in closed form,
solved with the full-vector linearized augmented Lagrangian solver.
"""

import numpy as np

from linalm import PrimalDualPoint, SolverConfig, kkt_residual, tiny_reference
from linalm import lalm

# Each reference bundles the instance with its exact primal-dual solution.
for kind in ("equality-qp", "scalar-qcqp", "scalar-bpdn"):
    prob, ref = tiny_reference(kind)

    # the bundled triple satisfies the optimality conditions to machine zero
    w_star = PrimalDualPoint.at(prob, ref.x, ref.y, ref.z)
    residual = max(kkt_residual(w_star, prob))

    # a few thousand first-order iterations recover the same point
    cfg = SolverConfig(beta=1.0, rho_y=1.0, rho_z=1.0, max_epochs=10_000,
                       record_every=1000)
    res = lalm.solve(prob, cfg)
    err = np.linalg.norm(res.w.x - ref.x)

    print(f"{kind:12s} optimal value {ref.f0:8.4f}   "
          f"reference KKT residual {residual:.1e}   solver error {err:.1e}")
