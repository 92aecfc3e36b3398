"""
Discretization error stalls long before the residual
====================================================

Track the solution error along the Krylov iteration.  After roughly one
full step the L2 error has reached its converged value; everything the
solver does afterwards polishes an algebraic residual the discretization
can no longer feel.  Useful when picking a stopping tolerance.
"""

import numpy as np

from sthdg.cases import build_case_mesh, case_by_name
from sthdg.hdg import assemble_blocks, condense, reconstruct, st_l2_error
from sthdg.solving import solve_condensed

case = case_by_name("pulse1d", nu=1e-4)
mesh = build_case_mesh(case, 32, 32, mode="all_at_once")
cs = condense(assemble_blocks(mesh, 2, case.prob))

# the callback sees every full BiCGSTAB step; keep the iterates
iterates = []
sol = solve_condensed(cs, callback=lambda lam, k: iterates.append((k, lam)))
resid = dict(sol.report.residuals)

print(f"{'iter':>4} {'precond residual':>18} {'L2 error':>14}")
zero = np.zeros_like(sol.lam)
for k, lam in [(0, zero)] + iterates:
    err = st_l2_error(mesh, 2, reconstruct(cs, lam), case.prob.exact)
    print(f"{k:>4} {resid[k]:>18.3e} {err:>14.6e}")

# the same sweep at larger scale is the stagnation driver:
#     sthdg stagnation --p 2 --nu 1e-4 --out results/
