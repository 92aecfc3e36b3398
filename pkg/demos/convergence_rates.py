"""
Convergence rates on the diffusing pulse
========================================

Measure the space-time L2 error on a ladder of uniform meshes and watch
it fall like h^(p+1), for both the global solve and the slab march.
"""

import numpy as np

from sthdg.cases import build_case_mesh, case_by_name
from sthdg.hdg import st_l2_error
from sthdg.solving import solve_problem

ns = (8, 16, 32)

for p in (1, 2):
    case = case_by_name("pulse1d", nu=1e-2)
    print(f"\np = {p}  (expect rate {p + 1})")
    print(f"{'n':>4} {'all-at-once':>14} {'rate':>6} {'slab':>14} {'rate':>6}")
    prev = {}
    for n in ns:
        row = [f"{n:>4}"]
        for mode in ("all_at_once", "slab"):
            mesh = build_case_mesh(case, n, n, mode=mode)
            sol = solve_problem(mesh, p, case.prob)
            if mode == "slab":
                err = sol.error(p, case.prob.exact)
            else:
                err = st_l2_error(mesh, p, sol.U, case.prob.exact)
            rate = (np.log2(prev[mode] / err) if mode in prev else None)
            prev[mode] = err
            row.append(f"{err:>14.4e}")
            row.append(f"{rate:>6.2f}" if rate is not None else f"{'-':>6}")
        print(" ".join(row))

# the two modes agree to near machine precision: with an upwind-only
# coupling across horizontal facets the global system is block
# triangular in time, so eliminating slabs sequentially is exact

# the experiment driver runs the full ladder and writes converge.csv:
#     sthdg converge --p 2 --nu 1e-2 --out results/
