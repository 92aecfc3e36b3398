"""
Iteration counts across mesh size and viscosity
===============================================

The point of pairing AIR multigrid with BiCGSTAB: in the
advection-dominated regime the preconditioned iteration count does not
grow as the mesh is refined.  Crank the viscosity up and it does.
"""

from sthdg.cases import build_case_mesh, case_by_name
from sthdg.solving import solve_problem

ns = (8, 16, 32, 64)
nus = (1e-6, 1e-2, 1e-1)

print(f"{'n':>4} {'dofs':>7}", *(f"nu={nu:g}".rjust(9) for nu in nus))
for n in ns:
    cells = []
    for nu in nus:
        case = case_by_name("pulse1d", nu=nu)
        mesh = build_case_mesh(case, n, n, mode="all_at_once")
        sol = solve_problem(mesh, 1, case.prob)
        dofs = len(sol.lam)
        cells.append(sol.iterations)
    print(f"{n:>4} {dofs:>7}", *(f"{c:>9}" for c in cells))

# nu = 1e-6 sits flat; nu = 1e-1 grows with n because the facet system
# loses the near-triangular structure the restriction is built to
# exploit.  The driver version writes iterations.csv -- put
# "nus = 1e-6,1e-1" in an INI file and run:
#     sthdg iterations --config exp.ini --out results/
