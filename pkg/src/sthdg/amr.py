"""Gradient-recovery error indicators and the adapt-solve loop.

The indicator is the classical recovered-gradient discrepancy, applied to
the full space-time gradient (temporal component included): element
gradients of the reconstructed solution are averaged to vertices with
area weights, re-interpolated linearly, and the elementwise L2 distance
to the raw discrete gradient serves as the refinement indicator.
"""

from dataclasses import dataclass

import numpy as np

from .basis import triangle_basis
from .hdg import _geometry
from .mesh import bisect_refine
from .quadrature import triangle_rule

_VERTEX_REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class ErrorIndicatorField:
    """Per-element nonnegative indicators eta_K."""

    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        if (self.eta < 0).any():
            raise ValueError("indicators must be nonnegative")

    @property
    def global_estimate(self):
        return float(np.sqrt(np.sum(self.eta**2)))


def zz_estimate(mesh, U, p):
    """Recovered-gradient indicator field for a reconstructed solution U.

    The recovery averages adjacent-element space-time gradients at each
    vertex (area weights) and interpolates them linearly; eta_K is the
    L2(K) norm of the difference to the element gradient.  Exact on
    globally linear fields, so eta vanishes there.
    """
    ne = mesh.n_elements
    basis = triangle_basis(p)
    coeffs = U.reshape(ne, -1)
    _, _, detJ, Jinv = _geometry(mesh)
    area = mesh.areas

    # element gradient at the three vertices, physical components (t, x)
    gref_v = basis.grad(_VERTEX_REF)
    du_v = np.einsum("ei,vid,edc->evc", coeffs, gref_v, Jinv)

    nv = len(mesh.vertices)
    gsum = np.zeros((nv, 2))
    wsum = np.zeros(nv)
    for i in range(3):
        np.add.at(gsum, mesh.elements[:, i], area[:, None] * du_v[:, i])
        np.add.at(wsum, mesh.elements[:, i], area)
    gvert = gsum / wsum[:, None]

    rq, rw = triangle_rule(2 * p + 2)
    hat = np.stack([1.0 - rq[:, 0] - rq[:, 1], rq[:, 0], rq[:, 1]], axis=1)
    grec = np.einsum("qv,evc->eqc", hat, gvert[mesh.elements])
    gref_q = basis.grad(rq)
    du_q = np.einsum("ei,qid,edc->eqc", coeffs, gref_q, Jinv)
    diff2 = np.sum((grec - du_q) ** 2, axis=2)
    eta2 = np.einsum("q,eq->e", rw, diff2) * detJ
    return ErrorIndicatorField(np.sqrt(np.maximum(eta2, 0.0)))


def mark_fixed_fraction(field, fraction=0.1):
    """Ids of the ceil(fraction * n) largest indicators, ties by lowest id."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    eta = field.eta
    n = len(eta)
    if n == 0:
        raise ValueError("empty indicator field")
    k = int(np.ceil(fraction * n))
    order = np.lexsort((np.arange(n), -eta))
    return np.sort(order[:k])


@dataclass(frozen=True)
class AmrRecord:
    """One adapt-solve cycle: size, error, solver effort, mesh resolution."""

    cycle: int
    n_coupled: int
    l2_error: float
    iterations: int
    median_h: float
    mesh: object = None


def amr_loop(case, p, cycles, params=None, n0=8, fraction=0.1,
             max_elements=None, keep_meshes=False):
    """Run solve -> estimate -> mark -> refine for `cycles` rounds.

    Starts from a uniform n0 x n0 mesh of `case` and returns one
    :class:`AmrRecord` per solve (up to cycles + 1 total; cycles=0 is a
    single uniform solve).  n_coupled counts globally coupled facet
    unknowns.  The loop stops early once the global indicator reaches
    roundoff: past that point the field is numerical noise and marking
    on it would scatter refinement instead of concentrating it.
    """
    from .cases import build_case_mesh
    from .hdg import st_l2_error
    from .solving import solve_problem

    mesh = build_case_mesh(case, n0, n0, mode="all_at_once")
    records = []
    for cycle in range(cycles + 1):
        sol = solve_problem(mesh, p, case.prob, params)
        records.append(AmrRecord(
            cycle=cycle,
            n_coupled=len(sol.lam),
            l2_error=st_l2_error(mesh, p, sol.U, case.prob.exact),
            iterations=int(sol.iterations),
            median_h=float(np.median(mesh.element_h)),
            mesh=mesh if keep_meshes else None,
        ))
        if cycle == cycles:
            break
        field = zz_estimate(mesh, sol.U, p)
        if field.global_estimate <= 1e-10 * (1.0 + np.abs(sol.U).max()):
            break
        marked = mark_fixed_fraction(field, fraction)
        mesh = bisect_refine(mesh, marked, max_elements=max_elements)
    return records
