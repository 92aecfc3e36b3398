"""Hybridized DG discretization of space-time advection-diffusion.

The PDE ``u_t + a u_x - nu u_xx = f`` is discretized on a space-time
triangulation as a steady advection-diffusion problem in the space-time
velocity ``(1, a)``: element unknowns ``u`` live in P_p per triangle and
facet unknowns ``lambda`` in P_p per facet segment.  The facet flux

    sigma(u, lambda) = a_n^+ u + a_n^- lambda            (upwind advective)
                       - nu du/dx n_x
                       + (nu n_x^2 alpha/h)(u - lambda)  (IP diffusive)

with ``a_n = n_t + a n_x`` and penalty ``alpha = 10 p^2`` couples the two
spaces; the diffusive gradient is spatial only (the space-time diffusion
tensor is diag(0, nu), whose facet-normal component nu n_x^2 weights the
penalty), so time stepping is upwinding through the mesh.  Dirichlet data is eliminated (lifted into the
right-hand side), inflow-like Neumann facets carry
``-zeta u a_n + nu u_x n_x = g_N`` weakly, and the final-time surface is a
vacuous outflow Neumann facet.

Assembly produces per-element dense blocks plus the facet-coupled blocks
of the saddle system

    [A  B] [U     ]   [F]
    [C  D] [Lambda] = [G]

and :func:`condense` eliminates ``U`` element by element to the facet
Schur complement ``S = D - C A^{-1} B``, ``H = G - C A^{-1} F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .basis import segment_basis, triangle_basis, tri_space_dim
from .mesh import TAG_DIRICHLET, TAG_FINAL, TAG_NEUMANN, _LOCAL_EDGES
from .quadrature import segment_rule, triangle_rule
from .sparsela import SingularBlockError, validate_csr

__all__ = [
    "ProblemSpec",
    "BlockSystem",
    "CondensedSystem",
    "default_penalty",
    "assemble_blocks",
    "condense",
    "reconstruct",
    "st_l2_error",
    "project",
    "eval_elements",
    "line_trace_evaluator",
    "lambda_dof_positions",
]

_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def default_penalty(p: int) -> float:
    """Interior-penalty constant alpha = 10 p^2."""
    return 10.0 * p * p


@dataclass
class ProblemSpec:
    """Data defining one advection-diffusion problem.

    ``velocity`` may be a constant or a callable on (n, 2) space-time
    points; ``neumann`` receives points and the matching outward normals
    and must implement the inflow-trace formula for manufactured data.
    ``None`` data callables mean homogeneous data.
    """

    nu: float
    velocity: object = 1.0
    source: Optional[Callable] = None
    dirichlet: Optional[Callable] = None
    neumann: Optional[Callable] = None
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None  # rows (u_t, u_x)
    neumann_sides: tuple = ()
    penalty: Optional[float] = None
    name: str = ""

    def velocity_at(self, points):
        if callable(self.velocity):
            return np.asarray(self.velocity(points), dtype=float)
        return np.full(len(points), float(self.velocity))


@lru_cache(maxsize=None)
def _tables(p: int):
    """Reference quadrature/basis/trace tables for degree p."""
    rq, rw = triangle_rule(2 * p + 2)
    tb = triangle_basis(p)
    phi = tb.eval(rq)
    gref = tb.grad(rq)
    s, wf = segment_rule(2 * p + 2)
    psi = segment_basis(p).eval(s)
    traces = {}
    for la in range(3):
        for lb in range(3):
            if la == lb:
                continue
            pts = np.outer(1.0 - s, _REF_VERTS[la]) + np.outer(s, _REF_VERTS[lb])
            traces[(la, lb)] = (tb.eval(pts), tb.grad(pts))
    return rq, rw, phi, gref, s, wf, psi, traces


def _geometry(mesh):
    v = mesh.vertices[mesh.elements]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / detJ
    Jinv[:, 0, 1] = -J[:, 0, 1] / detJ
    Jinv[:, 1, 0] = -J[:, 1, 0] / detJ
    Jinv[:, 1, 1] = J[:, 0, 0] / detJ
    return v, J, detJ, Jinv


def _facet_side_groups(mesh):
    """Facet sides grouped by the (local index of low, high vertex) pair."""
    groups = {}
    for s in (0, 1):
        ks = mesh.facet_elems[:, s]
        have = np.nonzero(ks >= 0)[0]
        k = ks[have]
        loc = mesh.facet_locals[have, s]
        i = np.array([_LOCAL_EDGES[l][0] for l in loc])
        j = np.array([_LOCAL_EDGES[l][1] for l in loc])
        first = mesh.elements[k, i] == mesh.facets[have, 0]
        la = np.where(first, i, j)
        lb = np.where(first, j, i)
        for key in range(9):
            sel = np.nonzero(la * 3 + lb == key)[0]
            if len(sel) == 0:
                continue
            g = groups.setdefault((key // 3, key % 3), [[], [], [], []])
            g[0].extend(have[sel])
            g[1].extend(k[sel])
            g[2].extend(loc[sel])
            g[3].extend([s] * len(sel))
    return {
        key: tuple(np.asarray(a, dtype=np.int64) for a in g)
        for key, g in groups.items()
    }


@dataclass
class BlockSystem:
    """Assembled four-block system in element/facet-local storage."""

    mesh: object
    p: int
    nV: int
    facet_block_size: int
    elem_A: np.ndarray  # (ne, nV, nV)
    elem_F: np.ndarray  # (ne, nV)
    elem_B: np.ndarray  # (ne, 3, nV, nM), zero on Dirichlet edges
    elem_C: np.ndarray  # (ne, 3, nM, nV)
    elem_facet_block: np.ndarray  # (ne, 3) facet block column or -1
    D: sp.csr_matrix
    G: np.ndarray
    coupled_facets: np.ndarray
    facet_block: np.ndarray  # (nf,) block index or -1

    @property
    def n_lambda(self):
        return len(self.coupled_facets) * self.facet_block_size

    def monolithic(self):
        """Full sparse [[A, B], [C, D]] system and its right-hand side."""
        ne, nV, nM = len(self.elem_A), self.nV, self.facet_block_size
        nU = ne * nV
        Asp = sp.block_diag([self.elem_A[e] for e in range(ne)], format="csr")
        rows_b, cols_b, vals_b = [], [], []
        rows_c, cols_c, vals_c = [], [], []
        for e in range(ne):
            for loc in range(3):
                fb = self.elem_facet_block[e, loc]
                if fb < 0:
                    continue
                r = np.repeat(np.arange(nV), nM) + e * nV
                c = np.tile(np.arange(nM), nV) + fb * nM
                rows_b.append(r)
                cols_b.append(c)
                vals_b.append(self.elem_B[e, loc].ravel())
                rows_c.append(np.repeat(np.arange(nM), nV) + fb * nM)
                cols_c.append(np.tile(np.arange(nV), nM) + e * nV)
                vals_c.append(self.elem_C[e, loc].ravel())
        nL = self.n_lambda
        Bsp = sp.coo_matrix(
            (np.concatenate(vals_b), (np.concatenate(rows_b), np.concatenate(cols_b))),
            shape=(nU, nL)) if rows_b else sp.csr_matrix((nU, nL))
        Csp = sp.coo_matrix(
            (np.concatenate(vals_c), (np.concatenate(rows_c), np.concatenate(cols_c))),
            shape=(nL, nU)) if rows_c else sp.csr_matrix((nL, nU))
        K = sp.bmat([[Asp, Bsp], [Csp, self.D]], format="csr")
        return validate_csr(K), np.concatenate([self.elem_F.ravel(), self.G])


@dataclass
class CondensedSystem:
    """Facet Schur complement with retained element solves."""

    S: sp.csr_matrix
    H: np.ndarray
    facet_block_size: int
    p: int
    mesh: object
    elem_Ainv: np.ndarray  # (ne, nV, nV)
    elem_Brect: np.ndarray  # (ne, nV, 3*nM)
    elem_F: np.ndarray
    gather_index: np.ndarray  # (ne, 3*nM) global lambda index or -1
    coupled_facets: np.ndarray

    @property
    def n_lambda(self):
        return self.S.shape[0]


def assemble_blocks(mesh, p, prob):
    """Assemble the four-block HDG system for ``prob`` at degree ``p``."""
    if p < 1:
        raise ValueError("degree must be >= 1")
    bnd = mesh.boundary_facets()
    if len(bnd) and np.any(mesh.boundary_tags[bnd] == 0):
        raise ValueError("mesh boundary is unclassified; run classify_boundary first")
    nu = float(prob.nu)
    alpha = default_penalty(p) if prob.penalty is None else float(prob.penalty)
    rq, rw, phi, gref, sseg, wf, psi, traces = _tables(p)
    nV = tri_space_dim(p)
    nM = p + 1
    ne = mesh.n_elements
    nf = mesh.n_facets
    v, J, detJ, Jinv = _geometry(mesh)

    # volume terms
    X = v[:, 0][:, None, :] + np.einsum("eij,qj->eqi", J, rq)
    flatX = X.reshape(-1, 2)
    avals = prob.velocity_at(flatX).reshape(ne, -1)
    G = np.einsum("qid,edc->eqic", gref, Jinv)
    conv = G[:, :, :, 0] + avals[:, :, None] * G[:, :, :, 1]
    wdet = rw[None, :] * detJ[:, None]
    elem_A = -np.einsum("eq,eqi,qj->eij", wdet, conv, phi, optimize=True)
    elem_A += nu * np.einsum("eq,eqi,eqj->eij", wdet, G[:, :, :, 1], G[:, :, :, 1],
                             optimize=True)
    if prob.source is not None:
        fvals = np.asarray(prob.source(flatX), dtype=float).reshape(ne, -1)
        elem_F = np.einsum("eq,eq,qi->ei", wdet, fvals, phi, optimize=True)
    else:
        elem_F = np.zeros((ne, nV))

    elem_B = np.zeros((ne, 3, nV, nM))
    elem_C = np.zeros((ne, 3, nM, nV))
    D_blocks = np.zeros((nf, nM, nM))
    G_blocks = np.zeros((nf, nM))
    tags = mesh.boundary_tags

    for (la, lb), (fids, kids, locs, sides) in _facet_side_groups(mesh).items():
        TV, TGref = traces[(la, lb)]
        pa = mesh.vertices[mesh.facets[fids, 0]]
        pb = mesh.vertices[mesh.facets[fids, 1]]
        Xf = pa[:, None, :] + sseg[None, :, None] * (pb - pa)[:, None, :]
        L = mesh.facet_lengths[fids]
        n = mesh.facet_normals[fids, sides]
        af = prob.velocity_at(Xf.reshape(-1, 2)).reshape(len(fids), -1)
        an = n[:, 0:1] + af * n[:, 1:2]
        apl = np.maximum(an, 0.0)
        ami = np.minimum(an, 0.0)
        w2 = wf[None, :] * L[:, None]
        # penalty weighted by the facet-normal component of the (space-only)
        # diffusion tensor, n^T diag(0, nu) n = nu n_x^2: full strength on
        # spatial facets, none across purely time-like facets, where only
        # the upwind advective flux couples and extra penalization would
        # degrade even-degree convergence
        coef = (nu * alpha / mesh.element_h[kids])[:, None] * n[:, 1:2] ** 2
        nx = n[:, 1:2]
        Gxt = np.einsum("qid,md->mqi", TGref, Jinv[kids][:, :, 1])

        A_f = np.einsum("mq,qj,qi->mij", w2 * (apl + coef), TV, TV, optimize=True)
        A_f -= nu * np.einsum("mq,mqj,qi->mij", w2 * nx, Gxt, TV, optimize=True)
        A_f -= nu * np.einsum("mq,qj,mqi->mij", w2 * nx, TV, Gxt, optimize=True)
        np.add.at(elem_A, kids, A_f)

        is_dir = tags[fids] == TAG_DIRICHLET
        nd = ~is_dir
        if nd.any():
            wB = (w2 * (ami - coef))[nd]
            B_f = np.einsum("mq,qi,qn->min", wB, TV, psi, optimize=True)
            B_f += nu * np.einsum("mq,mqi,qn->min", (w2 * nx)[nd], Gxt[nd], psi,
                                  optimize=True)
            elem_B[kids[nd], locs[nd]] = B_f
            wC = -(w2 * (apl + coef))[nd]
            C_f = np.einsum("mq,qn,qj->mnj", wC, psi, TV, optimize=True)
            C_f += nu * np.einsum("mq,qn,mqj->mnj", (w2 * nx)[nd], psi, Gxt[nd],
                                  optimize=True)
            elem_C[kids[nd], locs[nd]] = C_f
            wD = (w2 * (coef - ami))[nd]
            np.add.at(D_blocks, fids[nd],
                      np.einsum("mq,qn,qk->mnk", wD, psi, psi, optimize=True))
        if is_dir.any():
            if prob.dirichlet is None:
                raise ValueError("problem has Dirichlet facets but no dirichlet data")
            gd = np.asarray(prob.dirichlet(Xf[is_dir].reshape(-1, 2)),
                            dtype=float).reshape(is_dir.sum(), -1)
            lift = np.einsum("mq,mq,qi->mi", (w2 * (ami - coef))[is_dir], gd, TV,
                             optimize=True)
            lift += nu * np.einsum("mq,mq,mqi->mi", (w2 * nx)[is_dir], gd,
                                   Gxt[is_dir], optimize=True)
            np.add.at(elem_F, kids[is_dir], -lift)
        # inflow-like and final facets: outflow stabilization + data
        is_neu = (tags[fids] == TAG_NEUMANN) | (tags[fids] == TAG_FINAL)
        if is_neu.any():
            np.add.at(D_blocks, fids[is_neu],
                      np.einsum("mq,qn,qk->mnk", (w2 * apl)[is_neu], psi, psi,
                                optimize=True))
            if prob.neumann is not None:
                nn = np.repeat(n[is_neu][:, None, :], len(sseg), axis=1)
                gn = np.asarray(
                    prob.neumann(Xf[is_neu].reshape(-1, 2), nn.reshape(-1, 2)),
                    dtype=float).reshape(is_neu.sum(), -1)
                np.add.at(G_blocks, fids[is_neu],
                          np.einsum("mq,mq,qn->mn", w2[is_neu], gn, psi,
                                    optimize=True))

    coupled = np.nonzero((mesh.facet_elems[:, 1] >= 0) |
                         (tags == TAG_NEUMANN) | (tags == TAG_FINAL))[0]

    # In the pure-advection limit a facet can align with the characteristics
    # (a_n = 0 along it); nothing then couples to its trace, whose value is
    # immaterial for the element solution.  Pin those traces to zero so the
    # facet system stays invertible.
    scale = np.abs(D_blocks).max() if nf else 0.0
    dnorm = np.abs(D_blocks[coupled]).max(axis=(1, 2)) if len(coupled) else \
        np.zeros(0)
    loose = coupled[dnorm <= 1e-12 * scale]
    if len(loose):
        D_blocks[loose] = np.eye(nM)
        G_blocks[loose] = 0.0
        for f in loose:
            for k, loc in zip(mesh.facet_elems[f], mesh.facet_locals[f]):
                if k >= 0:
                    elem_B[k, loc] = 0.0
                    elem_C[k, loc] = 0.0

    facet_block = np.full(nf, -1, dtype=np.int64)
    facet_block[coupled] = np.arange(len(coupled))
    elem_facet_block = facet_block[mesh.elem_facets]
    nL = len(coupled) * nM
    Dg = sp.block_diag(D_blocks[coupled], format="csr") if len(coupled) else \
        sp.csr_matrix((0, 0))
    return BlockSystem(mesh=mesh, p=p, nV=nV, facet_block_size=nM,
                       elem_A=elem_A, elem_F=elem_F, elem_B=elem_B, elem_C=elem_C,
                       elem_facet_block=elem_facet_block, D=validate_csr(Dg),
                       G=G_blocks[coupled].ravel(), coupled_facets=coupled,
                       facet_block=facet_block)


def condense(bs):
    """Eliminate element unknowns; return the facet Schur system."""
    ne, nV, nM = len(bs.elem_A), bs.nV, bs.facet_block_size
    Ainv = np.linalg.inv(bs.elem_A)
    resid = np.abs(np.matmul(bs.elem_A, Ainv) - np.eye(nV)).max(axis=(1, 2))
    if resid.max() > 1e-6:
        k = int(np.argmax(resid))
        raise SingularBlockError(f"element matrix {k} is numerically singular "
                                 f"(inverse residual {resid[k]:.2e})")
    Brect = np.transpose(bs.elem_B, (0, 2, 1, 3)).reshape(ne, nV, 3 * nM)
    Crect = bs.elem_C.reshape(ne, 3 * nM, nV)
    AinvB = np.matmul(Ainv, Brect)
    AinvF = np.matmul(Ainv, bs.elem_F[:, :, None])[:, :, 0]
    Sloc = np.matmul(Crect, AinvB)
    Hloc = np.matmul(Crect, AinvF[:, :, None])[:, :, 0]

    gather = np.where(bs.elem_facet_block >= 0,
                      bs.elem_facet_block * nM, -1)[:, :, None] + np.arange(nM)
    gather = np.where(bs.elem_facet_block[:, :, None] >= 0, gather, -1)
    gather = gather.reshape(ne, 3 * nM)
    nL = bs.n_lambda
    valid = gather >= 0
    pair = valid[:, :, None] & valid[:, None, :]
    rows = np.broadcast_to(gather[:, :, None], Sloc.shape)[pair]
    cols = np.broadcast_to(gather[:, None, :], Sloc.shape)[pair]
    S = bs.D + sp.coo_matrix((-Sloc[pair], (rows, cols)), shape=(nL, nL)).tocsr()
    H = bs.G.copy()
    np.subtract.at(H, gather[valid], Hloc[valid])
    return CondensedSystem(S=validate_csr(S), H=H, facet_block_size=nM, p=bs.p,
                           mesh=bs.mesh, elem_Ainv=Ainv, elem_Brect=Brect,
                           elem_F=bs.elem_F, gather_index=gather,
                           coupled_facets=bs.coupled_facets)


def reconstruct(cs, lam):
    """Recover element unknowns from facet values; returns (ne*nV,)."""
    lam_ext = np.append(lam, 0.0)
    lamloc = lam_ext[np.where(cs.gather_index >= 0, cs.gather_index, len(lam))]
    rhs = cs.elem_F - np.matmul(cs.elem_Brect, lamloc[:, :, None])[:, :, 0]
    U = np.matmul(cs.elem_Ainv, rhs[:, :, None])[:, :, 0]
    return U.ravel()


def eval_elements(mesh, p, U, ref_points):
    """Evaluate the elementwise solution at reference points; (ne, npts)."""
    phi = triangle_basis(p).eval(ref_points)
    return np.einsum("qi,ei->eq", phi, U.reshape(mesh.n_elements, -1))


def st_l2_error(mesh, p, U, exact, degree=None):
    """Space-time L2 distance between U and a callable exact solution."""
    deg = 2 * p + 4 if degree is None else degree
    rq, rw = triangle_rule(deg)
    phi = triangle_basis(p).eval(rq)
    v, J, detJ, _ = _geometry(mesh)
    X = v[:, 0][:, None, :] + np.einsum("eij,qj->eqi", J, rq)
    ue = np.asarray(exact(X.reshape(-1, 2)), dtype=float).reshape(mesh.n_elements, -1)
    uh = np.einsum("qi,ei->eq", phi, U.reshape(mesh.n_elements, -1))
    err2 = np.einsum("eq,eq->", rw[None, :] * detJ[:, None], (uh - ue) ** 2)
    return float(np.sqrt(err2))


def project(mesh, p, fn, degree=None):
    """Elementwise L2 projection of a callable onto P_p; returns (ne*nV,)."""
    deg = 2 * p + 4 if degree is None else degree
    rq, rw = triangle_rule(deg)
    phi = triangle_basis(p).eval(rq)
    v, J, detJ, _ = _geometry(mesh)
    X = v[:, 0][:, None, :] + np.einsum("eij,qj->eqi", J, rq)
    fv = np.asarray(fn(X.reshape(-1, 2)), dtype=float).reshape(mesh.n_elements, -1)
    # reference-orthonormal basis: the element mass matrix is detJ * I and
    # the detJ factors cancel against the quadrature weights
    return np.einsum("q,eq,qi->ei", rw, fv, phi).ravel()


def line_trace_evaluator(mesh, p, U, side="tmax"):
    """Evaluator for the solution trace on one straight boundary side.

    Returns a callable mapping (n, 2) space-time points on that side to
    solution values, used to hand a slab's top trace to the next slab as
    inflow data.  Lookup is by the spatial coordinate.
    """
    from .mesh import SIDE_NAMES
    sid = SIDE_NAMES.index(side)
    fsel = np.nonzero(mesh.boundary_sides == sid)[0]
    if len(fsel) == 0:
        raise ValueError(f"mesh has no boundary facets on side {side!r}")
    xs = mesh.vertices[mesh.facets[fsel]][:, :, 1]
    lo = xs.min(axis=1)
    order = np.argsort(lo)
    fsel = fsel[order]
    lo = lo[order]
    ks = mesh.facet_elems[fsel, 0]
    v, _, _, Jinv = _geometry(mesh)
    v0 = v[:, 0]
    tb = triangle_basis(p)
    Ue = U.reshape(mesh.n_elements, -1)

    def evaluate(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.clip(np.searchsorted(lo, pts[:, 1], side="right") - 1, 0, len(lo) - 1)
        k = ks[idx]
        ref = np.einsum("ndc,nc->nd", Jinv[k], pts - v0[k])
        return np.einsum("qi,qi->q", tb.eval(ref), Ue[k])

    return evaluate


def lambda_dof_positions(bs_or_cs):
    """Facet-midpoint coordinates for every lambda DOF; (n_lambda, 2)."""
    mesh = bs_or_cs.mesh
    nM = bs_or_cs.facet_block_size
    mids = mesh.facet_midpoints()[bs_or_cs.coupled_facets]
    return np.repeat(mids, nM, axis=0)
