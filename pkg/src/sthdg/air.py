"""Algebraic multigrid with approximate ideal restriction (AIR).

Built for the nonsymmetric, advection-dominated facet systems coming out
of static condensation: restriction approximates the ideal operator

    R_ideal = [-A_cf A_ff^{-1},  I]

row by row from local neighborhood solves (distance-one lAIR), while
interpolation is the cheap one-point operator.  Coarse operators are
Galerkin triple products with independently built R and P.  The cycle is
V(0,1): restrict the residual, correct, then one post-relaxation sweep
(forward Gauss-Seidel on F-points followed by all points, by default).

Also provides the block topological ordering used to expose the lower
block-triangular structure of purely advective facet systems, and the
relaxation catalog (Jacobi, forward GS, F-then-all GS, ordered block GS).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .sparsela import DenseLU, spgemm, validate_csr

__all__ = [
    "AirParams",
    "AirSetupError",
    "CFSplitting",
    "StrengthGraph",
    "TopologicalOrder",
    "strength_graph",
    "rs_coarsen",
    "lair_restriction",
    "one_point_interpolation",
    "ideal_restriction_dense",
    "galerkin_coarse",
    "topological_block_order",
    "relax",
    "build_hierarchy",
    "AirHierarchy",
    "vcycle",
]

F_POINT = 0
C_POINT = 1


class AirSetupError(RuntimeError):
    """Setup cannot continue (e.g. coarsening stagnated on a large level)."""


@dataclass
class StrengthGraph:
    """Directed strength-of-connection graph in CSR form.

    Edge i -> j means "i strongly depends on j":
    |a_ij| >= theta * max_{k != i} |a_ik|.  ``csr`` stores |a_ij| for the
    retained edges (no diagonal).
    """

    csr: sp.csr_matrix
    theta: float

    @property
    def n(self):
        return self.csr.shape[0]


@dataclass
class CFSplitting:
    labels: np.ndarray  # C_POINT / F_POINT per row
    coarse_index: np.ndarray  # position among C-points, -1 for F

    @property
    def n(self):
        return len(self.labels)

    @property
    def n_coarse(self):
        return int(np.count_nonzero(self.labels == C_POINT))

    @property
    def c_points(self):
        return np.nonzero(self.labels == C_POINT)[0]

    @property
    def f_points(self):
        return np.nonzero(self.labels == F_POINT)[0]


def strength_graph(A, theta):
    """Magnitude-based strength of connection (nonsymmetric-safe)."""
    A = validate_csr(A)
    n = A.shape[0]
    C = A.copy().tolil()
    C.setdiag(0.0)
    C = C.tocsr()
    C.eliminate_zeros()
    dat = np.abs(C.data)
    rowmax = np.zeros(n)
    counts = np.diff(C.indptr)
    nz = counts > 0
    if nz.any():
        rowmax[nz] = np.maximum.reduceat(dat, C.indptr[:-1][nz])
    keep = dat >= theta * np.repeat(rowmax, counts) - 1e-300
    mask = sp.csr_matrix((keep.astype(float), C.indices, C.indptr), shape=(n, n))
    G = validate_csr(abs(C).multiply(mask))
    G.eliminate_zeros()
    return StrengthGraph(csr=G, theta=float(theta))


def rs_coarsen(g: StrengthGraph) -> CFSplitting:
    """Classical two-pass Ruge-Stuben CF splitting on a strength graph.

    First pass greedily picks C-points by descending influence count
    (ties broken by index); choosing a C-point turns its dependents into
    F-points and boosts the measure of their remaining dependencies.
    Points with no connections at all become F up front: relaxation
    solves their (diagonal) equations exactly, and keeping them off the
    coarse grids stops them from piling up level after level.  Second
    pass turns any F-point with strong dependencies but no C-dependency
    into C.
    """
    S = g.csr
    n = g.n
    ST = S.tocsc()
    state = np.full(n, -1, dtype=np.int8)  # -1 undecided
    isolated = (np.diff(S.indptr) == 0) & (np.diff(ST.indptr) == 0)
    state[isolated] = F_POINT
    measure = np.diff(ST.indptr).astype(np.int64).copy()  # how many depend on me
    heap = [(-measure[i], i) for i in range(n)]
    heapq.heapify(heap)
    while heap:
        negm, i = heapq.heappop(heap)
        if state[i] != -1 or -negm != measure[i]:
            continue  # stale entry
        state[i] = C_POINT
        # dependents of i become F
        for k in ST.indices[ST.indptr[i]:ST.indptr[i + 1]]:
            if state[k] != -1:
                continue
            state[k] = F_POINT
            # k now leans on its other dependencies: raise their priority
            for j in S.indices[S.indptr[k]:S.indptr[k + 1]]:
                if state[j] == -1:
                    measure[j] += 1
                    heapq.heappush(heap, (-measure[j], j))
    # second pass: F-points must see at least one C-point
    for i in range(n):
        if state[i] != F_POINT:
            continue
        deps = S.indices[S.indptr[i]:S.indptr[i + 1]]
        if len(deps) and not np.any(state[deps] == C_POINT):
            state[i] = C_POINT
    labels = (state == C_POINT).astype(np.int8)
    coarse_index = np.full(n, -1, dtype=np.int64)
    cpts = np.nonzero(labels)[0]
    coarse_index[cpts] = np.arange(len(cpts))
    return CFSplitting(labels=labels, coarse_index=coarse_index)


def lair_restriction(A, cf, theta=0.3):
    """Distance-one local AIR restriction (nc x n).

    Each C-point row solves a small transposed neighborhood system so
    that (R A) vanishes on the strong F-neighborhood of the C-point;
    singular neighborhoods fall back to a least-squares solution (the
    ``fallbacks`` attribute on the result counts them).
    """
    A = validate_csr(A)
    gR = strength_graph(A, theta).csr
    labels = cf.labels
    cpts = cf.c_points
    ap, ai, ad = A.indptr, A.indices, A.data

    def _row_at(row, cols):
        # entries of A[row, cols] for sorted cols, absent -> 0
        lo, hi = ap[row], ap[row + 1]
        idx = np.searchsorted(cols, ai[lo:hi])
        out = np.zeros(len(cols))
        ok = idx < len(cols)
        ok[ok] &= cols[idx[ok]] == ai[lo:hi][ok]
        out[idx[ok]] = ad[lo:hi][ok]
        return out

    rows, cols, vals = [], [], []
    fallbacks = 0
    for r, i in enumerate(cpts):
        nbr = gR.indices[gR.indptr[i]:gR.indptr[i + 1]]
        nbr = nbr[labels[nbr] == F_POINT]
        if len(nbr):
            Ann = np.array([_row_at(j, nbr) for j in nbr])
            ain = _row_at(i, nbr)
            try:
                w = np.linalg.solve(Ann.T, -ain)
            except np.linalg.LinAlgError:
                w = np.linalg.lstsq(Ann.T, -ain, rcond=1e-12)[0]
                fallbacks += 1
            rows.extend([r] * len(nbr))
            cols.extend(nbr.tolist())
            vals.extend(w.tolist())
        rows.append(r)
        cols.append(i)
        vals.append(1.0)
    R = sp.csr_matrix((vals, (rows, cols)), shape=(len(cpts), A.shape[0]))
    R = validate_csr(R)
    R.fallbacks = fallbacks
    return R


def one_point_interpolation(A, cf, g: StrengthGraph):
    """Each F-point interpolates from its strongest C-neighbor (n x nc)."""
    A = validate_csr(A)
    n = A.shape[0]
    labels = cf.labels
    S = g.csr
    si, sd = S.indices, np.abs(S.data)
    counts = np.diff(S.indptr)
    nonempty = counts > 0
    # per-entry weight; non-C neighbors can never win
    w = np.where(labels[si] == C_POINT, sd, -1.0)
    rowmax = np.full(n, -1.0)
    if nonempty.any():
        rowmax[nonempty] = np.maximum.reduceat(w, S.indptr[:-1][nonempty])
    # ties resolve to the lowest column index among the maximizers
    win = (w == np.repeat(rowmax, counts)) & (w >= 0.0)
    cand = np.where(win, si, n)
    best = np.full(n, n)
    if nonempty.any():
        best[nonempty] = np.minimum.reduceat(cand, S.indptr[:-1][nonempty])
    rows = []
    cols = []
    for i in range(n):
        if labels[i] == C_POINT:
            rows.append(i)
            cols.append(cf.coarse_index[i])
        elif best[i] < n:
            rows.append(i)
            cols.append(cf.coarse_index[best[i]])
        # else isolated F-point: no interpolation
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                      shape=(n, cf.n_coarse))
    return validate_csr(P)


def ideal_restriction_dense(A, labels):
    """Exact ideal restriction [-A_cf A_ff^{-1}, I] as a dense matrix."""
    A = np.asarray(A, dtype=float)
    cpts = np.nonzero(labels == C_POINT)[0]
    fpts = np.nonzero(labels == F_POINT)[0]
    R = np.zeros((len(cpts), A.shape[0]))
    R[np.arange(len(cpts)), cpts] = 1.0
    if len(fpts):
        Aff = A[np.ix_(fpts, fpts)]
        Acf = A[np.ix_(cpts, fpts)]
        R[:, fpts] = -Acf @ np.linalg.inv(Aff)
    return R


def galerkin_coarse(R, A, P):
    """Exact triple product R A P (no dropping)."""
    return spgemm(spgemm(R, A), P)


@dataclass
class TopologicalOrder:
    """Result of the block topological sort.

    ``order`` lists block indices in an admissible processing order; when
    ``complete`` is False, the matrix has block cycles and ``order`` is a
    topological order of the cycle condensation (cycle members listed
    ascending within their component).  ``cycle_blocks`` contains every
    block that sits in a nontrivial strongly connected component.
    """

    order: np.ndarray
    complete: bool
    cycle_blocks: np.ndarray
    block_size: int


def topological_block_order(A, block_size=1, droptol=0.0):
    """Order blocks so the matrix becomes (block) lower triangular.

    A dependency edge j -> i exists when block (i, j), i != j, holds an
    entry with |value| > droptol * (inf-norm of block row i); droptol = 0
    keeps any entry with nonzero value while ignoring explicit zeros.
    Uses Kahn's algorithm with an index-min heap, so the order is
    deterministic; cycles are reported via strongly connected components.
    """
    A = validate_csr(A)
    n = A.shape[0]
    b = int(block_size)
    if n % b != 0:
        raise ValueError("matrix size not divisible by block size")
    nb = n // b
    coo = A.tocoo()
    bi = coo.row // b
    bj = coo.col // b
    off = bi != bj
    rownorm = np.zeros(nb)
    np.maximum.at(rownorm, coo.row // b, np.abs(coo.data))
    keep = off & (np.abs(coo.data) > droptol * rownorm[bi])
    # unique block edges j -> i  (i depends on j)
    eij = np.unique(bi[keep] * nb + bj[keep])
    src = (eij % nb).astype(np.int64)  # j
    dst = (eij // nb).astype(np.int64)  # i
    G = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(nb, nb))
    ncomp, comp = csgraph.connected_components(G, directed=True,
                                               connection="strong")
    sizes = np.bincount(comp, minlength=ncomp)
    cycle_blocks = np.nonzero(sizes[comp] > 1)[0]
    complete = len(cycle_blocks) == 0
    # Kahn on the condensation (identical to the block graph when acyclic)
    csrc, cdst = comp[src], comp[dst]
    keep2 = csrc != cdst
    CG = sp.csr_matrix((np.ones(np.count_nonzero(keep2)),
                        (csrc[keep2], cdst[keep2])), shape=(ncomp, ncomp))
    CG.sum_duplicates()
    indeg = np.asarray((CG > 0).sum(axis=0)).ravel()
    members = [[] for _ in range(ncomp)]
    for blk in range(nb):
        members[comp[blk]].append(blk)
    first = np.array([m[0] for m in members])
    heap = [(first[c], c) for c in range(ncomp) if indeg[c] == 0]
    heapq.heapify(heap)
    order = []
    CGb = (CG > 0).tocsr()
    while heap:
        _, c = heapq.heappop(heap)
        order.extend(members[c])
        for d in CGb.indices[CGb.indptr[c]:CGb.indptr[c + 1]]:
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(heap, (first[d], d))
    return TopologicalOrder(order=np.asarray(order, dtype=np.int64),
                            complete=complete,
                            cycle_blocks=cycle_blocks,
                            block_size=b)


# -- relaxation ---------------------------------------------------------


class RelaxationPlan:
    """Prebuilt data for one relaxation scheme on a fixed matrix.

    Schemes: ``jacobi``, ``fgs`` (forward Gauss-Seidel), ``f_then_all_fgs``
    (forward GS restricted to F-points, then over all points),
    ``ordered_block_gs`` (forward block GS in a topological block order),
    and ``f_exact`` (exact F-point solve; for two-level analysis).
    All are written as x <- x + M^{-1} (b - A x) for a scheme-specific M.
    """

    def __init__(self, A, scheme, cf=None, block_size=1, ordering=None,
                 omega=1.0):
        A = validate_csr(A)
        self.A = A
        self.scheme = scheme
        self.omega = omega
        n = A.shape[0]
        if scheme == "jacobi":
            d = A.diagonal()
            if np.any(d == 0):
                raise ValueError("jacobi relaxation requires nonzero diagonal")
            self._dinv = 1.0 / d
        elif scheme == "fgs":
            self._solver = self._triangular_solver(sp.tril(A, format="csr"))
        elif scheme == "f_then_all_fgs":
            if cf is None:
                raise ValueError("f_then_all_fgs requires a CF splitting")
            self._f = cf.f_points
            Aff = A[self._f][:, self._f]
            self._fsolver = self._triangular_solver(sp.tril(Aff, format="csr"))
            self._solver = self._triangular_solver(sp.tril(A, format="csr"))
        elif scheme == "f_exact":
            if cf is None:
                raise ValueError("f_exact requires a CF splitting")
            self._f = cf.f_points
            Aff = A[self._f][:, self._f].tocsc()
            self._flu = spla.splu(Aff)
        elif scheme == "ordered_block_gs":
            if ordering is None:
                ordering = topological_block_order(A, block_size)
            self.ordering = ordering
            b = ordering.block_size
            blocks = ordering.order
            perm = (blocks[:, None] * b + np.arange(b)).ravel()
            self._perm = perm
            self._iperm = np.argsort(perm)
            Ap = A[perm][:, perm].tocsr()
            coo = Ap.tocoo()
            keep = (coo.row // b) >= (coo.col // b)  # block lower triangle
            M = sp.csr_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])),
                              shape=Ap.shape)
            self._msolver = self._make_block_solver(M, b)
        else:
            raise ValueError(f"unknown relaxation scheme {scheme!r}")

    @staticmethod
    def _triangular_solver(L):
        L = L.tocsr()
        if np.any(L.diagonal() == 0):
            raise ValueError("Gauss-Seidel requires nonzero diagonal")

        def solve(r):
            return spla.spsolve_triangular(L, r, lower=True)

        return solve

    @staticmethod
    def _make_block_solver(M, b):
        if b == 1:
            if np.any(M.diagonal() == 0):
                raise ValueError("ordered GS requires nonzero diagonal")
            Mc = M.tocsr()
            return lambda r: spla.spsolve_triangular(Mc, r, lower=True)
        lu = spla.splu(M.tocsc(), permc_spec="NATURAL",
                       options={"SymmetricMode": False})
        return lu.solve

    def apply(self, b, x):
        """One sweep; returns the updated iterate (input not modified)."""
        A = self.A
        if self.scheme == "jacobi":
            return x + self.omega * self._dinv * (b - A @ x)
        if self.scheme == "fgs":
            return x + self._solver(b - A @ x)
        if self.scheme == "f_then_all_fgs":
            r = b - A @ x
            x = x.copy()
            x[self._f] += self._fsolver(r[self._f])
            return x + self._solver(b - A @ x)
        if self.scheme == "f_exact":
            r = b - A @ x
            x = x.copy()
            x[self._f] += self._flu.solve(r[self._f])
            return x
        # ordered_block_gs
        r = (b - A @ x)[self._perm]
        return x + self._msolver(r)[self._iperm]


def relax(A, b, x, scheme, cf=None, block_size=1, ordering=None, sweeps=1):
    """Stand-alone relaxation sweeps (plans are prebuilt inside cycles)."""
    plan = RelaxationPlan(A, scheme, cf=cf, block_size=block_size,
                          ordering=ordering)
    for _ in range(sweeps):
        x = plan.apply(b, x)
    return x


# -- hierarchy ----------------------------------------------------------


@dataclass
class AirParams:
    theta_c: float = 0.2  # coarsening strength tolerance
    theta_r: float = 0.3  # restriction neighborhood tolerance
    max_coarse: int = 40
    max_levels: int = 25
    relaxation: str = "f_then_all_fgs"
    block_size: int = 1  # relaxation block size on the finest level


@dataclass
class AirLevel:
    A: sp.csr_matrix
    R: Optional[sp.csr_matrix]
    P: Optional[sp.csr_matrix]
    cf: Optional[CFSplitting]
    plan: Optional[RelaxationPlan]


@dataclass
class AirHierarchy:
    levels: list
    coarse_lu: DenseLU
    params: AirParams
    lair_fallbacks: int = 0

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def grid_complexity(self):
        return sum(l.A.shape[0] for l in self.levels) / self.levels[0].A.shape[0]

    @property
    def operator_complexity(self):
        return sum(l.A.nnz for l in self.levels) / self.levels[0].A.nnz

    def as_preconditioner(self):
        """Single-V-cycle application suitable for Krylov preconditioning."""
        return lambda r: vcycle(self, r)


def build_hierarchy(A, params=None):
    """Set up the AIR hierarchy for ``A``.

    Coarsening stops at ``max_coarse`` rows (dense LU there).  If the CF
    splitting stagnates (all C or all F), the level is sent to the dense
    solver when small enough, otherwise setup fails with
    :class:`AirSetupError`.
    """
    params = params or AirParams()
    A = validate_csr(A)
    levels = []
    fallbacks = 0
    while (A.shape[0] > params.max_coarse and
           len(levels) < params.max_levels - 1):
        g = strength_graph(A, params.theta_c)
        cf = rs_coarsen(g)
        nc = cf.n_coarse
        if nc == A.shape[0] or nc == 0:
            if A.shape[0] <= 4 * params.max_coarse:
                break  # close enough: hand to the dense coarse solver
            raise AirSetupError(
                f"coarsening stagnated at n={A.shape[0]} (n_coarse={nc})")
        R = lair_restriction(A, cf, params.theta_r)
        fallbacks += R.fallbacks
        P = one_point_interpolation(A, cf, g)
        bsize = params.block_size if not levels else 1
        plan = RelaxationPlan(A, params.relaxation, cf=cf, block_size=bsize)
        levels.append(AirLevel(A=A, R=R, P=P, cf=cf, plan=plan))
        A = galerkin_coarse(R, A, P)
    levels.append(AirLevel(A=A, R=None, P=None, cf=None, plan=None))
    return AirHierarchy(levels=levels, coarse_lu=DenseLU(A.toarray()),
                        params=params, lair_fallbacks=fallbacks)


def vcycle(h: AirHierarchy, b, x=None, level=0):
    """One V(0,1) cycle: coarse-grid correction then post-relaxation."""
    lev = h.levels[level]
    if level == h.n_levels - 1:
        return h.coarse_lu.solve(b)
    if x is None:
        r = b
        x = np.zeros_like(b)
    else:
        r = b - lev.A @ x
    xc = vcycle(h, lev.R @ r, None, level + 1)
    x = x + lev.P @ xc
    return lev.plan.apply(b, x)
