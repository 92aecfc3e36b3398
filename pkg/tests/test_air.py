import numpy as np
import pytest
import scipy.sparse as sp

from sthdg.air import (AirParams, AirSetupError, C_POINT, CFSplitting,
                       F_POINT, RelaxationPlan, build_hierarchy,
                       galerkin_coarse, ideal_restriction_dense,
                       lair_restriction, one_point_interpolation, relax,
                       rs_coarsen, strength_graph, topological_block_order,
                       vcycle)


def splitting(labels):
    labels = np.asarray(labels, dtype=np.int8)
    ci = np.full(len(labels), -1, dtype=np.int64)
    ci[labels == C_POINT] = np.arange(int((labels == C_POINT).sum()))
    return CFSplitting(labels=labels, coarse_index=ci)


def upwind_chain(n, eps=0.0):
    d = np.ones(n)
    lo = -np.ones(n - 1)
    A = sp.diags([d, lo], [0, -1]).tocsr()
    if eps:
        A = A + sp.diags([eps * np.ones(n - 1)], [1]).tocsr()
    return A.tocsr()


def test_strength_graph_thresholds_by_row_maximum():
    A = sp.csr_matrix(np.array([[2.0, -1.0, 0.1],
                                [0.0, 1.0, 0.0],
                                [-0.5, 0.01, 3.0]]))
    g = strength_graph(A, theta=0.25)
    S = g.csr.toarray()
    assert S[0, 1] != 0 and S[0, 2] == 0  # 0.1 < 0.25 * 1.0
    assert S[1].sum() == 0                # no off-diagonal entries at all
    assert S[2, 0] != 0 and S[2, 1] == 0


def test_rs_coarsen_covers_every_point():
    A = upwind_chain(20)
    cf = rs_coarsen(strength_graph(A, 0.2))
    assert set(np.unique(cf.labels)) <= {C_POINT, F_POINT}
    assert cf.n_coarse + len(cf.f_points) == 20
    # every F-point with strong dependencies sees at least one C-point
    S = strength_graph(A, 0.2).csr
    for i in cf.f_points:
        deps = S.indices[S.indptr[i]:S.indptr[i + 1]]
        if len(deps):
            assert np.any(cf.labels[deps] == C_POINT)


def test_rs_coarsen_isolated_points_become_f():
    # diagonal matrix: relaxation alone solves it, nothing to coarsen
    A = sp.identity(12, format="csr")
    cf = rs_coarsen(strength_graph(A, 0.2))
    assert cf.n_coarse == 0


def test_lair_restriction_small_oracle():
    # C = {1}: w solves A_ff^T w = -a_cf^T, here 2 w = -(-1) => w = 0.5
    A = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    cf = splitting([F_POINT, C_POINT])
    R = lair_restriction(A, cf, theta=0.0)
    assert np.allclose(R.toarray(), [[0.5, 1.0]])
    P = sp.csr_matrix(np.array([[0.0], [1.0]]))
    assert np.allclose(galerkin_coarse(R, A, P).toarray(), [[1.5]])


def test_lair_zeroes_strong_f_columns_of_ra():
    rng = np.random.default_rng(8)
    n = 30
    A = sp.csr_matrix(rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.2)
                      + 4 * np.eye(n))
    cf = rs_coarsen(strength_graph(A, 0.2))
    R = lair_restriction(A, cf, theta=0.0)  # theta=0: full F-neighborhoods
    RA = (R @ A).toarray()
    for r, i in enumerate(cf.c_points):
        nbrs = A.indices[A.indptr[i]:A.indptr[i + 1]]
        f_nbrs = nbrs[cf.labels[nbrs] == F_POINT]
        assert np.abs(RA[r, f_nbrs]).max() < 1e-10 if len(f_nbrs) else True


def test_ideal_restriction_zeroes_c_error():
    rng = np.random.default_rng(9)
    n = 24
    A = rng.standard_normal((n, n)) + 6 * np.eye(n)
    labels = np.where(rng.random(n) < 0.4, C_POINT, F_POINT)
    labels[0] = C_POINT
    R = ideal_restriction_dense(A, labels)
    cpts = np.nonzero(labels == C_POINT)[0]
    # R A has zero columns at all F-points: restriction of any residual
    # determines the C-point error exactly
    RA = R @ A
    fpts = np.nonzero(labels == F_POINT)[0]
    assert np.abs(RA[:, fpts]).max() < 1e-11
    assert np.allclose(RA[:, cpts], A[np.ix_(cpts, cpts)]
                       - A[np.ix_(cpts, fpts)] @ np.linalg.solve(
                           A[np.ix_(fpts, fpts)], A[np.ix_(fpts, cpts)]))


def test_one_point_interpolation_strongest_then_lowest_index():
    S = sp.csr_matrix(np.array([[0.0, 3.0, 3.0, 1.0],
                                [3.0, 0.0, 0.0, 0.0],
                                [3.0, 0.0, 0.0, 0.0],
                                [1.0, 0.0, 0.0, 0.0]]))
    g = strength_graph(S, 0.0)
    cf = splitting([F_POINT, C_POINT, C_POINT, C_POINT])
    P = one_point_interpolation(S, cf, g).toarray()
    assert P[0, cf.coarse_index[1]] == 1.0 and P[0].sum() == 1.0
    for i in (1, 2, 3):
        assert P[i, cf.coarse_index[i]] == 1.0


def test_topological_order_recovers_permuted_triangular():
    rng = np.random.default_rng(10)
    n = 15
    L = np.tril(rng.standard_normal((n, n)), -1) * (rng.random((n, n)) < 0.4)
    L += np.diag(rng.random(n) + 1)
    perm = rng.permutation(n)
    A = sp.csr_matrix(L[np.ix_(perm, perm)])
    order = topological_block_order(A, block_size=1)
    assert order.complete and len(order.cycle_blocks) == 0
    B = A.toarray()[np.ix_(order.order, order.order)]
    assert np.abs(np.triu(B, 1)).max() == 0.0


def test_topological_order_reports_cycles():
    A = sp.csr_matrix(np.array([[1.0, 0.5, 0.0],
                                [0.5, 1.0, 0.0],
                                [1.0, 0.0, 1.0]]))
    order = topological_block_order(A, block_size=1)
    assert not order.complete
    assert list(order.cycle_blocks) == [0, 1]


def test_ordered_block_gs_exact_on_triangular_blocks():
    rng = np.random.default_rng(12)
    nb, b = 6, 2
    n = nb * b
    dense = np.kron(np.tril(np.ones((nb, nb))), np.ones((b, b)))
    A = dense * rng.standard_normal((n, n))
    A += np.eye(n) * 5
    perm = rng.permutation(nb)
    idx = (perm[:, None] * b + np.arange(b)).ravel()
    A = sp.csr_matrix(A[np.ix_(idx, idx)])
    rhs = rng.standard_normal(n)
    x = relax(A, rhs, np.zeros(n), scheme="ordered_block_gs", block_size=b)
    assert np.linalg.norm(rhs - A @ x) < 1e-12 * np.linalg.norm(rhs)


def test_f_then_all_sweep_reduces_residual():
    A = upwind_chain(40, eps=0.05)
    cf = rs_coarsen(strength_graph(A, 0.2))
    rng = np.random.default_rng(13)
    b = rng.standard_normal(40)
    x = relax(A, b, np.zeros(40), scheme="f_then_all_fgs", cf=cf)
    assert np.linalg.norm(b - A @ x) < 0.5 * np.linalg.norm(b)


def test_hierarchy_on_chain_is_exact_for_triangular():
    n = 3000
    A = upwind_chain(n)
    h = build_hierarchy(A, AirParams())
    assert h.n_levels > 3
    assert h.levels[-1].A.shape[0] <= 4 * AirParams().max_coarse
    assert 1.0 < h.grid_complexity < 3.0
    assert 1.0 < h.operator_complexity < 4.0
    rng = np.random.default_rng(14)
    b = rng.standard_normal(n)
    x = vcycle(h, b)
    assert np.linalg.norm(b - A @ x) < 1e-12 * np.linalg.norm(b)


def test_hierarchy_stagnation_raises_when_too_big_for_dense():
    A = sp.identity(500, format="csr")  # nothing to coarsen, too big for LU
    with pytest.raises(AirSetupError):
        build_hierarchy(A, AirParams(max_coarse=40))


def test_hierarchy_small_stagnation_falls_back_to_dense():
    A = sp.identity(100, format="csr")
    h = build_hierarchy(A, AirParams(max_coarse=40))
    assert h.n_levels == 1
    b = np.arange(100, dtype=float)
    assert np.allclose(vcycle(h, b), b)


def test_vcycle_preconditioner_callable():
    A = upwind_chain(500, eps=0.1)
    h = build_hierarchy(A, AirParams())
    M = h.as_preconditioner()
    rng = np.random.default_rng(15)
    b = rng.standard_normal(500)
    y = M(b)
    assert np.linalg.norm(b - A @ y) < np.linalg.norm(b)


def test_jacobi_relaxation_converges_on_diagonally_dominant():
    rng = np.random.default_rng(16)
    n = 25
    A = sp.csr_matrix(rng.random((n, n)) * 0.02 + np.eye(n))
    b = rng.standard_normal(n)
    x = np.zeros(n)
    plan = RelaxationPlan(A, "jacobi")
    for _ in range(60):
        x = plan.apply(b, x)
    assert np.linalg.norm(b - A @ x) < 1e-10 * np.linalg.norm(b)
