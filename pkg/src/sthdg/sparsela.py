"""Sparse/dense linear algebra helpers shared by assembly and solvers.

Thin, contract-enforcing wrappers around numpy/scipy: CSR validation,
products, block-diagonal scaling, guarded dense LU, and Matrix Market
persistence with full-precision (17 significant digit) round-trip.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "SingularBlockError",
    "validate_csr",
    "spmv",
    "spgemm",
    "BlockDiagonalScaling",
    "block_diag_inverse_scale",
    "DenseLU",
    "dense_lu_solve",
    "write_matrix_market",
    "read_matrix_market",
]


class SingularBlockError(ValueError):
    """A diagonal block or dense factorization is numerically singular."""


def validate_csr(A):
    """Return ``A`` as canonical CSR (sorted indices, summed duplicates).

    Raises ValueError for non-2D or non-finite input.
    """
    A = sp.csr_matrix(A)
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    A.sum_duplicates()
    A.sort_indices()
    if len(A.data) and not np.all(np.isfinite(A.data)):
        raise ValueError("matrix contains non-finite entries")
    return A


def spmv(A, x):
    """Sparse matrix-vector product."""
    return A @ x


def spgemm(A, B, drop_tol=None):
    """Sparse matrix-matrix product, optionally dropping small entries.

    ``drop_tol`` is an absolute threshold; entries with magnitude <=
    drop_tol are removed after the product.  None keeps everything
    (exact Galerkin products).
    """
    C = sp.csr_matrix(A @ B)
    if drop_tol is not None and drop_tol > 0:
        C.data[np.abs(C.data) <= drop_tol] = 0.0
        C.eliminate_zeros()
    C.sum_duplicates()
    C.sort_indices()
    return C


class BlockDiagonalScaling:
    """Left scaling of a block matrix by its inverted diagonal blocks.

    For ``A`` with square blocks of size ``b``, stores ``Dinv`` (the
    block-diagonal inverse) and the scaled matrix ``Dinv @ A``, whose
    diagonal blocks are exact identities.
    """

    def __init__(self, A, b):
        A = validate_csr(A)
        n = A.shape[0]
        if A.shape[1] != n or n % b != 0:
            raise ValueError("matrix must be square with size divisible by b")
        nb = n // b
        dense = np.zeros((nb, b, b))
        Ad = A.tocsr()
        for k in range(nb):
            dense[k] = Ad[k * b:(k + 1) * b, k * b:(k + 1) * b].toarray()
        dets = np.abs(np.linalg.det(dense))
        scale = np.maximum(np.abs(dense).reshape(nb, -1).max(axis=1), 1e-300) ** b
        bad = np.nonzero(dets < 1e-14 * scale)[0]
        if len(bad):
            raise SingularBlockError(f"singular diagonal block(s) {bad.tolist()}")
        self.block_size = b
        self.block_inverses = np.linalg.inv(dense)
        self._Dinv = sp.bsr_matrix(
            (self.block_inverses, np.arange(nb), np.arange(nb + 1)),
            shape=(n, n)).tocsr()
        self.matrix = validate_csr(self._Dinv @ A)

    def apply(self, v):
        """Apply the block-diagonal inverse to a vector (scale a RHS)."""
        return self._Dinv @ v


def block_diag_inverse_scale(A, b):
    """Build a :class:`BlockDiagonalScaling` for ``A`` with block size ``b``."""
    return BlockDiagonalScaling(A, b)


class DenseLU:
    """Guarded dense LU factorization with reusable solves."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        with warnings.catch_warnings():
            # the pivot check below raises a clearer error than scipy's warning
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self._lu, self._piv = scipy.linalg.lu_factor(A)
        d = np.abs(np.diag(self._lu))
        scale = max(np.abs(A).max(), 1e-300)
        if d.size and d.min() < 1e-14 * scale:
            raise SingularBlockError(
                f"matrix is numerically singular (pivot {d.min():.3e}, scale {scale:.3e})")

    def solve(self, b):
        return scipy.linalg.lu_solve((self._lu, self._piv), b)


def dense_lu_solve(A, b):
    """Solve a dense system once, with the singularity guard of DenseLU."""
    return DenseLU(A).solve(b)


# -- Matrix Market persistence ------------------------------------------


def write_matrix_market(path, M, comment=""):
    """Write a sparse matrix (coordinate) or vector/array (array format).

    Values use the %.17g format so that doubles round-trip exactly.
    """
    with open(path, "w", newline="\n") as f:
        if sp.issparse(M):
            A = validate_csr(M).tocoo()
            f.write("%%MatrixMarket matrix coordinate real general\n")
            if comment:
                f.write(f"%{comment}\n")
            f.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                f.write("%d %d %.17g\n" % (i + 1, j + 1, v))
        else:
            arr = np.atleast_2d(np.asarray(M, dtype=float))
            if arr.shape[0] == 1 and np.asarray(M).ndim == 1:
                arr = arr.T
            f.write("%%MatrixMarket matrix array real general\n")
            if comment:
                f.write(f"%{comment}\n")
            f.write(f"{arr.shape[0]} {arr.shape[1]}\n")
            for j in range(arr.shape[1]):  # column-major per the format
                for i in range(arr.shape[0]):
                    f.write("%.17g\n" % arr[i, j])


def read_matrix_market(path):
    """Read files produced by :func:`write_matrix_market`.

    Returns a CSR matrix for coordinate files; a 1-D array for single
    column array files, else a 2-D array.
    """
    with open(path, "r") as f:
        header = f.readline().split()
        if header[:3] != ["%%MatrixMarket", "matrix", "coordinate"] and \
           header[:3] != ["%%MatrixMarket", "matrix", "array"]:
            raise ValueError("unsupported MatrixMarket header")
        kind = header[2]
        line = f.readline()
        while line.startswith("%"):
            line = f.readline()
        dims = line.split()
        if kind == "coordinate":
            nr, nc, nnz = int(dims[0]), int(dims[1]), int(dims[2])
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            vals = np.empty(nnz)
            for k in range(nnz):
                i, j, v = f.readline().split()
                rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
            return validate_csr(sp.coo_matrix((vals, (rows, cols)), shape=(nr, nc)))
        nr, nc = int(dims[0]), int(dims[1])
        vals = np.array([float(f.readline()) for _ in range(nr * nc)])
        arr = vals.reshape(nc, nr).T
        return arr[:, 0] if nc == 1 else arr
