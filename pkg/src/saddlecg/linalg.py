"""Sparse storage and the small dense kernels used inside the iterations.

`SparseMatrix` is an immutable, canonical CSR matrix.  Products are
delegated to scipy's compiled CSR kernels, which sum each row in stored
index order, so results are bit-for-bit reproducible.
"""

from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionError, NotSPDError, RankError, SingularError

__all__ = [
    "SparseMatrix",
    "spmv",
    "spmv_t",
    "dense_solve",
    "dense_lstsq",
    "CholeskyFactor",
    "cholesky_spd",
    "as_operator",
]


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class SparseMatrix:
    """Real matrix in canonical compressed sparse row form.

    Column indices are strictly increasing within every row; duplicates
    given to the constructors are summed.  Instances are immutable.

    Parameters
    ----------
    nrows, ncols : int
    row_ptr : array_like of int, length ``nrows + 1``
    col_idx : array_like of int
    values : array_like of float
    """

    __slots__ = ("nrows", "ncols", "row_ptr", "col_idx", "values", "_csr")

    def __init__(self, nrows, ncols, row_ptr, col_idx, values):
        nrows, ncols = int(nrows), int(ncols)
        if nrows < 0 or ncols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        row_ptr = np.asarray(row_ptr, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if row_ptr.shape != (nrows + 1,):
            raise ValueError("row_ptr must have length nrows + 1")
        if col_idx.shape != values.shape or col_idx.ndim != 1:
            raise ValueError("col_idx and values must be 1-d of equal length")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values):
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= ncols):
            raise ValueError("column index out of range")
        # strictly increasing columns inside each row
        if len(col_idx) > 1:
            step = np.diff(col_idx)
            row_start = np.zeros(len(col_idx), dtype=bool)
            row_start[row_ptr[:-1][row_ptr[:-1] < len(col_idx)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within rows")
        object.__setattr__(self, "nrows", nrows)
        object.__setattr__(self, "ncols", ncols)
        object.__setattr__(self, "row_ptr", _readonly(row_ptr, np.int64))
        object.__setattr__(self, "col_idx", _readonly(col_idx, np.int64))
        object.__setattr__(self, "values", _readonly(values, np.float64))
        csr = sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=(nrows, ncols))
        csr.has_sorted_indices = True
        object.__setattr__(self, "_csr", csr)

    def __setattr__(self, name, value):
        raise AttributeError("SparseMatrix is immutable")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, vals, shape):
        """Build from coordinate triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        nrows, ncols = shape
        if len(rows) and (rows.min() < 0 or rows.max() >= nrows):
            raise ValueError("row index out of range")
        if len(cols) and (cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("column index out of range")
        return cls.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=shape))

    @classmethod
    def from_scipy(cls, m):
        csr = sp.csr_matrix(m, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, a):
        """Build from a dense array, storing only its nonzero entries."""
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(sp.identity(n, format="csr"))

    @classmethod
    def diag(cls, d):
        d = np.asarray(d, dtype=np.float64)
        return cls.from_scipy(sp.diags(d, format="csr"))

    # -- views --------------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return len(self.values)

    def to_scipy(self):
        """Return a scipy CSR copy."""
        return self._csr.copy()

    def toarray(self):
        return self._csr.toarray()

    def transpose(self):
        """Explicit transpose (for oracles; solvers use `spmv_t`)."""
        return SparseMatrix.from_scipy(self._csr.T)

    def max_abs(self):
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def frobenius(self):
        return float(np.sqrt(np.dot(self.values, self.values)))

    def __matmul__(self, x):
        return spmv(self, x)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def _vector(x, length, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != length:
        raise DimensionError(f"{what}: expected vector of length {length}, got shape {x.shape}")
    return x


def spmv(A, x):
    """Return ``A @ x``."""
    x = _vector(x, A.ncols, "spmv")
    return A._csr @ x


def spmv_t(A, x):
    """Return ``A.T @ x`` without forming the transpose."""
    x = _vector(x, A.nrows, "spmv_t")
    # csr.T is a CSC view over the same arrays
    return A._csr.T @ x


def dense_solve(T, rhs):
    """Solve the square system ``T c = rhs`` by LU with partial pivoting.

    Raises
    ------
    SingularError
        If a pivot falls below ``1e-14 * max|T|``.
    """
    T = np.asarray(T, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionError(f"dense_solve needs a square matrix, got {T.shape}")
    if rhs.shape[0] != T.shape[0]:
        raise DimensionError("dense_solve: rhs length does not match matrix")
    scale = np.abs(T).max() if T.size else 0.0
    if scale == 0.0:
        raise SingularError("dense_solve: zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(T, check_finite=False)
    if np.abs(np.diag(lu)).min() < 1e-14 * scale:
        raise SingularError("dense_solve: numerically singular pivot")
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def dense_lstsq(T, rhs):
    """Minimize ``||rhs - T c||_2`` for a tall matrix of full column rank.

    Uses a Householder QR of `T`.

    Raises
    ------
    RankError
        If a diagonal entry of R is below ``1e-14 * max|R|``.
    """
    T = np.asarray(T, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] < T.shape[1]:
        raise DimensionError(f"dense_lstsq needs a tall matrix, got {T.shape}")
    if rhs.shape[0] != T.shape[0]:
        raise DimensionError("dense_lstsq: rhs length does not match matrix")
    if T.shape[1] == 0:
        return np.zeros(0)
    Q, R = np.linalg.qr(T)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-14 * max(np.abs(R).max(), np.finfo(float).tiny):
        raise RankError("dense_lstsq: matrix is rank deficient")
    return scipy.linalg.solve_triangular(R, Q.T @ rhs, check_finite=False)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor G of an SPD weight, ``W = G G^T``.

    For a scalar weight ``W = w I`` only ``scale = sqrt(w)`` is kept.
    """

    n: int
    scale: float = None
    lower: SparseMatrix = None

    @property
    def is_scalar(self):
        return self.lower is None

    def matvec(self, v):
        """G @ v"""
        if self.is_scalar:
            return self.scale * _vector(v, self.n, "CholeskyFactor")
        return spmv(self.lower, v)

    def rmatvec(self, v):
        """G.T @ v"""
        if self.is_scalar:
            return self.scale * _vector(v, self.n, "CholeskyFactor")
        return spmv_t(self.lower, v)

    def weight_matvec(self, v):
        """W @ v = G (G^T v)"""
        return self.matvec(self.rmatvec(v))

    def toarray(self):
        if self.is_scalar:
            return self.scale * np.eye(self.n)
        return self.lower.toarray()


def cholesky_spd(W, n=None):
    """Cholesky factor of an SPD weight given as a scalar or a `SparseMatrix`.

    Parameters
    ----------
    W : float or SparseMatrix
        A scalar stands for ``W * I``; `n` is then required.
    n : int, optional

    Raises
    ------
    NotSPDError
        On a nonpositive pivot or a nonsymmetric matrix.
    """
    if np.isscalar(W):
        if n is None:
            raise ValueError("dimension n is required for a scalar weight")
        w = float(W)
        if not w > 0.0:
            raise NotSPDError(f"scalar weight must be positive, got {w}")
        return CholeskyFactor(n=int(n), scale=float(np.sqrt(w)))
    if not isinstance(W, SparseMatrix):
        raise TypeError("W must be a scalar or a SparseMatrix")
    if W.nrows != W.ncols:
        raise DimensionError("weight matrix must be square")
    if n is not None and n != W.nrows:
        raise DimensionError("weight matrix dimension does not match n")
    dense = W.toarray()
    if not np.allclose(dense, dense.T, rtol=0.0, atol=1e-12 * max(W.max_abs(), 1.0)):
        raise NotSPDError("weight matrix is not symmetric")
    try:
        G = scipy.linalg.cholesky(dense, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"weight matrix is not positive definite: {exc}") from None
    return CholeskyFactor(n=W.nrows, lower=SparseMatrix.from_dense(np.tril(G)))


def as_operator(A):
    """Wrap a `SparseMatrix`, scipy sparse matrix, dense array or
    `LinearOperator` as a scipy `LinearOperator` with a working rmatvec."""
    if isinstance(A, SparseMatrix):
        return LinearOperator(
            A.shape,
            matvec=lambda v: spmv(A, np.ravel(v)),
            rmatvec=lambda v: spmv_t(A, np.ravel(v)),
            dtype=np.float64,
        )
    if isinstance(A, LinearOperator):
        return A
    return scipy.sparse.linalg.aslinearoperator(A)
