"""The nonsymmetric saddle point operator and its shifted inner product.

For an invertible A and SPD weight W,

    M        = [[A^T W A,        A^T    ],
                [   -A,           0     ]]

    M(gamma) = J (M - gamma I) = [[A^T W A - gamma I, A^T    ],
                                  [        A,         gamma I]]

with J = diag(I, -I).  M(gamma) is symmetric and M is self-adjoint in the
bilinear form it defines.  Solving ``M z = b`` with ``b = [A^T W c + d; -c]``
gives ``z = [x; y]`` with ``A x = c`` and ``A^T y = d``, so one solve yields
both the forward and the adjoint solution.

Saddle vectors are flat arrays of length 2n: top half first.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionError
from .linalg import CholeskyFactor, SparseMatrix, cholesky_spd, spmv, spmv_t

__all__ = [
    "SaddleSystem",
    "AmplitudeResult",
    "split",
    "join",
    "apply_m",
    "apply_m_t",
    "apply_m_gamma",
    "g_inner",
    "build_rhs",
    "extract_amplitude",
    "assemble_m",
    "assemble_m_gamma",
]

DENSE_ASSEMBLY_LIMIT = 64


def split(v, n):
    """Return the (top, bottom) halves of a saddle vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != 2 * n:
        raise DimensionError(f"expected saddle vector of length {2 * n}, got shape {v.shape}")
    return v[:n], v[n:]


def join(top, bottom):
    top = np.asarray(top, dtype=np.float64)
    bottom = np.asarray(bottom, dtype=np.float64)
    if top.shape != bottom.shape or top.ndim != 1:
        raise DimensionError("saddle halves must be 1-d of equal length")
    return np.concatenate([top, bottom])


@dataclass(frozen=True)
class SaddleSystem:
    """A, the SPD weight (scalar w or matrix W) and the shift gamma.

    Parameters
    ----------
    A : SparseMatrix
        Square, assumed invertible.
    weight : float or SparseMatrix
    gamma : float
        Must be positive; 0 is allowed only with ``allow_zero_gamma=True``
        (degenerate shift, used in tests).
    """

    A: SparseMatrix
    weight: object
    gamma: float
    allow_zero_gamma: bool = field(default=False, repr=False)
    factor: CholeskyFactor = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.A.nrows != self.A.ncols:
            raise DimensionError(f"A must be square, got {self.A.shape}")
        g = float(self.gamma)
        if not (g > 0.0 or (self.allow_zero_gamma and g == 0.0)):
            raise ValueError(f"gamma must be positive, got {g}")
        object.__setattr__(self, "gamma", g)
        # validates SPD-ness of the weight
        object.__setattr__(self, "factor", cholesky_spd(self.weight, self.A.nrows))

    @property
    def n(self):
        return self.A.nrows

    @property
    def dim(self):
        return 2 * self.A.nrows

    @property
    def scalar_weight(self):
        return self.factor.is_scalar

    def apply_weight(self, v):
        if self.factor.is_scalar:
            return float(self.weight) * v
        return spmv(self.weight, v)

    # protocol used by nspcg_solve
    def matvec(self, v):
        return apply_m(self, v)

    def gamma_matvec(self, v):
        return apply_m_gamma(self, v)

    def as_operator(self):
        """M as a scipy `LinearOperator` (matvec and rmatvec)."""
        return LinearOperator(
            (self.dim, self.dim),
            matvec=lambda v: apply_m(self, np.ravel(v)),
            rmatvec=lambda v: apply_m_t(self, np.ravel(v)),
            dtype=np.float64,
        )


def apply_m(sys, v):
    """``M v`` computed matrix-free."""
    t, b = split(v, sys.n)
    At = spmv(sys.A, t)
    top = spmv_t(sys.A, sys.apply_weight(At) + b)
    return np.concatenate([top, -At])


def apply_m_t(sys, v):
    """``M^T v = [A^T W A t - A^T b; A t]``."""
    t, b = split(v, sys.n)
    At = spmv(sys.A, t)
    top = spmv_t(sys.A, sys.apply_weight(At) - b)
    return np.concatenate([top, At])


def apply_m_gamma(sys, v):
    """``M(gamma) v``."""
    t, b = split(v, sys.n)
    At = spmv(sys.A, t)
    top = spmv_t(sys.A, sys.apply_weight(At) + b) - sys.gamma * t
    return np.concatenate([top, At + sys.gamma * b])


def g_inner(sys, u, v):
    """The M(gamma) bilinear form ``v^T M(gamma) u``.

    The G = M(gamma) M form is ``g_inner(sys, apply_m(sys, u), v)``.
    """
    split(v, sys.n)
    return float(np.dot(v, apply_m_gamma(sys, u)))


def build_rhs(sys, c, d):
    """Saddle right-hand side ``[A^T W c + d; -c]`` for field c and antenna d."""
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != (sys.n,) or d.shape != (sys.n,):
        raise DimensionError(f"c and d must have length {sys.n}")
    return np.concatenate([spmv_t(sys.A, sys.apply_weight(c)) + d, -c])


def recover_fields(sys, b):
    """Inverse of `build_rhs`: the (c, d) that produce saddle rhs `b`."""
    top, bottom = split(b, sys.n)
    c = -bottom
    d = top - spmv_t(sys.A, sys.apply_weight(c))
    return c, d


@dataclass(frozen=True)
class AmplitudeResult:
    amplitude: float
    forward_residual: float
    adjoint_residual: float
    consistency_gap: float


def extract_amplitude(sys, z, c, d):
    """Scattering amplitude ``d^T x`` of ``z = [x; y]`` with residual checks.

    ``consistency_gap = |d^T x - c^T y|`` vanishes at the exact solution.
    """
    x, y = split(z, sys.n)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != (sys.n,) or d.shape != (sys.n,):
        raise DimensionError(f"c and d must have length {sys.n}")
    amp = float(d @ x)
    return AmplitudeResult(
        amplitude=amp,
        forward_residual=float(np.linalg.norm(c - spmv(sys.A, x))),
        adjoint_residual=float(np.linalg.norm(d - spmv_t(sys.A, y))),
        consistency_gap=abs(amp - float(c @ y)),
    )


def _weight_dense(sys):
    if sys.factor.is_scalar:
        return float(sys.weight) * np.eye(sys.n)
    return sys.weight.toarray()


def _check_small(sys):
    if sys.n > DENSE_ASSEMBLY_LIMIT:
        raise ValueError(f"dense assembly is limited to n <= {DENSE_ASSEMBLY_LIMIT}")


def assemble_m(sys):
    """Dense 2n x 2n M; test oracle only."""
    _check_small(sys)
    A = sys.A.toarray()
    n = sys.n
    return np.block([[A.T @ _weight_dense(sys) @ A, A.T], [-A, np.zeros((n, n))]])


def assemble_m_gamma(sys):
    """Dense M(gamma); test oracle only."""
    _check_small(sys)
    A = sys.A.toarray()
    n = sys.n
    eye = np.eye(n)
    return np.block(
        [[A.T @ _weight_dense(sys) @ A - sys.gamma * eye, A.T], [A, sys.gamma * eye]]
    )
