"""Block preconditioner for the saddle operator built from a QR of G^T A.

With W = G G^T and G^T A = Q R, the saddle operator factors as M = L U.
Replacing Q, R by an incomplete factorization gives the two-sided
preconditioner

    L~^{-1} = [[R^{-T},       0     ],      U~^{-1} = [[R^{-1}, -R^{-1}],
               [R^{-T},   Q^T G^T   ]]                 [  0,     G Q   ]]

(Q stands in for Q^{-T}, exact when Q is orthogonal), and

    L~^{-1} M U~^{-1} = [[C^T C,           -C^T C + C^T Q        ],
                         [C^T C - Q^T C,   -C^T C + C^T Q + Q^T C]]

with C = G^T A R^{-1}.  For an exact QR, C = Q and the product is I.
"""

from dataclasses import dataclass
import logging

import numpy as np
from scipy.sparse.linalg import LinearOperator, spsolve_triangular

from .errors import DimensionError, SingularError
from .linalg import CholeskyFactor, SparseMatrix, cholesky_spd, spmv, spmv_t
from .nspcg import NspcgConfig, nspcg_solve, saddle_monitor
from .saddle import apply_m, apply_m_t, build_rhs, split
from .spectral import estimate_lambda_min_spd

__all__ = [
    "cholesky_spd",
    "CholeskyFactor",
    "QrFactors",
    "incomplete_qr",
    "SaddlePreconditioner",
    "build_preconditioner",
    "apply_l_inv",
    "apply_l_inv_t",
    "apply_u_inv",
    "apply_u_inv_t",
    "PreconditionedSaddle",
    "preconditioned_operator",
    "preconditioned_nspcg",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QrFactors:
    """Q~ and upper-triangular R~ with ``B ~= Q~ R~``.

    Attributes
    ----------
    fit_residual : float
        ``max |B - Q~ R~|``.
    orthogonality_defect : float
        ``max |Q~^T Q~ - I|``.
    """

    Q: SparseMatrix
    R: SparseMatrix
    droptol: float
    exact: bool
    fit_residual: float
    orthogonality_defect: float


def _sign_fix(Q, R):
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def incomplete_qr(B, droptol=0.0):
    """QR factorization of a square sparse matrix with threshold dropping.

    ``droptol == 0`` gives an exact Householder QR (R with positive
    diagonal).  Otherwise column j is orthogonalized against the previous
    Q columns in two classical Gram-Schmidt passes; coefficients below
    ``droptol * ||b_j||`` are dropped from R (and not subtracted), entries of
    the normalized Q column below `droptol` are dropped and the column is
    renormalized.

    Raises
    ------
    SingularError
        If a column vanishes (R~ would be singular).
    """
    if B.nrows != B.ncols:
        raise DimensionError("incomplete_qr needs a square matrix")
    if droptol < 0:
        raise ValueError("droptol must be nonnegative")
    dense = B.toarray()
    n = B.nrows
    scale = max(B.max_abs(), np.finfo(float).tiny)
    if droptol == 0.0:
        Q, R = _sign_fix(*np.linalg.qr(dense))
        if np.abs(np.diag(R)).min() <= 1e-14 * scale:
            raise SingularError("matrix is numerically singular")
        R = np.triu(R)
    else:
        Q = np.zeros((n, n))
        R = np.zeros((n, n))
        for j in range(n):
            col = dense[:, j]
            cnorm = np.linalg.norm(col)
            w = col.copy()
            if j > 0:
                Qj = Q[:, :j]
                coef = np.zeros(j)
                for _ in range(2):
                    h = Qj.T @ w
                    h[np.abs(h) < droptol * cnorm] = 0.0
                    w -= Qj @ h
                    coef += h
                R[:j, j] = coef
            nw = np.linalg.norm(w)
            if nw <= 1e-14 * max(cnorm, scale):
                raise SingularError(f"column {j} vanished during incomplete QR")
            q = w / nw
            q[np.abs(q) < droptol] = 0.0
            nq = np.linalg.norm(q)
            if nq == 0.0:
                raise SingularError(f"column {j} vanished after dropping")
            Q[:, j] = q / nq
            R[j, j] = nw * nq
    fit = float(np.abs(dense - Q @ R).max())
    defect = float(np.abs(Q.T @ Q - np.eye(n)).max())
    return QrFactors(
        Q=SparseMatrix.from_dense(Q),
        R=SparseMatrix.from_dense(R),
        droptol=float(droptol),
        exact=droptol == 0.0,
        fit_residual=fit,
        orthogonality_defect=defect,
    )


@dataclass(frozen=True)
class SaddlePreconditioner:
    G: CholeskyFactor
    qr: QrFactors

    @property
    def n(self):
        return self.G.n

    def r_solve(self, v):
        """R~^{-1} v"""
        return spsolve_triangular(self.qr.R.to_scipy(), v, lower=False)

    def rt_solve(self, v):
        """R~^{-T} v"""
        return spsolve_triangular(self.qr.R.to_scipy().T.tocsr(), v, lower=True)


def build_preconditioner(sys, droptol=0.0):
    """Factor ``G^T A`` for the saddle system `sys` (droptol 0: exact QR)."""
    G = sys.factor
    if G.is_scalar:
        B = SparseMatrix.from_scipy(G.scale * sys.A.to_scipy())
    else:
        B = SparseMatrix.from_dense(G.lower.toarray().T @ sys.A.toarray())
    qr = incomplete_qr(B, droptol)
    diag = np.abs(qr.R.to_scipy().diagonal())
    if diag.min() <= 1e-14 * max(diag.max(), np.finfo(float).tiny):
        raise SingularError("R~ is singular")
    if not qr.exact:
        log.info("incomplete QR: fit residual %.3e, orthogonality defect %.3e",
                 qr.fit_residual, qr.orthogonality_defect)
    return SaddlePreconditioner(G=G, qr=qr)


def apply_l_inv(P, v):
    """``L~^{-1} v = [R^{-T} t; R^{-T} t + Q^T G^T b]``."""
    t, b = split(v, P.n)
    top = P.rt_solve(t)
    return np.concatenate([top, top + spmv_t(P.qr.Q, P.G.rmatvec(b))])


def apply_l_inv_t(P, v):
    """``L~^{-T} v = [R^{-1}(t + b); G Q b]``."""
    t, b = split(v, P.n)
    return np.concatenate([P.r_solve(t + b), P.G.matvec(spmv(P.qr.Q, b))])


def apply_u_inv(P, v):
    """``U~^{-1} v = [R^{-1}(t - b); G Q b]``."""
    t, b = split(v, P.n)
    return np.concatenate([P.r_solve(t - b), P.G.matvec(spmv(P.qr.Q, b))])


def apply_u_inv_t(P, v):
    """``U~^{-T} v = [R^{-T} t; -R^{-T} t + Q^T G^T b]``."""
    t, b = split(v, P.n)
    top = P.rt_solve(t)
    return np.concatenate([top, -top + spmv_t(P.qr.Q, P.G.rmatvec(b))])


class PreconditionedSaddle(LinearOperator):
    """``v -> L~^{-1} M U~^{-1} v`` as a linear operator.

    Also provides ``gamma_matvec`` for `nspcg_solve`: the shifted form
    ``J (P - gamma I)`` of the preconditioned operator P.  P is again a
    saddle matrix, now with a nonzero (2,2) block close to I, so this
    form is generally indefinite.
    """

    def __init__(self, sys, precond, gamma=0.5):
        if sys.n != precond.n:
            raise DimensionError("system and preconditioner sizes differ")
        self.sys = sys
        self.precond = precond
        self.gamma = float(gamma)
        super().__init__(dtype=np.float64, shape=(sys.dim, sys.dim))

    @property
    def dim(self):
        return self.shape[0]

    def _matvec(self, v):
        v = np.ravel(v)
        return apply_l_inv(self.precond, apply_m(self.sys, apply_u_inv(self.precond, v)))

    def _rmatvec(self, v):
        v = np.ravel(v)
        return apply_u_inv_t(self.precond, apply_m_t(self.sys, apply_l_inv_t(self.precond, v)))

    def gamma_matvec(self, v):
        out = self._matvec(v) - self.gamma * v
        out[self.sys.n:] *= -1.0
        return out

    def leading_block_matvec(self, v):
        """(1,1) block ``C^T C`` of the preconditioned operator."""
        z = np.concatenate([v, np.zeros_like(v)])
        return self._matvec(z)[: self.sys.n]


def preconditioned_operator(sys, precond, gamma=None):
    """The operator ``L~^{-1} M U~^{-1}``.

    If `gamma` is None it is set to half the smallest eigenvalue estimate
    of the SPD block ``C^T C`` (1/2 for an exact QR).
    """
    op = PreconditionedSaddle(sys, precond)
    if gamma is None:
        lam = estimate_lambda_min_spd(op.leading_block_matvec, sys.n)
        gamma = 0.5 * lam
    op.gamma = float(gamma)
    return op


def preconditioned_nspcg(sys, precond, c, d, config=None, gamma=None):
    """Solve the saddle system for fields (c, d) through the preconditioner.

    Runs NspCG on ``(L~^{-1} M U~^{-1}) z^ = L~^{-1} b`` and maps back with
    ``z = U~^{-1} z^``.  The shifted form of the preconditioned operator is
    indefinite, so the positivity check is switched off.

    Returns
    -------
    SolveResult
        ``solution`` is the recovered z; the history tracks the
        preconditioned residual together with the forward/adjoint residuals
        and amplitude of the recovered iterates.
    """
    cfg = NspcgConfig() if config is None else config
    if cfg.indefiniteness_check:
        cfg = NspcgConfig(tol=cfg.tol, maxit=cfg.maxit,
                          record_residual_vectors=cfg.record_residual_vectors,
                          indefiniteness_check=False, beta_formula=cfg.beta_formula)
    op = preconditioned_operator(sys, precond, gamma)
    b = build_rhs(sys, c, d)
    bhat = apply_l_inv(precond, b)
    base = saddle_monitor(sys, np.asarray(c, float), np.asarray(d, float))
    result = nspcg_solve(op, bhat, config=cfg, monitor=lambda zh: base(apply_u_inv(precond, zh)))
    zhat = result.solution
    result.solution = apply_u_inv(precond, zhat)
    result.info.update(
        gamma=op.gamma,
        zhat=zhat,
        fit_residual=precond.qr.fit_residual,
        orthogonality_defect=precond.qr.orthogonality_defect,
    )
    return result
