"""Conjugate gradients for the nonsymmetric saddle point operator.

M is self-adjoint with respect to the bilinear form of M(gamma), so CG can
run in that form: the iteration minimizes the error in the norm induced by
G = M(gamma) M, with

    alpha_i     = <r_i, r_i> / <M p_i, p_i>
    beta_{i+1}  = <r_{i+1}, r_{i+1}> / <r_i, r_i>

where <u, v> = v^T M(gamma) u.  Residuals are mutually M(gamma)-orthogonal
and the search directions are G-conjugate.
"""

from dataclasses import dataclass
import logging

import numpy as np

from .errors import MissingDataError
from .history import ConvergenceHistory, SolveResult
from .linalg import spmv, spmv_t
from .saddle import SaddleSystem, recover_fields, split

__all__ = ["NspcgConfig", "nspcg_solve", "residual_orthogonality_report", "saddle_monitor"]

log = logging.getLogger(__name__)

_TINY = 1e-300


@dataclass(frozen=True)
class NspcgConfig:
    """Solver controls.

    Attributes
    ----------
    tol : float
        Stop once ``||b - M z_i|| <= tol * ||b||``.
    maxit : int
    record_residual_vectors : bool
        Keep every residual (and search direction) for orthogonality
        diagnostics.
    indefiniteness_check : bool
        Stop with status ``indefinite`` if ``<r, r>`` or ``<M p, p>`` is
        nonpositive, which means w or gamma violates the positivity
        conditions.  Must be off for operators whose M(gamma) is
        indefinite by construction (the preconditioned system).
    beta_formula : {"standard", "printed"}
        ``printed`` divides by ``<M r_i, r_i>`` instead of ``<r_i, r_i>``;
        kept only for comparison, it does not produce orthogonal residuals.
    """

    tol: float = 1e-8
    maxit: int = 500
    record_residual_vectors: bool = False
    indefiniteness_check: bool = True
    beta_formula: str = "standard"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        if self.beta_formula not in ("standard", "printed"):
            raise ValueError("beta_formula must be 'standard' or 'printed'")


def saddle_monitor(sys, c, d):
    """Callable ``z -> (||c - A x||, ||d - A^T y||, d^T x)``."""

    def monitor(z):
        x, y = split(z, sys.n)
        return (
            np.linalg.norm(c - spmv(sys.A, x)),
            np.linalg.norm(d - spmv_t(sys.A, y)),
            float(d @ x),
        )

    return monitor


def nspcg_solve(op, b, z0=None, config=None, monitor=None):
    """Solve ``M z = b`` by conjugate gradients in the M(gamma) form.

    Parameters
    ----------
    op : SaddleSystem or compatible
        Anything with ``matvec`` (M), ``gamma_matvec`` (M(gamma)) and
        ``dim``; the preconditioned operator qualifies.
    b : ndarray, shape (dim,)
    z0 : ndarray, optional
        Initial guess, zero by default.
    config : NspcgConfig, optional
    monitor : callable, optional
        ``z -> (forward, adjoint, amplitude)`` evaluated every iteration.
        For a `SaddleSystem` it defaults to the fields (c, d) that
        produce `b`.

    Returns
    -------
    SolveResult
        ``solution`` is the final z.  ``info`` holds the true final
        residual norm and, when recorded, the search directions.
    """
    cfg = NspcgConfig() if config is None else config
    b = np.asarray(b, dtype=np.float64)
    dim = op.dim
    if b.shape != (dim,):
        raise ValueError(f"rhs must have length {dim}")
    z = np.zeros(dim) if z0 is None else np.array(z0, dtype=np.float64)
    if monitor is None and isinstance(op, SaddleSystem):
        monitor = saddle_monitor(op, *recover_fields(op, b))

    hist = ConvergenceHistory()
    directions = None
    if cfg.record_residual_vectors:
        hist.residual_vectors = []
        directions = []

    def record(res_norm, r):
        extra = monitor(z) if monitor is not None else ()
        hist.append(res_norm, *extra)
        if hist.residual_vectors is not None:
            hist.residual_vectors.append(r.copy())

    r = b - op.matvec(z) if z.any() else b.copy()
    bnorm = np.linalg.norm(b)
    ref = bnorm if bnorm > 0 else 1.0
    rnorm = np.linalg.norm(r)
    record(rnorm, r)

    status = "maxit"
    it = 0
    if rnorm <= cfg.tol * ref:
        status = "converged"
    else:
        Hr = op.gamma_matvec(r)
        rho = float(r @ Hr)
        p = r.copy()
        for it in range(1, cfg.maxit + 1):
            if directions is not None:
                directions.append(p.copy())
            q = op.matvec(p)
            denom = float(p @ op.gamma_matvec(q))
            if cfg.indefiniteness_check and (rho <= 0.0 or denom <= 0.0):
                status = "indefinite"
                it -= 1
                break
            if abs(denom) < _TINY or abs(rho) < _TINY:
                status = "breakdown"
                it -= 1
                break
            alpha = rho / denom
            if cfg.beta_formula == "printed":
                beta_denom = float(r @ op.gamma_matvec(op.matvec(r)))
            z += alpha * p
            r -= alpha * q
            rnorm = np.linalg.norm(r)
            record(rnorm, r)
            if rnorm <= cfg.tol * ref:
                status = "converged"
                break
            Hr = op.gamma_matvec(r)
            rho_new = float(r @ Hr)
            if cfg.beta_formula == "printed":
                if abs(beta_denom) < _TINY:
                    status = "breakdown"
                    break
                beta = rho_new / beta_denom
            else:
                beta = rho_new / rho
            p = r + beta * p
            rho = rho_new
        else:
            it = cfg.maxit

    if status != "converged":
        log.info("nspcg stopped with status %s after %d iterations", status, it)
    info = {"true_residual": float(np.linalg.norm(b - op.matvec(z))), "rhs_norm": float(bnorm)}
    if directions is not None:
        info["directions"] = directions
    return SolveResult(solution=z, status=status, iterations=it, history=hist, info=info)


def residual_orthogonality_report(op, history):
    """Largest normalized M(gamma) inner product between distinct residuals.

    Returns ``max_{i != j} |<r_i, r_j>| / (||r_i|| ||r_j||)`` with norms
    induced by M(gamma) (absolute values are taken under the root when the
    form is indefinite).  Residuals whose 2-norm is at rounding level,
    below ``1000 eps`` times the initial one, carry no direction and are
    treated as exact zeros.

    Raises
    ------
    MissingDataError
        If the solve did not record residual vectors.
    """
    vecs = history.residual_vectors
    if vecs is None:
        raise MissingDataError("residual vectors were not recorded; set record_residual_vectors")
    if len(vecs) < 2:
        return 0.0
    R = np.array(vecs)
    lengths = np.linalg.norm(R, axis=1)
    R = R[lengths > 1e3 * np.finfo(float).eps * lengths[0]]
    if len(R) < 2:
        return 0.0
    vecs = list(R)
    HR = np.array([op.gamma_matvec(r) for r in vecs])
    gram = R @ HR.T
    norms = np.sqrt(np.abs(np.diag(gram)))
    norms[norms == 0.0] = 1.0
    scaled = np.abs(gram) / np.outer(norms, norms)
    np.fill_diagonal(scaled, 0.0)
    return float(scaled.max())
