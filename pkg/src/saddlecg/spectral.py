"""Extreme singular value estimates and the choice of weight and shift.

The saddle operator needs a weight ``W = w I`` large enough for its
spectrum to be real and positive, and a shift ``gamma`` that makes the
inner-product matrix ``M(gamma)`` positive definite.  Both depend on
sigma_min(A), sigma_max(A) and lambda_min(A^T W A), which are estimated
here without factorizing A.
"""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg

from .errors import NotSPDError, ZeroMatrixError
from .linalg import SparseMatrix, spmv, spmv_t

__all__ = [
    "SpectralEstimate",
    "WeightChoice",
    "GammaChoice",
    "estimate_sigma_max",
    "estimate_sigma_min",
    "estimate_spectrum",
    "estimate_lambda_min_spd",
    "choose_w",
    "choose_gamma",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralEstimate:
    sigma_max: float
    sigma_min: float
    iterations_used: int
    converged: bool

    @property
    def kappa2(self):
        return self.sigma_max / self.sigma_min


@dataclass(frozen=True)
class WeightChoice:
    """Scalar weight w for ``W = w I`` and the lower bound it clears."""

    w: float
    mode: str
    bound: float
    safety: float


@dataclass(frozen=True)
class GammaChoice:
    gamma: float
    lambda_min_est: float


def _default_maxit(n):
    return max(5 * n, 100)


def _start_vector(A):
    """Normalized ones, or e_1 when A annihilates the ones vector."""
    n = A.ncols
    v = np.ones(n) / np.sqrt(n)
    if not np.any(spmv(A, v)):
        v = np.zeros(n)
        v[0] = 1.0
    return v


def _check_nonzero(A):
    if A.nnz == 0 or not np.any(A.values):
        raise ZeroMatrixError("matrix has no nonzero entries")


def _power_ata(A, tol, maxit):
    v = _start_vector(A)
    lam = None
    for it in range(1, maxit + 1):
        Av = spmv(A, v)
        new = float(Av @ Av)  # Rayleigh quotient of A^T A at unit v
        w = spmv_t(A, Av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return np.sqrt(new), it, True
        v = w / nw
        if lam is not None and abs(new - lam) <= tol * new:
            return np.sqrt(new), it, True
        lam = new
    return np.sqrt(lam), maxit, False


def estimate_sigma_max(A, tol=1e-6, maxit=None):
    """Largest singular value by power iteration on ``v -> A^T A v``.

    Returns the square root of the dominant Rayleigh quotient once its
    relative change between sweeps drops below `tol`.
    """
    _check_nonzero(A)
    maxit = _default_maxit(A.ncols) if maxit is None else maxit
    value, _, converged = _power_ata(A, tol, maxit)
    if not converged:
        log.warning("sigma_max power iteration hit maxit=%d", maxit)
    return float(value)


def _lanczos_min(matvec, v0, tol, maxit, check_spd=False):
    """Smallest Ritz value of a symmetric operator.

    Full reorthogonalization (two Gram-Schmidt passes) against the whole
    basis.  Convergence is declared once the Ritz residual
    ``beta_k |s_k|`` of the smallest Ritz pair is below ``tol * theta``,
    which bounds the distance from theta to the spectrum.

    Returns
    -------
    theta, iterations, converged
    """
    n = v0.shape[0]
    maxit = min(maxit, n)
    Q = np.zeros((n, maxit + 1))
    Q[:, 0] = v0 / np.linalg.norm(v0)
    alpha, beta = [], []
    theta = None
    for k in range(maxit):
        q = Q[:, k]
        w = matvec(q)
        a = float(q @ w)
        if check_spd and not a > 0.0:
            raise NotSPDError(f"probe with nonpositive quadratic form {a:.3e}")
        alpha.append(a)
        w = w - a * q
        if k > 0:
            w -= beta[-1] * Q[:, k - 1]
        for _ in range(2):
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        b = float(np.linalg.norm(w))
        if len(alpha) == 1:
            vals, vecs = np.array(alpha), np.ones((1, 1))
        else:
            vals, vecs = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta))
        theta = float(vals[0])
        resid = b * abs(vecs[-1, 0])
        if resid <= tol * abs(theta) or b <= 1e-14 * max(abs(vals[-1]), 1e-300):
            return theta, k + 1, True
        beta.append(b)
        Q[:, k + 1] = w / b
    return theta, maxit, False


def estimate_sigma_min(A, tol=1e-6, maxit=None):
    """Smallest singular value from Lanczos on ``A^T A``.

    The Ritz value approaches sigma_min^2 from above, so the estimate errs
    high; `choose_w` compensates with a safety factor.
    """
    _check_nonzero(A)
    maxit = _default_maxit(A.ncols) if maxit is None else maxit
    theta, _, converged = _lanczos_min(
        lambda v: spmv_t(A, spmv(A, v)), _start_vector(A), tol, maxit
    )
    if not converged:
        log.warning("sigma_min Lanczos did not converge within %d steps", maxit)
    return float(np.sqrt(max(theta, 0.0)))


def estimate_spectrum(A, tol=1e-6, maxit=None):
    """Both extreme singular values, with iteration count and convergence flag."""
    _check_nonzero(A)
    maxit = _default_maxit(A.ncols) if maxit is None else maxit
    smax, it1, ok1 = _power_ata(A, tol, maxit)
    theta, it2, ok2 = _lanczos_min(
        lambda v: spmv_t(A, spmv(A, v)), _start_vector(A), tol, maxit
    )
    smin = float(np.sqrt(max(theta, 0.0)))
    if smin <= 0.0:
        raise np.linalg.LinAlgError("sigma_min estimate is zero; matrix looks singular")
    # the power estimate is a lower bound, the Ritz estimate an upper bound
    smax = max(float(smax), smin)
    return SpectralEstimate(smax, smin, it1 + it2, ok1 and ok2)


def estimate_lambda_min_spd(op, dim, tol=1e-6, maxit=None):
    """Smallest eigenvalue of an SPD operator by Lanczos.

    Parameters
    ----------
    op : callable or object with ``matvec``
    dim : int

    Raises
    ------
    NotSPDError
        If any Lanczos probe q has ``q^T op(q) <= 0``.
    """
    matvec = op.matvec if hasattr(op, "matvec") else op
    maxit = _default_maxit(dim) if maxit is None else maxit
    v0 = np.ones(dim) / np.sqrt(dim)
    theta, _, converged = _lanczos_min(
        lambda v: np.asarray(matvec(v), dtype=np.float64).ravel(), v0, tol, maxit, check_spd=True
    )
    if not theta > 0.0:
        raise NotSPDError(f"smallest Ritz value {theta:.3e} is not positive")
    if not converged:
        log.warning("lambda_min Lanczos did not converge within %d steps", maxit)
    return float(theta)


def choose_w(A, mode="weak", safety=1.1, estimate=None):
    """Scalar weight that puts the saddle spectrum on the positive real axis.

    ``strict``: ``w = safety * 2 kappa_2(A) / sigma_min(A)``, the condition
    that also guarantees a positive definite M(gamma) for any SPD W.
    ``weak``: ``w = safety * 2 / sigma_min(A)``, sufficient for ``W = w I``.

    Parameters
    ----------
    A : SparseMatrix
    mode : {"strict", "weak"}
    safety : float
        Multiplier > 1 on the bound; absorbs the upward bias of the
        sigma_min estimate.
    estimate : SpectralEstimate, optional
        Reuse precomputed estimates.
    """
    if mode not in ("strict", "weak"):
        raise ValueError(f"mode must be 'strict' or 'weak', got {mode!r}")
    if not safety > 1.0:
        raise ValueError("safety factor must exceed 1")
    est = estimate_spectrum(A) if estimate is None else estimate
    if mode == "strict":
        bound = 2.0 * est.kappa2 / est.sigma_min
    else:
        bound = 2.0 / est.sigma_min
    return WeightChoice(w=safety * bound, mode=mode, bound=bound, safety=safety)


def choose_gamma(A, w, tol=1e-6, maxit=None):
    """Shift ``gamma = lambda_min(w A^T A) / 2``.

    `w` may also be an SPD `SparseMatrix`, in which case ``A^T W A`` is used.
    """
    if isinstance(w, SparseMatrix):
        W = w

        def op(v):
            return spmv_t(A, spmv(W, spmv(A, v)))

    else:
        w = float(w)
        if not w > 0.0:
            raise ValueError("w must be positive")

        def op(v):
            return w * spmv_t(A, spmv(A, v))

    lam = estimate_lambda_min_spd(op, A.ncols, tol=tol, maxit=maxit)
    return GammaChoice(gamma=0.5 * lam, lambda_min_est=lam)
