"""QMR on the unsymmetric (two-sided) Lanczos process.

The Lanczos pair builds V from the forward residual and W from the adjoint
residual with W^T V = I, so that

    A V_k   = V_{k+1} T_{k+1,k}
    A^T W_k = W_{k+1} That_{k+1,k}

Forward and adjoint iterates minimize the quasi-residuals
``|| ||r0|| e_1 - T c ||`` and ``|| rho e_1 - That d ||``.

Scaling: every v has unit 2-norm and w_j^T v_j = 1.  There is no
look-ahead; a vanishing w^T v aborts with a serious breakdown.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import LuckyBreakdown, RankError, SeriousBreakdown
from .history import ConvergenceHistory
from .linalg import as_operator, dense_lstsq
from .bidiag import _init_pair, _op_norm, _pair_history_row, _pair_results

__all__ = ["LanczosPair", "unsym_lanczos_start", "unsym_lanczos_extend", "qmr_solve"]


@dataclass(frozen=True)
class LanczosPair:
    """Biorthogonal Lanczos bases after k steps.

    ``V`` and ``W`` hold k+1 columns; ``T`` and ``T_hat`` are (k+1) x k.
    ``rho`` is the coefficient with ``s0 = rho * w_1`` for the adjoint
    start vector.
    """

    V: tuple
    W: tuple
    T: np.ndarray
    T_hat: np.ndarray
    norm_a: float = 1.0
    rho: float = 1.0

    @property
    def k(self):
        return self.T.shape[1]

    def V_matrix(self):
        return np.column_stack(self.V)

    def W_matrix(self):
        return np.column_stack(self.W)


def unsym_lanczos_start(A, r0, s0):
    """v_1 = r0/||r0||, w_1 = s0/(s0^T v_1).

    Raises
    ------
    SeriousBreakdown
        If s0 is (numerically) orthogonal to r0.
    """
    op = as_operator(A)
    r0 = np.asarray(r0, dtype=np.float64)
    s0 = np.asarray(s0, dtype=np.float64)
    nr, ns = np.linalg.norm(r0), np.linalg.norm(s0)
    if nr == 0.0 or ns == 0.0:
        raise ValueError("start vectors must be nonzero")
    v1 = r0 / nr
    rho = float(s0 @ v1)
    if abs(rho) < 1e-12 * ns:
        raise SeriousBreakdown("adjoint start vector is orthogonal to the forward one")
    return LanczosPair(
        V=(v1,), W=(s0 / rho,), T=np.zeros((1, 0)), T_hat=np.zeros((1, 0)),
        norm_a=_op_norm(op), rho=rho,
    )


def _rebiorthogonalize(x, P, Q):
    """Remove from x its components along P using the dual basis Q (Q^T P = I)."""
    coef = np.zeros(P.shape[1])
    for _ in range(2):
        h = Q.T @ x
        x = x - P @ h
        coef += h
    return x, coef


def unsym_lanczos_extend(A, state):
    """Append v_{k+1}, w_{k+1} and column k of T and That.

    Every new vector is rebiorthogonalized against all previous ones and
    the projection coefficients are stored in T (so the off-band entries
    are at rounding level).

    Raises
    ------
    LuckyBreakdown
        If the new v or w direction vanishes (``side`` "v", "w" or "both");
        ``exc.state`` holds the completed column with a zero subdiagonal.
    SeriousBreakdown
        If ``|w~^T v~| < 1e-12 ||v~|| ||w~||``.
    """
    op = as_operator(A)
    V, W = state.V_matrix(), state.W_matrix()
    k = state.k + 1
    vt, tcol = _rebiorthogonalize(op.matvec(state.V[-1]), V, W)
    wt, hcol = _rebiorthogonalize(op.rmatvec(state.W[-1]), W, V)
    nv, nw = np.linalg.norm(vt), np.linalg.norm(wt)
    thresh = 1e-14 * state.norm_a
    v_brk = nv < thresh
    w_brk = nw < thresh * max(1.0, max(np.linalg.norm(w) for w in state.W))

    T = np.zeros((k + 1, k))
    Th = np.zeros((k + 1, k))
    T[:k, : k - 1] = state.T
    Th[:k, : k - 1] = state.T_hat
    T[:k, k - 1] = tcol
    Th[:k, k - 1] = hcol
    if v_brk or w_brk:
        side = "both" if (v_brk and w_brk) else ("v" if v_brk else "w")
        z = np.zeros_like(vt)
        if not v_brk:
            T[k, k - 1] = nv
        if not w_brk:
            Th[k, k - 1] = nw
        new = replace(state, V=state.V + (z if v_brk else vt / nv,),
                      W=state.W + (z if w_brk else wt / nw,), T=T, T_hat=Th)
        raise LuckyBreakdown(f"Lanczos space exhausted on side {side}", state=new, side=side)
    omega = float(wt @ vt)
    if abs(omega) < 1e-12 * nv * nw:
        raise SeriousBreakdown("w^T v vanished (serious breakdown)", state=state)
    v_new = vt / nv
    beta_hat = omega / nv  # = w~^T v_{k+1}
    T[k, k - 1] = nv
    Th[k, k - 1] = beta_hat
    return replace(state, V=state.V + (v_new,), W=state.W + (wt / beta_hat,), T=T, T_hat=Th)


def qmr_solve(A, b, g, x0=None, y0=None, tol=1e-8, maxit=None):
    """QMR for ``A x = b`` and ``A^T y = g`` from one Lanczos pair.

    ``x_k = x0 + V_k c_k`` and ``y_k = y0 + W_k d_k`` with c_k, d_k the
    least-squares minimizers of the forward and adjoint quasi-residuals.
    The quasi-residual norms are kept in ``info["quasi_forward"]`` and
    ``info["quasi_adjoint"]``; the history records true residuals.

    Returns
    -------
    (SolveResult, SolveResult)
    """
    op = as_operator(A)
    b, g, x, y = _init_pair(op, b, g, x0, y0)
    n = op.shape[0]
    maxit = 2 * n if maxit is None else maxit
    hist = ConvergenceHistory()
    x_init, y_init = x.copy(), y.copy()
    r0 = b - op.matvec(x)
    s0 = g - op.rmatvec(y)
    fr, ar = _pair_history_row(op, b, g, x, y, hist)
    nr0 = fr
    f_ref, a_ref = max(fr, 1e-300), max(ar, 1e-300)
    quasi_f, quasi_a = [fr], [ar]
    info = {"quasi_forward": quasi_f, "quasi_adjoint": quasi_a}
    if fr == 0.0 and ar == 0.0:
        return _pair_results(x, y, "converged", "converged", 0, hist, info)
    try:
        state = unsym_lanczos_start(op, r0 if fr > 0 else s0, s0 if ar > 0 else r0)
    except SeriousBreakdown:
        return _pair_results(x, y, "breakdown", "breakdown", 0, hist, info)
    if fr == 0.0:
        nr0 = 0.0
    rho = state.rho if ar > 0 else 0.0
    status = None
    it = 0
    for it in range(1, maxit + 1):
        try:
            state = unsym_lanczos_extend(op, state)
        except LuckyBreakdown as exc:
            state = exc.state
            status = "breakdown"
        except SeriousBreakdown:
            it -= 1
            status = "breakdown"
            break
        k = state.k
        e1 = np.zeros(k + 1)
        e1[0] = 1.0
        try:
            c = dense_lstsq(state.T, nr0 * e1)
            x = x_init + state.V_matrix()[:, :k] @ c
            quasi_f.append(float(np.linalg.norm(nr0 * e1 - state.T @ c)))
        except RankError:
            quasi_f.append(quasi_f[-1])
        try:
            d = dense_lstsq(state.T_hat, rho * e1)
            y = y_init + state.W_matrix()[:, :k] @ d
            quasi_a.append(float(np.linalg.norm(rho * e1 - state.T_hat @ d)))
        except RankError:
            quasi_a.append(quasi_a[-1])
        fr, ar = _pair_history_row(op, b, g, x, y, hist)
        if fr <= tol * f_ref and ar <= tol * a_ref:
            status = "converged"
            break
        if status == "breakdown":
            break
    else:
        status = "maxit"
    fstat = "converged" if fr <= tol * f_ref else status
    astat = "converged" if ar <= tol * a_ref else status
    return _pair_results(x, y, fstat, astat, it, hist, info)
