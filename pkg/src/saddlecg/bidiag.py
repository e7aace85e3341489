"""LSQR and generalized LSQR baselines for the forward/adjoint pair.

Both build orthonormal bases U, V with A V_k = U_{k+1} (small banded
matrix).  LSQR couples the start vectors (A^T u_1 = alpha_1 v_1), so only
the forward system gets a well-adapted Krylov space.  GLSQR starts U from
the forward residual and V from the adjoint residual and keeps both
projected matrices tridiagonal.

Bases are reorthogonalized (two Gram-Schmidt passes) every step and the
small projected problems are re-solved from scratch.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LuckyBreakdown, RankError, SingularError
from .history import ConvergenceHistory, SolveResult
from .linalg import as_operator, dense_lstsq, dense_solve

__all__ = [
    "GolubKahanState",
    "GlsqrState",
    "golub_kahan_start",
    "golub_kahan_extend",
    "lsqr_solve",
    "glsqr_start",
    "glsqr_extend",
    "glsqr_solve",
]


def _orthogonalize(w, basis):
    """Two passes of Gram-Schmidt against the columns in `basis` (a list)."""
    if basis:
        Q = np.column_stack(basis)
        for _ in range(2):
            w = w - Q @ (Q.T @ w)
    return w


def _op_norm(op):
    """Cheap scale for breakdown thresholds: a few power steps on A^T A."""
    n = op.shape[1]
    v = np.ones(n) / np.sqrt(n)
    est = 0.0
    for _ in range(5):
        Av = op.matvec(v)
        est = max(est, np.linalg.norm(Av))
        w = op.rmatvec(Av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    return est if est > 0 else 1.0


# --------------------------------------------------------------------------
# Golub-Kahan bidiagonalization


@dataclass(frozen=True)
class GolubKahanState:
    """Golub-Kahan bidiagonalization after k steps.

    ``U`` holds u_1..u_{k+1}, ``V`` holds v_1..v_k, ``alpha`` holds
    alpha_1..alpha_k and ``beta`` holds beta_1..beta_{k+1}, where beta_1
    is the norm of the start vector.  ``A V_k = U_{k+1} B_k`` with B_k
    lower bidiagonal.
    """

    U: tuple
    V: tuple
    alpha: tuple
    beta: tuple
    norm_a: float = 1.0

    @property
    def k(self):
        return len(self.V)

    @property
    def B(self):
        """(k+1) x k lower bidiagonal matrix."""
        k = self.k
        B = np.zeros((k + 1, k))
        B[np.arange(k), np.arange(k)] = self.alpha
        B[np.arange(1, k + 1), np.arange(k)] = self.beta[1:]
        return B

    def U_matrix(self):
        return np.column_stack(self.U)

    def V_matrix(self):
        n = len(self.U[0])
        return np.column_stack(self.V) if self.V else np.zeros((n, 0))


def golub_kahan_start(A, r0):
    """State with u_1 = r0 / ||r0|| and no v yet."""
    op = as_operator(A)
    r0 = np.asarray(r0, dtype=np.float64)
    beta1 = np.linalg.norm(r0)
    if beta1 == 0.0:
        raise ValueError("start vector must be nonzero")
    return GolubKahanState(U=(r0 / beta1,), V=(), alpha=(), beta=(beta1,), norm_a=_op_norm(op))


def golub_kahan_extend(A, state):
    """One bidiagonalization step: appends v_{k+1}, alpha_{k+1}, u_{k+2}, beta_{k+2}.

    Raises
    ------
    LuckyBreakdown
        When alpha_{k+1} or beta_{k+2} falls below ``1e-14 ||A||``.  The
        exception's ``state`` is the valid state at that point: unchanged
        for an alpha breakdown, or extended with beta = 0 and a zero
        u-column for a beta breakdown.
    """
    op = as_operator(A)
    thresh = 1e-14 * state.norm_a
    u = state.U[-1]
    w = op.rmatvec(u)
    if state.V:
        w = w - state.beta[-1] * state.V[-1]
    w = _orthogonalize(w, list(state.V))
    a = np.linalg.norm(w)
    if a < thresh:
        raise LuckyBreakdown("alpha vanished", state=state, side="v")
    v = w / a
    s = op.matvec(v) - a * u
    s = _orthogonalize(s, list(state.U))
    b = np.linalg.norm(s)
    if b < thresh:
        new = replace(
            state,
            U=state.U + (np.zeros_like(u),),
            V=state.V + (v,),
            alpha=state.alpha + (a,),
            beta=state.beta + (0.0,),
        )
        raise LuckyBreakdown("beta vanished", state=new, side="u")
    return replace(
        state,
        U=state.U + (s / b,),
        V=state.V + (v,),
        alpha=state.alpha + (a,),
        beta=state.beta + (b,),
    )


def _pair_history_row(op, b, g, x, y, hist):
    fr = np.linalg.norm(b - op.matvec(x))
    ar = np.linalg.norm(g - op.rmatvec(y))
    hist.append(np.hypot(fr, ar), fr, ar, float(g @ x))
    return fr, ar


def _pair_results(x, y, fstat, astat, it, hist, info=None):
    info = info or {}
    return (
        SolveResult(solution=x, status=fstat, iterations=it, history=hist, info=dict(info)),
        SolveResult(solution=y, status=astat, iterations=it, history=hist, info=dict(info)),
    )


def _init_pair(op, b, g, x0, y0):
    n = op.shape[0]
    b = np.asarray(b, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    y = np.zeros(n) if y0 is None else np.array(y0, dtype=np.float64)
    return b, g, x, y


def lsqr_solve(A, b, g, x0=None, y0=None, tol=1e-8, maxit=None):
    """LSQR for ``A x = b`` with a companion adjoint iterate for ``A^T y = g``.

    The forward iterate ``x_k = x0 + V_k z_k`` minimizes ``||b - A x||`` over
    the Krylov space.  The adjoint iterate ``y_k = y0 + U_k w_k`` takes the
    w with ``L_k^T w = V_k^T s0`` (L_k the square leading block of B_k), which
    minimizes ``||g - A^T y||`` over ``y0 + span(U_k)``; since v_1 is forced by
    u_1, that space is not adapted to g.

    Returns
    -------
    (SolveResult, SolveResult)
        Forward and adjoint results sharing one history.
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
    f_ref, a_ref = max(fr, 1e-300), max(ar, 1e-300)
    f_done, a_done = fr == 0.0, ar == 0.0
    if f_done and a_done:
        return _pair_results(x, y, "converged", "converged", 0, hist)
    if f_done:
        # forward already exact: nothing to seed the bidiagonalization with
        r0 = s0
    state = golub_kahan_start(op, r0)
    status = None
    it = 0
    for it in range(1, maxit + 1):
        try:
            state = golub_kahan_extend(op, state)
        except LuckyBreakdown as exc:
            status = "breakdown"
            state = exc.state
            if state.k == 0:
                it -= 1
                break
        k = state.k
        V = state.V_matrix()
        if not f_done:
            rhs = np.zeros(k + 1)
            rhs[0] = state.beta[0]
            try:
                x = x_init + V @ dense_lstsq(state.B, rhs)
            except RankError:
                pass
        L = state.B[:k, :k]
        try:
            y = y_init + state.U_matrix()[:, :k] @ dense_solve(L.T, V.T @ s0)
        except SingularError:
            pass
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
    return _pair_results(x, y, fstat, astat, it, hist)


# --------------------------------------------------------------------------
# Generalized LSQR


@dataclass(frozen=True)
class GlsqrState:
    """Two-sided generalized bidiagonalization after k steps.

    ``U`` and ``V`` hold k+1 columns each; ``T`` and ``S`` are the
    (k+1) x k tridiagonal-banded matrices with ``A V_k = U_{k+1} T`` and
    ``A^T U_k = V_{k+1} S``.
    """

    U: tuple
    V: tuple
    T: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    norm_a: float = 1.0

    @property
    def k(self):
        return self.T.shape[1]

    def U_matrix(self):
        return np.column_stack(self.U)

    def V_matrix(self):
        return np.column_stack(self.V)


def glsqr_start(A, u1, v1):
    """Initial state from independent start vectors (normalized here)."""
    op = as_operator(A)
    u1 = np.asarray(u1, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    nu, nv = np.linalg.norm(u1), np.linalg.norm(v1)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("start vectors must be nonzero")
    return GlsqrState(
        U=(u1 / nu,), V=(v1 / nv,), T=np.zeros((1, 0)), S=np.zeros((1, 0)), norm_a=_op_norm(op)
    )


def glsqr_extend(A, state):
    """Advance both recurrences by one step.

    With k the index of the newest columns u_k, v_k::

        beta_{k+1} u_{k+1} = A v_k   - alpha_k u_k - gamma_{k-1} u_{k-1}
        eta_{k+1}  v_{k+1} = A^T u_k - delta_k v_k - theta_{k-1} v_{k-1}

    with alpha_k = u_k^T A v_k, gamma_{k-1} = u_{k-1}^T A v_k,
    delta_k = v_k^T A^T u_k and theta_{k-1} = v_{k-1}^T A^T u_k.

    Raises
    ------
    LuckyBreakdown
        ``side="u"`` if beta_{k+1} vanishes, ``side="v"`` if eta_{k+1}
        does (``side="both"`` for both).  ``exc.state`` has the new T, S
        columns with the vanished coefficient 0 and a zero basis column.
    """
    op = as_operator(A)
    thresh = 1e-14 * state.norm_a
    k = state.k + 1  # 1-based index of the column being completed
    u, v = state.U[-1], state.V[-1]
    Av = op.matvec(v)
    Atu = op.rmatvec(u)
    alpha = float(u @ Av)
    delta = float(v @ Atu)
    c = Av - alpha * u
    d = Atu - delta * v
    gamma = theta = 0.0
    if k > 1:
        gamma = float(state.U[-2] @ Av)
        theta = float(state.V[-2] @ Atu)
        c -= gamma * state.U[-2]
        d -= theta * state.V[-2]
    c = _orthogonalize(c, list(state.U))
    d = _orthogonalize(d, list(state.V))
    beta, eta = np.linalg.norm(c), np.linalg.norm(d)
    u_brk, v_brk = beta < thresh, eta < thresh

    T = np.zeros((k + 1, k))
    S = np.zeros((k + 1, k))
    T[:k, : k - 1] = state.T
    S[:k, : k - 1] = state.S
    T[k - 1, k - 1] = alpha
    S[k - 1, k - 1] = delta
    if k > 1:
        T[k - 2, k - 1] = gamma
        S[k - 2, k - 1] = theta
    T[k, k - 1] = 0.0 if u_brk else beta
    S[k, k - 1] = 0.0 if v_brk else eta
    u_new = np.zeros_like(u) if u_brk else c / beta
    v_new = np.zeros_like(v) if v_brk else d / eta
    new = replace(state, U=state.U + (u_new,), V=state.V + (v_new,), T=T, S=S)
    if u_brk or v_brk:
        side = "both" if (u_brk and v_brk) else ("u" if u_brk else "v")
        raise LuckyBreakdown(f"GLSQR recurrence exhausted on side {side}", state=new, side=side)
    return new


def glsqr_solve(A, b, g, x0=None, y0=None, tol=1e-8, maxit=None):
    """Generalized LSQR: Galerkin iterates for the forward and adjoint systems.

    ``x_k = x0 + ||r0|| V_k T_kk^{-1} e_1`` and
    ``y_k = y0 + ||s0|| U_k S_kk^{-1} e_1``.  A step where T_kk or S_kk is
    numerically singular keeps the previous iterate for that side (flagged
    in ``info["skipped"]``) and the recurrences continue.

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
    nr0, ns0 = fr, ar
    f_ref, a_ref = max(fr, 1e-300), max(ar, 1e-300)
    if fr == 0.0 and ar == 0.0:
        return _pair_results(x, y, "converged", "converged", 0, hist)
    # a side that is already solved still needs some unit start vector
    u1 = r0 if nr0 > 0 else s0
    v1 = s0 if ns0 > 0 else r0
    state = glsqr_start(op, u1, v1)
    skipped = []
    status = None
    it = 0
    for it in range(1, maxit + 1):
        try:
            state = glsqr_extend(op, state)
        except LuckyBreakdown as exc:
            state = exc.state
            status = "breakdown"
        k = state.k
        e1 = np.zeros(k)
        e1[0] = 1.0
        if nr0 > 0:
            try:
                x = x_init + nr0 * (state.V_matrix()[:, :k] @ dense_solve(state.T[:k, :], e1))
            except SingularError:
                skipped.append((it, "forward"))
        if ns0 > 0:
            try:
                y = y_init + ns0 * (state.U_matrix()[:, :k] @ dense_solve(state.S[:k, :], e1))
            except SingularError:
                skipped.append((it, "adjoint"))
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
    return _pair_results(x, y, fstat, astat, it, hist, {"skipped": skipped})
