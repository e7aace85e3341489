"""Test problems and a benchmark driver producing convergence histories.

Problems
--------
example1   ``sprand(n, n, density) + I``
example2   a matrix read from a Matrix Market file (ORSIRR_1)
example3   ``scale * sprand(n, n, 0.2) + J`` with J the cyclic shift
example4-6 ``U diag(1000 I_p, 1, ..., q) V^T`` with random orthogonal U, V;
           (n, p) = (100, 90), (100, 50), (1000, 600)
file       any Matrix Market file
"""

from dataclasses import dataclass, field, replace
import logging
import os
import time

import numpy as np
import scipy.sparse as sp

from .bidiag import glsqr_solve, lsqr_solve
from .errors import DimensionError
from .history import ConvergenceHistory
from .linalg import SparseMatrix, spmv, spmv_t
from .mmio import read_matrix_market, write_history_csv, write_summary_json
from .nspcg import NspcgConfig, nspcg_solve
from .precond import (
    apply_l_inv,
    apply_l_inv_t,
    apply_u_inv,
    apply_u_inv_t,
    build_preconditioner,
    preconditioned_nspcg,
    preconditioned_operator,
)
from .qmr import qmr_solve
from .saddle import SaddleSystem, build_rhs, join, split
from .spectral import choose_gamma, choose_w

__all__ = [
    "ProblemSpec",
    "RunConfig",
    "BenchResult",
    "gen_example1",
    "gen_example3",
    "gen_example456",
    "build_problem",
    "rhs_vectors",
    "run_benchmark",
    "sweep_configs",
    "run_sweep",
    "EXAMPLE_SIZES",
    "EXIT_CODES",
]

log = logging.getLogger(__name__)

KINDS = ("example1", "example2", "example3", "example4", "example5", "example6", "file")
SOLVERS = ("nspcg", "glsqr", "qmr", "lsqr")
PRECONDS = ("none", "iqr", "exact")
EXIT_CODES = {"converged": 0, "maxit": 2, "breakdown": 3, "indefinite": 4}

# default sizes, and the p of diag(1000 I_p, 1..q)
EXAMPLE_SIZES = {"example1": 100, "example3": 100, "example4": 100, "example5": 100, "example6": 1000}
_EXAMPLE_P = {"example4": 90, "example5": 50, "example6": 600}


def _sprand(rng, n, density):
    mask = rng.random((n, n)) < density
    vals = rng.random((n, n))
    return sp.csr_matrix(np.where(mask, vals, 0.0))


def gen_example1(n, density=0.2, seed=0):
    """Random sparse matrix plus the identity.

    Each entry is present independently with probability `density` and
    takes a Uniform(0, 1) value.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    return SparseMatrix.from_scipy(_sprand(rng, n, density) + sp.identity(n, format="csr"))


def cyclic_shift(n):
    """J with ones on the superdiagonal and at position (n, 1)."""
    rows = np.arange(n)
    return SparseMatrix.from_coo(rows, (rows + 1) % n, np.ones(n), (n, n))


def gen_example3(n, scale=1e-3, seed=0, density=0.2):
    """``scale * sprand(n, n, density) + J``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(seed)
    B = _sprand(rng, n, density)
    return SparseMatrix.from_scipy(scale * B + cyclic_shift(n).to_scipy())


def _random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def gen_example456(n, p, seed=0, identity=False):
    """``U diag(1000 I_p, 1, 2, ..., n - p) V^T``.

    U and V come from sign-fixed QR factorizations of seeded Gaussian
    matrices; ``identity=True`` uses U = V = I.
    """
    if not 0 < p < n:
        raise ValueError("need 0 < p < n")
    sigma = np.concatenate([np.full(p, 1000.0), np.arange(1, n - p + 1, dtype=float)])
    if identity:
        return SparseMatrix.diag(sigma)
    rng = np.random.default_rng(seed)
    U = _random_orthogonal(rng, n)
    V = _random_orthogonal(rng, n)
    return SparseMatrix.from_dense((U * sigma) @ V.T)


@dataclass(frozen=True)
class ProblemSpec:
    """Which matrix to build.

    ``params`` holds kind specific values: ``density`` (example1),
    ``scale`` (example3), ``p`` (examples 4-6), ``path`` (example2, file).
    A missing n falls back to the example's default size.
    """

    kind: str
    n: int = None
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind in ("example2", "file") and not self.params.get("path"):
            raise ValueError(f"{self.kind} needs params['path']")
        if self.kind in _EXAMPLE_P:
            n = self.size
            p = self.params.get("p", _EXAMPLE_P[self.kind] if n == EXAMPLE_SIZES[self.kind] else None)
            if p is None or not 0 < p < n:
                raise ValueError(f"{self.kind} needs 0 < p < n (n={n}, p={p})")

    @property
    def size(self):
        if self.n is not None:
            return self.n
        return EXAMPLE_SIZES.get(self.kind)

    @property
    def label(self):
        if self.kind in ("example2", "file"):
            return self.kind
        return f"{self.kind}_n{self.size}_s{self.seed}"


def build_problem(spec):
    """Construct the matrix described by `spec`."""
    k = spec.kind
    if k == "example1":
        return gen_example1(spec.size, spec.params.get("density", 0.2), spec.seed)
    if k == "example3":
        return gen_example3(spec.size, spec.params.get("scale", 1e-3), spec.seed)
    if k in _EXAMPLE_P:
        p = spec.params.get("p", _EXAMPLE_P[k])
        return gen_example456(spec.size, p, spec.seed)
    A = read_matrix_market(spec.params["path"])
    if A.nrows != A.ncols:
        raise DimensionError(f"matrix in {spec.params['path']} is not square: {A.shape}")
    return A


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run.

    Attributes
    ----------
    precond : {"none", "iqr", "exact"}
        ``iqr`` uses an incomplete QR with threshold `droptol`.
    w_mode : {"strict", "weak"}
        Bound used for the scalar weight w (saddle based runs only).
    rhs : {"ones", "random"}
        ``c = d = ones / sqrt(n)``, or seeded Gaussian vectors normalized
        to unit length.
    """

    problem: ProblemSpec
    solver: str = "nspcg"
    precond: str = "none"
    droptol: float = 0.01
    w_mode: str = "strict"
    tol: float = 1e-8
    maxit: int = 500
    rhs: str = "ones"
    safety: float = 1.1

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.precond not in PRECONDS:
            raise ValueError(f"unknown preconditioner {self.precond!r}")
        if self.precond == "iqr" and not self.droptol > 0:
            raise ValueError("iqr needs a positive droptol")
        if self.w_mode not in ("strict", "weak"):
            raise ValueError(f"unknown w mode {self.w_mode!r}")
        if self.rhs not in ("ones", "random"):
            raise ValueError(f"unknown rhs mode {self.rhs!r}")
        if not self.tol > 0 or self.maxit < 1:
            raise ValueError("tol must be positive and maxit at least 1")

    @property
    def uses_saddle(self):
        return self.solver == "nspcg" or self.precond != "none"

    @property
    def effective_droptol(self):
        return {"none": None, "exact": 0.0, "iqr": self.droptol}[self.precond]

    @property
    def label(self):
        pre = self.precond if self.precond != "iqr" else f"iqr{self.droptol:g}"
        return f"{self.problem.label}_{self.solver}_{pre}_{self.w_mode}"


def rhs_vectors(n, mode="ones", seed=0):
    """The forward and adjoint right-hand sides (c, d)."""
    if mode == "ones":
        c = np.ones(n) / np.sqrt(n)
        return c, c.copy()
    rng = np.random.default_rng([seed, 1])
    c = rng.standard_normal(n)
    d = rng.standard_normal(n)
    return c / np.linalg.norm(c), d / np.linalg.norm(d)


@dataclass
class BenchResult:
    """Outcome of `run_benchmark`.

    ``results`` holds one `SolveResult` for NspCG and the (forward,
    adjoint) pair for the baselines; ``x`` and ``y`` are the recovered
    forward and adjoint solutions.
    """

    config: RunConfig
    results: tuple
    history: ConvergenceHistory
    summary: dict
    status: str
    x: np.ndarray
    y: np.ndarray

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]


def _combine(fstat, astat):
    if fstat == astat:
        return fstat
    for s in ("indefinite", "breakdown", "maxit"):
        if s in (fstat, astat):
            return s
    return "converged"


def _run_saddle_baseline(cfg, A, sys, P, c, d):
    """Run a baseline on ``P z^ = L~^{-1} b`` and ``P^T y^ = U~^{-T} [d; 0]``.

    Since ``z = U~^{-1} z^`` and the adjoint saddle solution is
    ``L~^{-T} y^ = [0; -y]``, the amplitude ``(U~^{-T} p)^T z^ = d^T x`` is
    preserved by the transformation.
    """
    op = preconditioned_operator(sys, P)
    b = apply_l_inv(P, build_rhs(sys, c, d))
    g = apply_u_inv_t(P, join(d, np.zeros(sys.n)))
    solver = {"glsqr": glsqr_solve, "qmr": qmr_solve, "lsqr": lsqr_solve}[cfg.solver]
    rf, ra = solver(op, b, g, tol=cfg.tol, maxit=cfg.maxit)
    x, _ = split(apply_u_inv(P, rf.solution), sys.n)
    _, ymin = split(apply_l_inv_t(P, ra.solution), sys.n)
    return (rf, ra), x, -ymin, op.gamma


def run_benchmark(cfg, out_csv=None, out_json=None, timing=False):
    """Build the problem, run the solver and optionally write CSV/JSON.

    Parameters
    ----------
    cfg : RunConfig
    out_csv, out_json : path or stream, optional
    timing : bool
        Record ``wall_ms`` in the summary.  Off by default so that the
        JSON is byte-for-byte reproducible.

    Returns
    -------
    BenchResult
    """
    A = build_problem(cfg.problem)
    n = A.nrows
    c, d = rhs_vectors(n, cfg.rhs, cfg.problem.seed)
    t0 = time.perf_counter()
    w = gamma = None
    sys = P = None
    if cfg.uses_saddle:
        wc = choose_w(A, cfg.w_mode, cfg.safety)
        w = wc.w
        gamma = choose_gamma(A, w).gamma
        sys = SaddleSystem(A, w, gamma)
        if cfg.precond != "none":
            P = build_preconditioner(sys, cfg.effective_droptol)

    if cfg.solver == "nspcg":
        ncfg = NspcgConfig(tol=cfg.tol, maxit=cfg.maxit)
        if P is None:
            res = nspcg_solve(sys, build_rhs(sys, c, d), config=ncfg)
        else:
            res = preconditioned_nspcg(sys, P, c, d, config=ncfg)
            gamma = res.info["gamma"]
        x, y = split(res.solution, n)
        results = (res,)
        status = res.status
        iterations = res.iterations
    else:
        if P is None:
            solver = {"glsqr": glsqr_solve, "qmr": qmr_solve, "lsqr": lsqr_solve}[cfg.solver]
            rf, ra = solver(A, c, d, tol=cfg.tol, maxit=cfg.maxit)
            x, y = rf.solution, ra.solution
        else:
            (rf, ra), x, y, gamma = _run_saddle_baseline(cfg, A, sys, P, c, d)
        results = (rf, ra)
        status = _combine(rf.status, ra.status)
        iterations = rf.iterations
    elapsed = (time.perf_counter() - t0) * 1e3
    hist = results[0].history

    fwd = float(np.linalg.norm(c - spmv(A, x)))
    adj = float(np.linalg.norm(d - spmv_t(A, y)))
    amp = float(d @ x)
    summary = {
        "problem": cfg.problem.kind,
        "n": n,
        "seed": cfg.problem.seed,
        "solver": cfg.solver,
        "precond": cfg.precond,
        "droptol": cfg.effective_droptol,
        "w_mode": cfg.w_mode if cfg.uses_saddle else None,
        "w": w,
        "gamma": gamma,
        "tol": cfg.tol,
        "maxit": cfg.maxit,
        "rhs": cfg.rhs,
        "status": status,
        "iterations": iterations,
        "final_saddle_residual": hist.residual[-1],
        "final_relative_residual": float(hist.relative_residual()[-1]),
        "final_forward_residual": fwd,
        "final_adjoint_residual": adj,
        "amplitude": amp,
        "consistency_gap": abs(amp - float(c @ y)),
        "wall_ms": elapsed if timing else None,
    }
    if out_csv is not None:
        write_history_csv(hist, out_csv)
    if out_json is not None:
        write_summary_json(summary, out_json)
    return BenchResult(cfg, results, hist, summary, status, x, y)


def sweep_configs(seed=1, include_example6=False, matrix_path=None, solvers=("nspcg", "glsqr", "qmr"),
                  w_mode="strict", tol=1e-8, maxit=500, droptol=0.01):
    """The full benchmark grid.

    Unpreconditioned runs of Examples 1-6, then Examples 1 and 2 with the
    incomplete QR preconditioner.  Example 2 runs only when `matrix_path`
    is given; Example 6 only with `include_example6`.
    """
    problems = [ProblemSpec("example1", seed=seed)]
    if matrix_path is not None:
        problems.append(ProblemSpec("example2", seed=seed, params={"path": os.fspath(matrix_path)}))
    problems += [ProblemSpec(k, seed=seed) for k in ("example3", "example4", "example5")]
    if include_example6:
        problems.append(ProblemSpec("example6", seed=seed))
    base = RunConfig(problem=problems[0], w_mode=w_mode, tol=tol, maxit=maxit, droptol=droptol)
    cfgs = [replace(base, problem=p, solver=s) for p in problems for s in solvers]
    pre = [p for p in problems if p.kind in ("example1", "example2")]
    cfgs += [replace(base, problem=p, solver=s, precond="iqr") for p in pre for s in solvers]
    return cfgs


def run_sweep(out_dir, **kwargs):
    """Run `sweep_configs` and write ``<label>.csv`` / ``<label>.json`` files.

    Returns the list of `BenchResult`.
    """
    os.makedirs(out_dir, exist_ok=True)
    out = []
    for cfg in sweep_configs(**kwargs):
        base = os.path.join(out_dir, cfg.label)
        log.info("running %s", cfg.label)
        out.append(run_benchmark(cfg, out_csv=base + ".csv", out_json=base + ".json"))
    return out
