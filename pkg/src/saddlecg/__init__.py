"""Conjugate gradients on nonsymmetric saddle point systems.

Solves a forward system ``A x = c`` and its adjoint ``A^T y = d`` at once
through the 2n x 2n saddle operator ``M = [[A^T W A, A^T], [-A, 0]]``,
which is self-adjoint in a suitable bilinear form.  LSQR, GLSQR and QMR
are included as baselines, together with a QR based block preconditioner,
Matrix Market input and a benchmark driver.
"""

from .errors import (
    Breakdown,
    DimensionError,
    LuckyBreakdown,
    MissingDataError,
    NotSPDError,
    ParseError,
    RankError,
    SeriousBreakdown,
    SingularError,
    UnsupportedFormatError,
    ZeroMatrixError,
)
from .linalg import CholeskyFactor, SparseMatrix, cholesky_spd, dense_lstsq, dense_solve, spmv, spmv_t
from .spectral import (
    choose_gamma,
    choose_w,
    estimate_lambda_min_spd,
    estimate_sigma_max,
    estimate_sigma_min,
    estimate_spectrum,
)
from .saddle import (
    SaddleSystem,
    apply_m,
    apply_m_gamma,
    apply_m_t,
    assemble_m,
    assemble_m_gamma,
    build_rhs,
    extract_amplitude,
    g_inner,
)
from .history import ConvergenceHistory, SolveResult
from .nspcg import NspcgConfig, nspcg_solve, residual_orthogonality_report
from .bidiag import glsqr_extend, glsqr_solve, glsqr_start, golub_kahan_extend, golub_kahan_start, lsqr_solve
from .qmr import qmr_solve, unsym_lanczos_extend, unsym_lanczos_start
from .precond import (
    apply_l_inv,
    apply_u_inv,
    build_preconditioner,
    incomplete_qr,
    preconditioned_nspcg,
    preconditioned_operator,
)
from .mmio import read_matrix_market, write_history_csv, write_matrix_market, write_summary_json
from .bench import ProblemSpec, RunConfig, gen_example1, gen_example3, gen_example456, run_benchmark

__version__ = "0.1.0"
