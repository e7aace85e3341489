"""Convergence records shared by all solvers."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConvergenceHistory", "SolveResult", "STATUSES"]

STATUSES = ("converged", "maxit", "breakdown", "indefinite")


@dataclass
class ConvergenceHistory:
    """Per-iteration residual norms and amplitude estimates.

    Row ``i`` describes the iterate after ``i`` iterations; row 0 is the
    initial guess.  `residual` is the 2-norm residual of the system the
    solver iterates on (the saddle system for NspCG, the stacked
    forward/adjoint residual for the baselines).  Quantities a solver cannot
    evaluate are stored as NaN.
    """

    residual: list = field(default_factory=list)
    forward: list = field(default_factory=list)
    adjoint: list = field(default_factory=list)
    amplitude: list = field(default_factory=list)
    residual_vectors: list = None

    def append(self, residual, forward=np.nan, adjoint=np.nan, amplitude=np.nan):
        self.residual.append(float(residual))
        self.forward.append(float(forward))
        self.adjoint.append(float(adjoint))
        self.amplitude.append(float(amplitude))

    def __len__(self):
        return len(self.residual)

    @property
    def iterations(self):
        return len(self.residual) - 1

    def rows(self):
        """Yield ``(iter, residual, forward, adjoint, amplitude)`` tuples."""
        for i, row in enumerate(zip(self.residual, self.forward, self.adjoint, self.amplitude)):
            yield (i, *row)

    def relative_residual(self):
        r = np.asarray(self.residual)
        return r / r[0] if r[0] > 0 else r


@dataclass
class SolveResult:
    """Outcome of one solve.

    Attributes
    ----------
    solution : ndarray
        The saddle iterate z = [x; y] for NspCG; x or y for the baselines.
    status : str
        One of ``converged``, ``maxit``, ``breakdown``, ``indefinite``.
    iterations : int
    history : ConvergenceHistory
    info : dict
        Solver specific extras (final true residual, shift, ...).
    """

    solution: np.ndarray
    status: str
    iterations: int
    history: ConvergenceHistory
    info: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"
