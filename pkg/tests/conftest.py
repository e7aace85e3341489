import numpy as np
import pytest

from saddlecg.bench import gen_example1
from saddlecg.linalg import SparseMatrix


def random_sparse(rng, m, n, density=0.4):
    mask = rng.random((m, n)) < density
    return np.where(mask, rng.standard_normal((m, n)), 0.0)


@pytest.fixture
def ex1_small():
    """Example-1 matrices at n = 8, 12, 16 (dense copies included)."""
    return [gen_example1(n, 0.2, seed) for seed, n in enumerate((8, 12, 16))]


def well_conditioned(rng, n, shift=None):
    """Random dense matrix pushed away from singularity by a diagonal shift."""
    shift = n / 5 + 2 if shift is None else shift
    return SparseMatrix.from_dense(rng.standard_normal((n, n)) + shift * np.eye(n))
