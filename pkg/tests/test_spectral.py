import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saddlecg.bench import cyclic_shift, gen_example1
from saddlecg.errors import NotSPDError, ZeroMatrixError
from saddlecg.linalg import SparseMatrix, spmv, spmv_t
from saddlecg.saddle import SaddleSystem, assemble_m
from saddlecg.spectral import (
    choose_gamma,
    choose_w,
    estimate_lambda_min_spd,
    estimate_sigma_max,
    estimate_sigma_min,
    estimate_spectrum,
)


def svd(A):
    return np.linalg.svd(A.toarray(), compute_uv=False)


class TestSigmaMax:
    def test_identity(self):
        assert estimate_sigma_max(SparseMatrix.identity(4)) == pytest.approx(1.0, abs=1e-8)

    def test_diagonal(self):
        assert estimate_sigma_max(SparseMatrix.diag([1.0, 2.0, 5.0])) == pytest.approx(5.0, abs=1e-6)

    def test_example1_against_svd(self):
        A = gen_example1(50, 0.2, 1)
        assert estimate_sigma_max(A) == pytest.approx(svd(A)[0], rel=1e-2)

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrixError):
            estimate_sigma_max(SparseMatrix.from_dense(np.zeros((3, 3))))

    def test_ones_in_kernel_falls_back(self):
        A = SparseMatrix.from_dense([[1.0, -1.0], [1.0, -1.0]])
        assert estimate_sigma_max(A) == pytest.approx(2.0, rel=1e-8)


class TestSigmaMin:
    def test_identity(self):
        assert estimate_sigma_min(SparseMatrix.identity(4)) == pytest.approx(1.0, abs=1e-8)

    def test_diagonal(self):
        assert estimate_sigma_min(SparseMatrix.diag([1.0, 2.0, 5.0])) == pytest.approx(1.0, abs=1e-6)

    def test_circulant_shift(self):
        assert estimate_sigma_min(cyclic_shift(20)) == pytest.approx(1.0, abs=1e-6)

    def test_estimate_is_from_above(self):
        A = gen_example1(40, 0.2, 4)
        exact = svd(A)[-1]
        assert estimate_sigma_min(A) >= exact * (1 - 1e-8)


def test_spectrum_record():
    est = estimate_spectrum(SparseMatrix.diag([1.0, 2.0, 5.0]))
    assert est.kappa2 == pytest.approx(5.0, rel=1e-6)
    assert est.sigma_max >= est.sigma_min > 0
    assert est.converged


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 100.0), min_size=2, max_size=15))
def test_diagonal_extremes(d):
    d = np.array(d)
    top = np.unique(d)[::-1]
    # power iteration needs a gap below the largest distinct value to meet its tolerance
    gap_ok = len(top) == 1 or top[1] <= 0.9 * top[0]
    tol = 1e-8
    est = estimate_spectrum(SparseMatrix.diag(d), tol=tol)
    if gap_ok:
        assert est.sigma_max == pytest.approx(d.max(), rel=10 * tol)
    assert est.sigma_max <= d.max() * (1 + 1e-12)
    assert est.sigma_min == pytest.approx(d.min(), rel=10 * tol)


class TestChooseW:
    def test_identity_weak(self):
        c = choose_w(SparseMatrix.identity(5), "weak", 1.1)
        assert c.w == pytest.approx(2.2, rel=1e-8)
        assert c.bound == pytest.approx(2.0, rel=1e-8)
        assert c.mode == "weak"

    def test_diag_strict(self):
        c = choose_w(SparseMatrix.diag([1.0, 2.0]), "strict", 1.1)
        assert c.bound == pytest.approx(4.0, rel=1e-6)
        assert c.w == pytest.approx(4.4, rel=1e-6)

    def test_diag_weak_safety(self):
        c = choose_w(SparseMatrix.diag([1.0, 2.0]), "weak", 1.5)
        assert c.bound == pytest.approx(2.0, rel=1e-6)
        assert c.w == pytest.approx(3.0, rel=1e-6)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            choose_w(SparseMatrix.identity(2), "loose")
        with pytest.raises(ValueError):
            choose_w(SparseMatrix.identity(2), "weak", safety=1.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_strict_clears_positivity_condition(self, seed):
        A = gen_example1(30, 0.2, seed)
        s = svd(A)
        w = choose_w(A, "strict").w
        assert w * s[-1] ** 2 > 2 * s[0]


class TestLambdaMin:
    def test_identity(self):
        assert estimate_lambda_min_spd(lambda v: v, 10) == pytest.approx(1.0, abs=1e-8)

    def test_normal_matrix(self):
        A = SparseMatrix.diag([1.0, 2.0, 5.0])
        lam = estimate_lambda_min_spd(lambda v: spmv_t(A, spmv(A, v)), 3)
        assert lam == pytest.approx(1.0, abs=1e-6)

    def test_weighted(self):
        A = SparseMatrix.diag([2.0, 3.0])
        lam = estimate_lambda_min_spd(lambda v: 2.0 * spmv_t(A, spmv(A, v)), 2)
        assert lam == pytest.approx(8.0, abs=1e-6)

    def test_indefinite_detected(self):
        D = np.diag([1.0, -1.0, 2.0])
        with pytest.raises(NotSPDError):
            estimate_lambda_min_spd(lambda v: D @ v, 3)


class TestChooseGamma:
    def test_identity(self):
        g = choose_gamma(SparseMatrix.identity(4), 3.0)
        assert g.lambda_min_est == pytest.approx(3.0, rel=1e-8)
        assert g.gamma == pytest.approx(1.5, rel=1e-8)

    def test_diag(self):
        assert choose_gamma(SparseMatrix.diag([1.0, 2.0]), 4.4).gamma == pytest.approx(2.2, rel=1e-6)
        assert choose_gamma(SparseMatrix.diag([2.0, 3.0]), 2.0).gamma == pytest.approx(4.0, rel=1e-6)

    def test_matrix_weight(self):
        A = SparseMatrix.diag([1.0, 2.0])
        W = SparseMatrix.from_dense([[4.0, 2.0], [2.0, 5.0]])
        oracle = np.linalg.eigvalsh(A.toarray().T @ W.toarray() @ A.toarray())[0]
        assert choose_gamma(A, W).gamma == pytest.approx(oracle / 2, rel=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_between_zero_and_lambda_min(self, seed):
        A = gen_example1(25, 0.2, seed)
        w = choose_w(A, "weak").w
        g = choose_gamma(A, w).gamma
        lam = w * svd(A)[-1] ** 2
        assert 0 < g < lam


@pytest.mark.parametrize("n", [6, 10, 20])
def test_weak_weight_gives_real_positive_spectrum(n):
    A = gen_example1(n, 0.2, n)
    w = choose_w(A, "weak").w
    sys = SaddleSystem(A, w, choose_gamma(A, w).gamma)
    ev = np.linalg.eigvals(assemble_m(sys))
    rho = np.abs(ev).max()
    assert np.abs(ev.imag).max() <= 1e-10 * rho
    assert ev.real.min() > 0
