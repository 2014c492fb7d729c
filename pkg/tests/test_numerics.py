import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from percept_ctl.errors import (
    DimensionError,
    DivergenceError,
    ParameterError,
    RankError,
    SingularMatrixError,
    UnsupportedSizeError,
)
from percept_ctl.numerics import (
    OdeTrajectory,
    char_poly,
    eig_small,
    integrate_ode,
    is_hurwitz,
    mat_exp,
    matrix_rank,
    min_norm_solve,
    quad_simpson,
    solve_linear,
)

K_CHANNEL_B = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])
DOUBLE_INT = np.array([[0.0, 1.0], [0.0, 0.0]])

small = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(np.float64, (n, n), elements=small)


class TestMatExp:
    def test_zero_matrix_gives_identity(self):
        np.testing.assert_array_equal(mat_exp(np.zeros((2, 2)), 5.0), np.eye(2))

    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 3.7, -2.0])
    def test_nilpotent(self, s):
        np.testing.assert_allclose(mat_exp(DOUBLE_INT, s), [[1.0, s], [0.0, 1.0]], rtol=0, atol=1e-14)

    def test_diagonal(self):
        E = mat_exp(np.diag([-1.0, -2.0]), 1.0)
        np.testing.assert_allclose(E, np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-13)

    def test_rotation_generator(self):
        t = 2.3
        E = mat_exp([[0.0, -1.0], [1.0, 0.0]], t)
        np.testing.assert_allclose(E, [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], atol=1e-13)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            mat_exp(np.ones((2, 3)))

    @settings(max_examples=60, deadline=None)
    @given(square(3), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
    def test_semigroup(self, A, s, t):
        lhs = mat_exp(A, s) @ mat_exp(A, t)
        rhs = mat_exp(A, s + t)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(rhs).max()))

    @settings(max_examples=60, deadline=None)
    @given(square(4))
    def test_against_scipy(self, A):
        ref = scipy.linalg.expm(A)
        np.testing.assert_allclose(mat_exp(A), ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


class TestEigSmall:
    def test_identity(self):
        assert eig_small(np.eye(2)) == [1.0, 1.0]

    def test_linearization_fixture(self):
        lam = eig_small([[0.0, -1.0], [2.0, -4.0]])
        np.testing.assert_allclose([z.real for z in lam], [-2 - math.sqrt(2), -2 + math.sqrt(2)], rtol=1e-14)
        assert all(z.imag == 0 for z in lam)

    def test_closed_loop_fixture(self):
        lam = eig_small([[-1.5, 0.5], [-0.5, -1.5]])
        np.testing.assert_allclose(lam, [-1.5 - 0.5j, -1.5 + 0.5j], atol=1e-15)

    def test_too_large(self):
        with pytest.raises(UnsupportedSizeError):
            eig_small(np.eye(5))

    def test_three_by_three_companion(self):
        # roots 1, 2, 3
        C = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose([z.real for z in eig_small(C)], [1.0, 2.0, 3.0], atol=1e-10)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 4).flatmap(square))
    def test_char_poly_residual(self, A):
        p = char_poly(A)
        scale = np.abs(p).sum()
        for lam in eig_small(A):
            assert abs(np.polyval(p, lam)) < 1e-9 * scale * max(1.0, abs(lam)) ** len(A)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 4).flatmap(square))
    def test_conjugate_pairs(self, A):
        lam = eig_small(A)
        cplx = [z for z in lam if z.imag != 0]
        for z in cplx:
            assert z.conjugate() in cplx

    def test_char_poly_of_double_integrator(self):
        np.testing.assert_array_equal(char_poly(DOUBLE_INT), [1.0, 0.0, 0.0])


class TestHurwitz:
    def test_cases(self):
        assert is_hurwitz(-np.eye(2))
        assert not is_hurwitz(DOUBLE_INT)
        assert is_hurwitz([[-1.5, 0.5], [-0.5, -0.5]])

    def test_marginal_rotation_is_not_hurwitz(self):
        assert not is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])


class TestIntegrateOde:
    def test_constant(self):
        tr = integrate_ode(lambda t, x: np.zeros(2), (1.0, 2.0), 0.0, 3.0, 0.1)
        np.testing.assert_array_equal(tr.states, np.tile([1.0, 2.0], (len(tr), 1)))

    def test_scalar_decay(self):
        tr = integrate_ode(lambda t, x: -x, [1.0], 0.0, 1.0, 1e-3)
        assert abs(tr.final[0] - math.exp(-1)) < 1e-9

    def test_double_integrator(self):
        tr = integrate_ode(lambda t, x: DOUBLE_INT @ x, (0.0, 1.0), 0.0, 1.0)
        np.testing.assert_allclose(tr.final, [1.0, 1.0], atol=1e-12)

    def test_shortened_last_step(self):
        tr = integrate_ode(lambda t, x: -x, [1.0], 0.0, 1.05, 0.1)
        assert tr.t_final == 1.05
        assert np.all(np.diff(tr.times) > 0)
        assert abs(tr.final[0] - math.exp(-1.05)) < 1e-6

    def test_fourth_order(self):
        errs = []
        for dt in (0.1, 0.05):
            tr = integrate_ode(lambda t, x: np.array([x[1], -x[0]]), (1.0, 0.0), 0.0, 2.0, dt)
            errs.append(abs(tr.final[0] - math.cos(2.0)))
        assert 12 < errs[0] / errs[1] < 20

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_carries_time(self):
        with pytest.raises(DivergenceError) as info:
            integrate_ode(lambda t, x: x * x, [1.0], 0.0, 2.0, 0.01)
        assert 0.9 < info.value.t_last < 1.1

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            integrate_ode(lambda t, x: x, [1.0], 0.0, 1.0, 0.0)
        with pytest.raises(ParameterError):
            integrate_ode(lambda t, x: x, [1.0], 1.0, 1.0)

    @pytest.mark.parametrize("A", [DOUBLE_INT, np.array([[-1.0, 2.0], [-2.0, -0.3]]),
                                   np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -2.0, -2.0]])])
    def test_matches_matrix_exponential(self, A):
        x0 = np.arange(1, len(A) + 1, dtype=float)
        tr = integrate_ode(lambda t, x: A @ x, x0, 0.0, 2.0, 1e-3)
        np.testing.assert_allclose(tr.final, mat_exp(A, 2.0) @ x0, atol=1e-7)

    def test_trajectory_rejects_unsorted_times(self):
        with pytest.raises(ParameterError):
            OdeTrajectory([0.0, 0.0], [[1.0], [2.0]])


class TestQuadrature:
    def test_unit(self):
        assert quad_simpson(lambda s: 1.0, 0.0, 1.0, 2) == pytest.approx(1.0, abs=1e-15)

    def test_exact_for_cubics(self):
        assert quad_simpson(lambda s: s ** 2, 0.0, 1.0, 2) == pytest.approx(1 / 3, abs=1e-15)
        assert quad_simpson(lambda s: s ** 3 - s, -1.0, 2.0, 2) == pytest.approx(2.25, abs=1e-14)

    def test_odd_panels_rejected(self):
        with pytest.raises(ParameterError):
            quad_simpson(lambda s: s, 0.0, 1.0, 3)

    def test_gramian_integrand(self):
        B = np.array([[0.0], [1.0]])
        W = quad_simpson(lambda s: mat_exp(DOUBLE_INT, s) @ B @ B.T @ mat_exp(DOUBLE_INT, s).T, 0.0, 1.0)
        np.testing.assert_allclose(W, [[1 / 3, 1 / 2], [1 / 2, 1.0]], atol=1e-14)


class TestSolvers:
    def test_identity_solve(self):
        np.testing.assert_array_equal(solve_linear(np.eye(2), [3.0, 4.0]), [3.0, 4.0])

    def test_singular_reports_pivot(self):
        with pytest.raises(SingularMatrixError) as info:
            solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
        assert info.value.pivot < 1e-12

    def test_min_norm_fixture(self):
        R = min_norm_solve(K_CHANNEL_B, DOUBLE_INT)
        np.testing.assert_allclose(R, [[0, -1 / 3], [0, 2 / 3], [0, 1 / 3]], atol=1e-15)

    def test_rank(self):
        assert matrix_rank(K_CHANNEL_B) == 2
        assert matrix_rank(np.zeros((2, 2))) == 0

    def test_rank_deficient(self):
        with pytest.raises(RankError):
            min_norm_solve([[1.0, 1.0], [2.0, 2.0]], np.eye(2))

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, (2, 4), elements=small), arrays(np.float64, (2, 3), elements=small))
    def test_min_norm_property(self, A, rhs):
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] < 1e-3 * sv[0] or sv[0] < 1e-6:
            return
        X = min_norm_solve(A, rhs)
        np.testing.assert_allclose(A @ X, rhs, atol=1e-10 * max(1.0, np.abs(rhs).max()) / (sv[-1] / sv[0]))
        np.testing.assert_allclose(X, np.linalg.pinv(A) @ rhs, atol=1e-8)
