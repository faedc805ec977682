import numpy as np
import pytest
import scipy.linalg
from conftest import random_generator
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fluidq.errors import (
    InvalidBlocks,
    NotAGenerator,
    Reducible,
    SingularPencil,
)
from fluidq.fluid.diagnostics import check_off_diagonal
from fluidq.matcore import (
    check_generator,
    expm,
    kronecker_sylvester,
    nare_residual,
    solve_nare,
    solve_sylvester,
    stationary_vector,
)
from fluidq.matcore.generators import off_diagonal
from fluidq.matcore.nare import _doubling, _newton


class TestStationaryVector:
    """Stationary vectors of irreducible generators."""

    def test_two_state_chain(self):
        """Detailed balance of a two-state chain."""
        v = stationary_vector([[-1.0, 1.0], [2.0, -2.0]])
        np.testing.assert_allclose(v, [2 / 3, 1 / 3], atol=1e-14)

    def test_single_state(self):
        """A one-state chain sits in its only state."""
        np.testing.assert_allclose(stationary_vector([[0.0]]), [1.0])

    def test_matches_uniformized_power_iteration(self, rng):
        """vG = 0 agrees with the limit of the uniformized DTMC."""
        g = random_generator(rng, 4)
        q = float(np.max(-np.diag(g)))
        p = np.eye(4) + g / (2 * q)
        v_power = np.full(4, 0.25)
        for _ in range(5000):
            v_power = v_power @ p
        v = stationary_vector(g)
        np.testing.assert_allclose(v @ g, 0.0, atol=1e-12)
        np.testing.assert_allclose(v, v_power, atol=1e-10)

    def test_rejects_bad_row_sums(self):
        """Rows that do not sum to zero are not a generator."""
        with pytest.raises(NotAGenerator):
            stationary_vector([[-1.0, 0.5], [1.0, -1.0]])

    def test_rejects_reducible(self):
        """Two closed classes leave the stationary vector undetermined."""
        g = scipy.linalg.block_diag(
            [[-1.0, 1.0], [1.0, -1.0]], [[-2.0, 2.0], [3.0, -3.0]]
        )
        with pytest.raises(Reducible):
            stationary_vector(g)

    def test_generator_check_flags(self):
        """A leaking row makes a sub-generator but not a generator."""
        check = check_generator([[-1.0, 0.5], [0.0, -1.0]])
        assert check.is_subgenerator
        assert not check.is_generator


class TestOffDiagonal:
    """The off-diagonal part shared by generator checks and diagnostics."""

    def test_zeroes_diagonal_only(self):
        """The diagonal is cleared and everything else kept."""
        out = off_diagonal([[-1.0, 2.0], [3.0, -4.0]])
        np.testing.assert_array_equal(out, [[0.0, 2.0], [3.0, 0.0]])

    def test_diagnostic_ignores_diagonal(self):
        """Only the negative rate off the diagonal is reported."""
        diagnostics = []
        block = np.array([[-5.0, -0.1], [1.0, -1.0]])
        check_off_diagonal(diagnostics, "D0", block, 1e-10)
        assert [(d.block, d.row) for d in diagnostics] == [("D0", 0)]

class TestExpm:
    """Matrix exponential by uniformization or Pade."""

    def test_zero_matrix(self):
        """exp(0) is the identity."""
        np.testing.assert_array_equal(expm(np.zeros((3, 3)), 5.0), np.eye(3))

    def test_scalar(self):
        """exp(-1) to machine precision."""
        assert expm([[-1.0]])[0, 0] == pytest.approx(0.3678794411714423, abs=1e-15)

    def test_subgenerator_matches_taylor_series(self, rng):
        """Uniformization agrees with a 60-term Taylor series."""
        a = random_generator(rng, 3)
        a[0, 0] -= 0.5
        t = 0.7
        term = np.eye(3)
        taylor = np.eye(3)
        for k in range(1, 60):
            term = term @ (a * t) / k
            taylor = taylor + term
        np.testing.assert_allclose(expm(a, t), taylor, atol=1e-12)

    def test_large_time_is_nonnegative(self, rng):
        """Scaling and squaring keeps long horizons stable and nonnegative."""
        a = random_generator(rng, 4) * 20.0
        result = expm(a, 50.0)
        assert np.all(result >= 0.0)
        np.testing.assert_allclose(result.sum(axis=1), 1.0, atol=1e-10)

    def test_general_matrix_uses_pade(self):
        """A rotation generator is not a sub-generator and goes to scipy."""
        a = np.array([[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_allclose(expm(a, 1.3), scipy.linalg.expm(1.3 * a))

    def test_negative_time(self):
        """Only t >= 0 is accepted."""
        with pytest.raises(ValueError):
            expm([[-1.0]], -1.0)

    @pytest.mark.parametrize("s, t", [(0.1, 0.4), (1.0, 2.5), (3.0, 7.0)])
    def test_semigroup(self, rng, s, t):
        """exp(G s) exp(G t) = exp(G (s + t))."""
        g = random_generator(rng, 5)
        np.testing.assert_allclose(
            expm(g, s) @ expm(g, t), expm(g, s + t), atol=1e-12
        )

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_stationary_vector_is_invariant(self, rng, t):
        """The stationary vector of G is a fixed point of exp(G t)."""
        g = random_generator(rng, 5)
        v = stationary_vector(g)
        np.testing.assert_allclose(v @ expm(g, t), v, atol=1e-12)


class TestSylvester:
    """Solutions of A X + X B + C = 0."""

    def test_scalar(self):
        """-2 x - x + 3 = 0 gives x = 1."""
        x = solve_sylvester([[-2.0]], [[-1.0]], [[3.0]])
        np.testing.assert_allclose(x, [[1.0]])

    def test_decoupled(self):
        """Diagonal A decouples the rows."""
        x = solve_sylvester(np.diag([-1.0, -3.0]), [[-1.0]], [[2.0], [4.0]])
        np.testing.assert_allclose(x, [[1.0], [1.0]])

    def test_matches_kronecker_system(self, rng):
        """The residual vanishes and both solvers agree."""
        a = random_generator(rng, 3) - np.eye(3)
        b = random_generator(rng, 2) - np.eye(2)
        c = rng.uniform(size=(3, 2))
        x = solve_sylvester(a, b, c)
        np.testing.assert_allclose(a @ x + x @ b + c, 0.0, atol=1e-12)
        np.testing.assert_allclose(x, kronecker_sylvester(a, b, c), atol=1e-12)

    def test_bartels_stewart_path(self, rng):
        """Above the direct threshold scipy's solver gives the same answer."""
        a = random_generator(rng, 12) - np.eye(12)
        b = random_generator(rng, 10) - np.eye(10)
        c = rng.uniform(size=(12, 10))
        x = solve_sylvester(a, b, c, direct_max=8)
        np.testing.assert_allclose(x, kronecker_sylvester(a, b, c), atol=1e-10)

    def test_singular_pencil(self):
        """Eigenvalues of A and -B coincide."""
        with pytest.raises(SingularPencil):
            solve_sylvester([[-1.0]], [[1.0]], [[1.0]])

    def test_shape_mismatch(self):
        """C must be rows(A) x cols(B)."""
        with pytest.raises(ValueError):
            solve_sylvester([[-1.0]], [[-1.0]], [[1.0, 2.0]])


class TestNare:
    """Minimal nonnegative solution of the Riccati equation."""

    def test_recurrent_scalar_root(self):
        """Psi^2 - 3 Psi + 2 = 0 has minimal root 1."""
        psi = solve_nare([[-2.0]], [[2.0]], [[1.0]], [[-1.0]])
        np.testing.assert_allclose(psi, [[1.0]], atol=1e-12)

    def test_transient_scalar_root(self):
        """2 Psi^2 - 3 Psi + 1 = 0 has minimal root 1/2."""
        psi = solve_nare([[-1.0]], [[1.0]], [[2.0]], [[-2.0]])
        np.testing.assert_allclose(psi, [[0.5]], atol=1e-12)

    def test_linear_case(self):
        """Tmp = 0 leaves a Sylvester equation with root 1/2."""
        psi = solve_nare([[-1.0]], [[1.0]], [[0.0]], [[-1.0]])
        np.testing.assert_allclose(psi, [[0.5]], atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(
        a=st.floats(min_value=0.1, max_value=10.0),
        b=st.floats(min_value=0.1, max_value=10.0),
    )
    def test_scalar_minimal_root(self, a, b):
        """b Psi^2 - (a + b) Psi + a = 0 has roots 1 and a / b."""
        assume(abs(a - b) > 0.1 * max(a, b))
        psi = solve_nare([[-a]], [[a]], [[b]], [[-b]])
        assert psi[0, 0] == pytest.approx(min(1.0, a / b), abs=1e-9)

    def test_matrix_case_is_stochastic(self, rng):
        """A drift-negative chain returns to S_- with probability one."""
        tpp = random_generator(rng, 3)
        tpm = rng.uniform(1.0, 2.0, size=(3, 2))
        np.fill_diagonal(tpp, np.diag(tpp) - tpm.sum(axis=1))
        tmm = random_generator(rng, 2)
        tmp = rng.uniform(0.0, 0.1, size=(2, 3))
        np.fill_diagonal(tmm, np.diag(tmm) - tmp.sum(axis=1))

        psi = solve_nare(tpp, tpm, tmp, tmm)
        assert np.all(psi >= 0.0)
        np.testing.assert_allclose(psi.sum(axis=1), 1.0, atol=1e-10)
        residual = nare_residual(tpp, tpm, tmp, tmm, psi)
        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

        newton = _newton(tpp, tpm, tmp, tmm, 1e-14, 200, 8)
        np.testing.assert_allclose(newton, psi, atol=1e-10)

    def test_doubling_matches_sylvester_when_tmp_vanishes(self, rng):
        """Doubling and the general path reduce to the Sylvester solve."""
        tpp = random_generator(rng, 3)
        tpm = rng.uniform(1.0, 2.0, size=(3, 2))
        np.fill_diagonal(tpp, np.diag(tpp) - tpm.sum(axis=1))
        tmm = random_generator(rng, 2)
        tmp = np.zeros((2, 3))

        direct = solve_sylvester(tpp, tmm, tpm)
        iterated = _doubling(tpp, tpm, tmp, tmm, 1e-15, 200)
        np.testing.assert_allclose(iterated, direct, atol=1e-10)
        general = solve_nare(tpp, tpm, tmp, tmm, fast_path=False)
        np.testing.assert_allclose(general, direct, atol=1e-10)

    def test_invalid_blocks(self):
        """Rows of the joint generator must not exceed zero."""
        with pytest.raises(InvalidBlocks):
            solve_nare([[-1.0]], [[2.0]], [[1.0]], [[-1.0]])

    def test_empty_blocks(self):
        """No up-phases gives an empty solution."""
        psi = solve_nare(
            np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), -np.eye(2)
        )
        assert psi.shape == (0, 2)
