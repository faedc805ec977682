import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.integrate
from conftest import random_colored_model, reducible_colored_model

from fluidq.errors import HypothesisViolated, InvalidPoint, NotRecurrent
from fluidq.fluid.classic import ClassicModel, solve_classic
from fluidq.fluid.colored import (
    ColoredModel,
    background_marginal,
    density,
    from_classic,
    gamma_general,
    gamma_linear,
    level_cdf,
    level_mean,
    reduce_to_classic,
    solve_colored,
    top_color_dist,
    validate,
)
from fluidq.matcore import is_subgenerator, nare_residual


def scalar_classic() -> ClassicModel:
    return ClassicModel(
        t_pp=[[-2.0]],
        t_pm=[[2.0]],
        t_mp=[[1.0]],
        t_mm=[[-1.0]],
        t0_mm=[[-1.0]],
        t0_mp=[[1.0]],
    )


def two_color_scalar(t0_mp_2: float = 0.0) -> ColoredModel:
    """Color 2 is only reachable from the boundary, at rate t0_mp_2."""
    return ColoredModel(
        n_minus=1,
        t_pp={1: [[-2.0]], 2: [[-2.0]]},
        t_pm={1: [[2.0]], 2: [[2.0]]},
        t_mp={1: [[1.0]], 2: [[1.0]]},
        t_mm={1: [[-1.0]], 2: [[-1.0]]},
        t0_mm=[[-1.0 - t0_mp_2]],
        t0_mp={1: [[1.0]], 2: [[t0_mp_2]]},
    )


class TestValidate:
    """Structural diagnostics of colored models."""

    def test_well_formed(self, rng):
        """A generated model passes every check."""
        assert validate(random_colored_model(rng, 2)) == []

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("adjacent_only", [False, True])
    def test_generated_models_are_valid(self, seed, adjacent_only):
        """Row sums vanish for every block size the generators produce."""
        rng = np.random.default_rng(500 + seed)
        model = random_colored_model(rng, 3, adjacent_only=adjacent_only)
        assert validate(model) == []
        assert validate(reducible_colored_model(rng, 3)) == []

    def test_multi_phase_blocks_are_valid(self):
        """Blocks larger than 1 x 1 keep their off-diagonal rates and pass."""
        models = [random_colored_model(np.random.default_rng(s), 2) for s in range(10)]
        big = [(m, c) for m in models for c in m.colors() if m.n_plus(c) > 1]
        assert big
        for model, c in big:
            assert validate(model) == []
            off = model.t_pp[c] - np.diag(np.diag(model.t_pp[c]))
            assert np.all(off >= 0) and np.any(off > 0)

    def test_negative_off_diagonal(self):
        """A negative rate inside Tmm is reported against Tmm."""
        model = from_classic(
            ClassicModel(
                t_pp=[[-2.0]],
                t_pm=[[1.0, 1.0]],
                t_mp=[[0.5], [0.0]],
                t_mm=[[0.0, -0.5], [1.0, -1.0]],
                t0_mm=[[-1.0, 0.0], [0.0, -1.0]],
                t0_mp=[[1.0], [1.0]],
            )
        )
        blocks = {d.block for d in validate(model)}
        assert "Tmm[1]" in blocks

    def test_bad_row_sum_names_color(self, rng):
        """The row-sum diagnostic names the color and the size of the error."""
        model = random_colored_model(rng, 2)
        t_pm = dict(model.t_pm)
        t_pm[2] = t_pm[2].copy()
        t_pm[2][0, 0] += 0.01
        diagnostics = validate(replace(model, t_pm=t_pm))
        assert [d.block for d in diagnostics] == ["plus rows of color 2"]
        assert "1.000e-02" in diagnostics[0].message

    def test_constructor_needs_color_keys(self):
        """Colors must be numbered from 1."""
        with pytest.raises(ValueError):
            ColoredModel(
                n_minus=1,
                t_pp={2: [[-1.0]]},
                t_pm={2: [[1.0]]},
                t_mp={2: [[0.0]]},
                t_mm={2: [[0.0]]},
                t0_mm=[[0.0]],
                t0_mp={2: [[0.0]]},
            )


class TestSolveColored:
    """Backward recursion and stationary laws."""

    def test_single_color_matches_classic(self):
        """One color reproduces the classic solution."""
        classic = solve_classic(scalar_classic())
        sol = solve_colored(from_classic(scalar_classic()))
        np.testing.assert_allclose(sol.psi[1], classic.psi, atol=1e-12)
        np.testing.assert_allclose(sol.k[1], classic.k, atol=1e-12)
        np.testing.assert_allclose(sol.p_minus, classic.p_minus, atol=1e-12)
        assert level_cdf(sol, 0.0) == pytest.approx(1 / 3, abs=1e-12)

    def test_unreachable_color(self):
        """A color with no way in has zero probability."""
        sol = solve_colored(two_color_scalar())
        gamma = top_color_dist(sol)
        np.testing.assert_allclose(gamma, [1 / 3, 2 / 3, 0.0], atol=1e-12)

    def test_targets_follow_stored_blocks(self, rng):
        """Each color lists the higher colors it has a stored block to."""
        model = random_colored_model(rng, 4, adjacent_only=True)
        assert model.targets == {1: [2], 2: [3], 3: [4], 4: []}
        full = random_colored_model(rng, 3)
        assert full.targets == {1: [2, 3], 2: [3], 3: []}

    def test_not_recurrent(self):
        """Positive drift is flagged and blocks stationary quantities."""
        model = from_classic(
            ClassicModel(
                t_pp=[[-1.0]],
                t_pm=[[1.0]],
                t_mp=[[2.0]],
                t_mm=[[-2.0]],
                t0_mm=[[-1.0]],
                t0_mp=[[1.0]],
            )
        )
        sol = solve_colored(model)
        assert not sol.recurrent
        assert sol.p_minus is None
        with pytest.raises(NotRecurrent):
            level_cdf(sol, 1.0)

    @pytest.mark.parametrize("seed", range(50))
    def test_invariants_on_random_models(self, seed):
        """Psi stochastic, K sub-generators, Riccati residuals and normalization."""
        rng = np.random.default_rng(seed)
        model = random_colored_model(rng, int(rng.integers(1, 4)))
        sol = solve_colored(model)
        assert sol.recurrent

        for c in model.colors():
            higher = range(c + 1, model.n_colors + 1)
            t_pm_eff = model.t_pm[c] + sum(
                (model.cross_pp(c, d) @ sol.psi[d] for d in higher),
                np.zeros_like(model.t_pm[c]),
            )
            t_mm_eff = model.t_mm[c] + sum(
                (model.cross_mp(c, d) @ sol.psi[d] for d in higher),
                np.zeros_like(model.t_mm[c]),
            )
            residual = nare_residual(
                model.t_pp[c], t_pm_eff, model.t_mp[c], t_mm_eff, sol.psi[c]
            )
            np.testing.assert_allclose(residual, 0.0, atol=1e-11)
            np.testing.assert_allclose(sol.psi[c].sum(axis=1), 1.0, atol=1e-10)
            assert is_subgenerator(sol.k[c])

        gamma = top_color_dist(sol)
        assert gamma.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(gamma >= -1e-14)
        # S_- carries half of the mass of every nonempty top color
        expected = np.concatenate([gamma[:1], gamma[1:] / 2.0])
        np.testing.assert_allclose(
            background_marginal(sol).sum(axis=1), expected, atol=1e-10
        )

        grid = np.linspace(0.0, 10.0 * level_mean(sol), 25)
        cdf = np.array([level_cdf(sol, x) for x in grid])
        assert cdf[0] == pytest.approx(sol.p_minus.sum(), abs=1e-14)
        assert np.all(np.diff(cdf) >= -1e-12)
        assert cdf[-1] >= 0.99
        assert level_cdf(sol, math.inf) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_sylvester_path_matches_riccati_path(self, seed):
        """Without same-color re-entry both solvers give the same Psi."""
        rng = np.random.default_rng(1000 + seed)
        model = random_colored_model(rng, int(rng.integers(2, 4)), same_color_up=False)
        fast = solve_colored(model)
        general = solve_colored(model, force_general=True)
        assert set(fast.methods.values()) == {"sylvester"}
        assert set(general.methods.values()) == {"nare"}
        for c in model.colors():
            np.testing.assert_allclose(fast.psi[c], general.psi[c], atol=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_linear_gamma_matches_general(self, seed):
        """The adjacent-color recursion agrees with the dense solve."""
        rng = np.random.default_rng(2000 + seed)
        model = random_colored_model(rng, int(rng.integers(2, 5)), adjacent_only=True)
        assert model.is_adjacent_only()
        sol = solve_colored(model)
        np.testing.assert_allclose(
            gamma_linear(sol, sol.p_minus, 2.0),
            gamma_general(sol, sol.p_minus, 2.0),
            atol=1e-10,
        )

    def test_linear_gamma_needs_adjacent_colors(self, rng):
        """Skipping a color rules out the linear recursion."""
        model = random_colored_model(rng, 3)
        sol = solve_colored(model)
        with pytest.raises(ValueError):
            gamma_linear(sol, sol.p_minus, 2.0)


class TestReduceToClassic:
    """Collapse of colors that only differ in their up-phases."""

    @pytest.mark.parametrize("seed", range(20))
    def test_stacked_psi_matches_classic(self, seed):
        """The classic Psi is the stack of the per-color Psi blocks."""
        rng = np.random.default_rng(3000 + seed)
        model = reducible_colored_model(rng, int(rng.integers(2, 4)))
        classic = solve_classic(reduce_to_classic(model))
        colored = solve_colored(model)
        stacked = np.vstack([colored.psi[c] for c in model.colors()])
        np.testing.assert_allclose(classic.psi, stacked, atol=1e-10)
        np.testing.assert_allclose(classic.p_minus, colored.p_minus, atol=1e-10)

    def test_single_color_is_identity(self):
        """Reducing a one-color model returns the original blocks."""
        model = scalar_classic()
        reduced = reduce_to_classic(from_classic(model))
        for name in ("t_pp", "t_pm", "t_mp", "t_mm", "t0_mm", "t0_mp"):
            np.testing.assert_array_equal(getattr(reduced, name), getattr(model, name))

    def test_violation_names_tmm(self, rng):
        """Each failed condition is listed."""
        model = random_colored_model(rng, 2)
        with pytest.raises(HypothesisViolated) as info:
            reduce_to_classic(model)
        assert any("Tmm" in failure for failure in info.value.failures)


class TestDensity:
    """Joint density over per-color levels."""

    def test_invalid_points(self, rng):
        """All-zero, negative and wrongly sized points are rejected."""
        sol = solve_colored(random_colored_model(rng, 2))
        with pytest.raises(InvalidPoint):
            density(sol, [0.0, 0.0])
        with pytest.raises(InvalidPoint):
            density(sol, [-1.0, 1.0])
        with pytest.raises(InvalidPoint):
            density(sol, [1.0])

    def test_unreachable_sequence_has_zero_density(self):
        """Color 2 never sits on color 1 when no transition stacks it there."""
        sol = solve_colored(two_color_scalar(t0_mp_2=0.5))
        plus, minus = density(sol, [0.5, 0.5])
        np.testing.assert_array_equal(plus, [0.0])
        np.testing.assert_array_equal(minus, [0.0])

    @pytest.mark.slow
    def test_quadrature_normalization_two_colors(self, rng):
        """Atom, both axes and the interior integrate to one."""
        model = random_colored_model(rng, 2, max_block=2)
        sol = solve_colored(model)

        def mass(xs) -> float:
            plus, minus = density(sol, xs)
            return float(plus.sum() + minus.sum())

        on_1, _ = scipy.integrate.quad(lambda x: mass([x, 0.0]), 0.0, np.inf)
        on_2, _ = scipy.integrate.quad(lambda y: mass([0.0, y]), 0.0, np.inf)
        both, _ = scipy.integrate.dblquad(
            lambda y, x: mass([x, y]), 0.0, np.inf, 0.0, np.inf, epsabs=1e-10
        )
        total = sol.p_minus.sum() + on_1 + on_2 + both
        assert total == pytest.approx(1.0, abs=1e-6)
