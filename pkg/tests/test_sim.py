import dataclasses
import math

import numpy as np
import pytest
import scipy.integrate
from conftest import mm1_jump_model, random_colored_model

from fluidq.config import SimConfig
from fluidq.fluid.classic import ClassicModel, classic_level_cdf, solve_classic
from fluidq.fluid.colored import (
    ColoredModel,
    density,
    from_classic,
    level_cdf,
    solve_colored,
    top_color_dist,
)
from fluidq.fluid.jumps import (
    expand_jumps,
    joint_marginal,
    jump_top_color_dist,
    solve_jumps,
)
from fluidq.fluid.phase_type import exponential
from fluidq.models.lcfs import LCFSSpec, build_lcfs
from fluidq.models.mmap import poisson, two_state_mmap
from fluidq.sim import run_replication, simulate
from fluidq.sim.simulator import _check_stack


def short_config(**overrides) -> SimConfig:
    params = dict(horizon=300.0, warmup=10.0, replications=3, seed=7, workers=1)
    params.update(overrides)
    return SimConfig(**params)


def switching_boundary_model() -> ColoredModel:
    """One color over two down-states that also switch while the queue is empty."""
    return ColoredModel(
        n_minus=2,
        t_pp={1: [[-3.0]]},
        t_pm={1: [[3.0, 0.0]]},
        t_mp={1: [[0.2], [0.0]]},
        t_mm={1: [[-1.2, 1.0], [0.5, -0.5]]},
        t0_mm=[[-1.5, 1.0], [2.0, -2.0]],
        t0_mp={1: [[0.5], [0.0]]},
    )


def two_state_lcfs() -> LCFSSpec:
    return LCFSSpec(
        two_state_mmap(1.0, 2.0, 3.0, 0.1, 0.3),
        (exponential(2.0), exponential(1.0)),
        (3, 2),
    )


def two_phase_classic() -> ClassicModel:
    return ClassicModel(
        t_pp=[[-3.0, 1.0], [0.5, -2.5]],
        t_pm=[[1.5, 0.5], [1.0, 1.0]],
        t_mp=[[0.2, 0.1], [0.1, 0.1]],
        t_mm=[[-0.8, 0.5], [0.3, -0.5]],
        t0_mm=[[-1.0, 0.6], [0.4, -0.9]],
        t0_mp=[[0.2, 0.2], [0.3, 0.2]],
    )


def cdf_from_density(sol, x: float) -> float:
    """P[level <= x] of a two-color queue, integrating the joint density."""

    def mass(xs) -> float:
        pi_plus, pi_minus = density(sol, xs)
        return float(pi_plus.sum() + pi_minus.sum())

    only_1 = scipy.integrate.quad(lambda s: mass((s, 0.0)), 0.0, x)[0]
    only_2 = scipy.integrate.quad(lambda t: mass((0.0, t)), 0.0, x)[0]
    both = scipy.integrate.dblquad(
        lambda t, s: mass((s, t)), 0.0, x, 0.0, lambda s: x - s
    )[0]
    return float(sol.p_minus.sum()) + only_1 + only_2 + both


class TestSimConfig:
    """Validation of the simulation settings."""

    def test_horizon_must_exceed_warmup(self):
        """Time averages need a positive window."""
        with pytest.raises(ValueError):
            SimConfig(horizon=10.0, warmup=10.0)

    def test_workers_capped_by_replications(self):
        """No more worker processes than replications."""
        assert SimConfig(replications=2, workers=8).workers == 2

    def test_workers_from_environment(self, monkeypatch):
        """FLUIDQ_THREADS sets the default worker count."""
        monkeypatch.setenv("FLUIDQ_THREADS", "3")
        assert SimConfig(replications=10).workers == 3

    def test_bad_environment_value(self, monkeypatch):
        """A non-integer FLUIDQ_THREADS is rejected."""
        monkeypatch.setenv("FLUIDQ_THREADS", "many")
        with pytest.raises(ValueError, match="FLUIDQ_THREADS"):
            SimConfig()

    def test_to_dict_holds_declared_settings(self):
        """to_dict carries the declared fields and nothing derived."""
        cfg = SimConfig(horizon=50.0, warmup=5.0, replications=2, seed=3, workers=1)
        assert set(cfg.to_dict()) == {f.name for f in dataclasses.fields(SimConfig)}
        assert SimConfig(**cfg.to_dict()) == cfg


class TestSimulate:
    """Short runs checking determinism and the shape of the estimates."""

    def test_same_seed_same_result(self):
        """A fixed seed reproduces every estimate exactly."""
        model = mm1_jump_model()
        first = simulate(model, short_config())
        second = simulate(model, short_config())
        np.testing.assert_array_equal(first.level_cdf, second.level_cdf)
        np.testing.assert_array_equal(first.gamma, second.gamma)
        assert first.utilization == second.utilization

    def test_different_seed_differs(self):
        """Different seeds give different paths."""
        model = mm1_jump_model()
        first = simulate(model, short_config(seed=1))
        second = simulate(model, short_config(seed=2))
        assert first.utilization != second.utilization

    def test_single_replication_has_no_stderr(self):
        """Standard errors are nan with one replication."""
        result = simulate(mm1_jump_model(), short_config(replications=1))
        assert math.isnan(result.utilization_se)
        assert np.all(np.isnan(result.level_cdf_se))

    def test_shapes_and_normalization(self, rng):
        """Top-color law sums to one and the level CDF is nondecreasing."""
        model = random_colored_model(rng, 3)
        result = simulate(model, short_config(check_stack=True))
        assert result.gamma.shape == (4,)
        assert result.gamma.sum() == pytest.approx(1.0)
        assert result.background_marginal.shape == (4, model.n_minus)
        assert result.level_cdf.shape == result.grid.shape
        assert np.all(np.diff(result.level_cdf) >= -1e-12)
        assert 0.0 <= result.utilization <= 1.0

    def test_replication_returns_time_averages(self):
        """Censored replication: marginal and top-color law are both laws."""
        colored, _ = expand_jumps(mm1_jump_model())
        cfg = short_config()
        cdf, gamma, marginal, util = run_replication(
            colored, cfg, np.random.SeedSequence(3), censor_up=True
        )
        assert gamma.sum() == pytest.approx(1.0)
        assert marginal.sum() == pytest.approx(1.0)
        assert util == pytest.approx(gamma[1])


class TestBoundarySwitching:
    """Background transitions while the queue is empty."""

    def test_empty_queue_changes_state(self):
        """The boundary generator moves between down-states without crashing."""
        model = switching_boundary_model()
        result = simulate(model, short_config())
        assert result.background_marginal.sum() == pytest.approx(1.0)
        assert result.background_marginal[0, 0] > 0
        assert result.background_marginal[0, 1] > 0

    def test_two_state_lcfs_runs(self):
        """A two-state arrival process is simulated with censored up-time."""
        result = simulate(build_lcfs(two_state_lcfs()), short_config())
        assert result.background_marginal.shape == (4, 2)
        assert result.background_marginal.sum() == pytest.approx(1.0)
        assert np.all(result.background_marginal[0] > 0)


class TestCheckStack:
    """Ordering check on the color stack."""

    def test_accepts_increasing_colors(self):
        """Empty entries may sit anywhere in an increasing stack."""
        _check_stack([[1, 0.5], [2, 0.1], [4, 0.0]])

    def test_rejects_out_of_order(self):
        """A lower color above a higher one is an error."""
        with pytest.raises(RuntimeError, match="out of order"):
            _check_stack([[2, 0.5], [1, 0.3]])


@pytest.mark.slow
class TestAgreement:
    """Analytic results against long simulations."""

    def test_mm1_utilization(self):
        """M/M/1 with load 1/2 is busy half of the time."""
        cfg = SimConfig(horizon=2e4, warmup=200.0, replications=20, seed=42, workers=1)
        result = simulate(mm1_jump_model(), cfg)
        z = (result.utilization - 0.5) / result.utilization_se
        assert abs(z) <= 3

    def test_mm13_queue_length(self):
        """Simulated M/M/1/3 queue length matches (8, 4, 2, 1) / 15."""
        spec = LCFSSpec(poisson(1.0), (exponential(2.0),), (3,))
        model = build_lcfs(spec)
        cfg = SimConfig(horizon=1e4, warmup=100.0, replications=10, seed=5, workers=1)
        result = simulate(model, cfg)
        expected = jump_top_color_dist(solve_jumps(model))
        np.testing.assert_allclose(expected, np.array([8, 4, 2, 1]) / 15, atol=1e-10)
        z = (result.gamma - expected) / result.gamma_se
        assert np.all(np.abs(z) <= 4.5)

    def test_colored_model(self, rng):
        """Level CDF and top-color law of a random two-color model."""
        model = random_colored_model(rng, 2, max_block=2)
        sol = solve_colored(model)
        grid = (0.0, 0.5, 1.0, 2.0)
        cfg = SimConfig(
            horizon=5e3,
            warmup=100.0,
            replications=10,
            seed=11,
            sample_grid=grid,
            workers=1,
        )
        result = simulate(model, cfg)
        cdf = np.array([level_cdf(sol, x) for x in grid])
        z = (result.level_cdf - cdf) / result.level_cdf_se
        assert np.all(np.abs(z) <= 4.5)
        z = (result.gamma - top_color_dist(sol)) / result.gamma_se
        assert np.all(np.abs(z) <= 4.5)

    def test_joint_density_against_histogram(self, rng):
        """The integrated two-color density matches the simulated level histogram."""
        model = random_colored_model(rng, 2, max_block=2)
        sol = solve_colored(model)
        grid = (0.5, 1.0, 2.0)
        expected = np.array([cdf_from_density(sol, x) for x in grid])
        np.testing.assert_allclose(
            expected, [level_cdf(sol, x) for x in grid], atol=1e-6
        )
        cfg = SimConfig(
            horizon=5e3,
            warmup=100.0,
            replications=10,
            seed=13,
            sample_grid=grid,
            workers=1,
        )
        result = simulate(model, cfg)
        bins = np.diff(np.concatenate([[0.0], result.level_cdf]))
        expected_bins = np.diff(np.concatenate([[0.0], expected]))
        assert np.all(np.abs(bins - expected_bins) <= 0.05)
        z = (result.level_cdf - expected) / result.level_cdf_se
        assert np.all(np.abs(z) <= 4.5)

    def test_classic_level_cdf(self):
        """A two-phase classic queue simulated through its one-color form."""
        model = two_phase_classic()
        sol = solve_classic(model)
        grid = (0.0, 0.5, 1.0, 2.0, 4.0)
        cfg = SimConfig(
            horizon=5e3,
            warmup=100.0,
            replications=10,
            seed=17,
            sample_grid=grid,
            workers=1,
        )
        result = simulate(from_classic(model), cfg)
        expected = np.array([classic_level_cdf(sol, x) for x in grid])
        z = (result.level_cdf - expected) / result.level_cdf_se
        assert np.all(np.abs(z) <= 4.5)

    def test_joint_marginal_two_state_lcfs(self):
        """Censored background marginal of a two-state LCFS queue."""
        model = build_lcfs(two_state_lcfs())
        expected = joint_marginal(solve_jumps(model))
        cfg = SimConfig(horizon=1e4, warmup=100.0, replications=10, seed=19, workers=1)
        result = simulate(model, cfg)
        z = (result.background_marginal - expected) / result.background_marginal_se
        assert np.all(np.abs(z) <= 4.5)

    def test_worker_count_does_not_change_result(self):
        """Seeds are per replication, so serial and parallel runs agree."""
        model = mm1_jump_model()
        serial = simulate(model, short_config(replications=4, workers=1))
        parallel = simulate(model, short_config(replications=4, workers=2))
        np.testing.assert_array_equal(serial.level_cdf, parallel.level_cdf)
        np.testing.assert_array_equal(serial.gamma, parallel.gamma)
