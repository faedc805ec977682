# Copyright 2025 Poke & Wiggle GmbH. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Discrete-event simulation of colored fluid queues.

The sample path is piecewise linear: the level rises at rate one in an
up-state, falls at rate one in a down-state and stays at zero on the
boundary. Fluid is kept as a stack of (color, amount) entries; the top entry
selects the active rate matrices, so draining through a color boundary
switches the background dynamics without any event.

Jump models are simulated through their jump-free expansion with the
up-intervals censored from every time average. Running the up-phases of an
expanded jump is exactly a simulation of the absorbing PH chain that draws
the jump size.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from fluidq.config import SimConfig
from fluidq.fluid.colored import ColoredModel
from fluidq.fluid.jumps import JumpModel, expand_jumps

logger = logging.getLogger(__name__)

BOUNDARY, DOWN, UP = 0, 1, 2


@dataclass(frozen=True)
class SimResult:
    """Across-replication means and standard errors of time averages.

    ``background_marginal[c, i]`` is the fraction of (uncensored) time with
    top color c (0 = empty) and the background in down-state i.
    """

    grid: np.ndarray
    level_cdf: np.ndarray
    level_cdf_se: np.ndarray
    gamma: np.ndarray
    gamma_se: np.ndarray
    background_marginal: np.ndarray
    background_marginal_se: np.ndarray
    utilization: float
    utilization_se: float
    replications: int


class _EventTable:
    """Competing exponential clocks of every (mode, color, state)."""

    def __init__(self, model: ColoredModel):
        self.model = model
        self._cache: dict[tuple[int, int, int], tuple] = {}

    def _build(self, mode: int, c: int, i: int) -> tuple:
        m = self.model
        rates: list[float] = []
        actions: list[tuple[int, int, int]] = []

        def add(row: np.ndarray, action_mode: int, color: int, skip: int = -1):
            for j in np.flatnonzero(row > 0):
                if j != skip:
                    rates.append(float(row[j]))
                    actions.append((action_mode, color, int(j)))

        if mode == BOUNDARY:
            add(m.t0_mm[i], BOUNDARY, 0, skip=i)
            for d in m.colors():
                add(m.t0_mp[d][i], UP, d)
        elif mode == DOWN:
            add(m.t_mm[c][i], DOWN, c, skip=i)
            add(m.t_mp[c][i], UP, c)
            for d in m.targets[c]:
                add(m.cross_mp(c, d)[i], UP, d)
        else:
            add(m.t_pp[c][i], UP, c, skip=i)
            add(m.t_pm[c][i], DOWN, c)
            for d in m.targets[c]:
                add(m.cross_pp(c, d)[i], UP, d)

        total = float(sum(rates))
        return total, np.cumsum(rates), actions

    def lookup(self, mode: int, c: int, i: int) -> tuple:
        key = (mode, c, i)
        entry = self._cache.get(key)
        if entry is None:
            entry = self._cache[key] = self._build(mode, c, i)
        return entry


class _Recorder:
    def __init__(self, model: ColoredModel, cfg: SimConfig, censor_up: bool):
        self.grid = np.asarray(cfg.sample_grid, dtype=float)
        self.warmup, self.horizon = cfg.warmup, cfg.horizon
        self.censor_up = censor_up
        self.total = 0.0
        self.busy = 0.0
        self.cdf = np.zeros(self.grid.size)
        self.gamma = np.zeros(model.n_colors + 1)
        self.marginal = np.zeros((model.n_colors + 1, model.n_minus))

    def record(self, t, dt, level, mode, color, state):
        a = max(t, self.warmup)
        b = min(t + dt, self.horizon)
        if b <= a or (self.censor_up and mode == UP):
            return
        d = b - a
        if mode == DOWN:
            start = level - (a - t)
            self.cdf += np.clip(d - (start - self.grid), 0.0, d)
        elif mode == UP:
            start = level + (a - t)
            self.cdf += np.clip(self.grid - start, 0.0, d)
        else:
            self.cdf += np.where(self.grid >= 0.0, d, 0.0)
        self.total += d
        self.gamma[color] += d
        if mode != UP:
            self.marginal[color, state] += d
        if mode != BOUNDARY:
            self.busy += d

    def summary(self) -> tuple:
        if self.total <= 0:
            raise RuntimeError("No time was recorded; increase the horizon")
        return (
            self.cdf / self.total,
            self.gamma / self.total,
            self.marginal / self.total,
            self.busy / self.total,
        )


def _check_stack(stack: list[list]) -> None:
    colors = [color for color, amount in stack if amount > 0]
    if any(b <= a for a, b in zip(colors, colors[1:])):
        raise RuntimeError(f"Color stack out of order: {stack}")


def run_replication(
    model: ColoredModel,
    cfg: SimConfig,
    seed: np.random.SeedSequence,
    censor_up: bool = False,
) -> tuple:
    """One sample path; returns (cdf, gamma, marginal, utilization)."""
    rng = np.random.default_rng(seed)
    table = _EventTable(model)
    recorder = _Recorder(model, cfg, censor_up)

    t = 0.0
    mode, state = BOUNDARY, 0
    stack: list[list] = []
    level = 0.0

    while t < cfg.horizon:
        color = stack[-1][0] if stack else 0
        total, cum, actions = table.lookup(mode, color, state)
        tau = rng.exponential(1.0 / total) if total > 0 else math.inf

        if mode == DOWN and stack[-1][1] <= tau and t + stack[-1][1] < cfg.horizon:
            amount = stack.pop()[1]
            recorder.record(t, amount, level, mode, color, state)
            t += amount
            level = max(level - amount, 0.0) if stack else 0.0
            if not stack:
                mode = BOUNDARY
            continue

        dt = min(tau, cfg.horizon - t)
        recorder.record(t, dt, level, mode, color, state)
        t += dt
        if mode == DOWN:
            stack[-1][1] -= dt
            level -= dt
        elif mode == UP:
            stack[-1][1] += dt
            level += dt
        if t >= cfg.horizon:
            break

        pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
        new_mode, new_color, state = actions[min(pick, len(actions) - 1)]
        if new_mode == UP and new_color != color:
            stack.append([new_color, 0.0])
        mode = new_mode
        if cfg.check_stack:
            _check_stack(stack)

    return recorder.summary()


def _replication_task(args) -> tuple:
    return run_replication(*args)


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])


def simulate(model: JumpModel | ColoredModel, cfg: SimConfig) -> SimResult:
    """Independent replications of the fluid queue.

    Replication r draws from the r-th child of SeedSequence(cfg.seed), so the
    result is identical for any worker count.
    """
    if isinstance(model, JumpModel):
        colored, _ = expand_jumps(model)
        censor_up = True
    else:
        colored = model.check()
        censor_up = False

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    tasks = [(colored, cfg, seed, censor_up) for seed in seeds]
    logger.info(
        "Simulating %d replications (horizon %g, %d workers)",
        cfg.replications,
        cfg.horizon,
        cfg.workers,
    )
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            results = list(executor.map(_replication_task, tasks))
    else:
        results = [_replication_task(task) for task in tasks]

    cdf, cdf_se = _mean_se(np.array([r[0] for r in results]))
    gamma, gamma_se = _mean_se(np.array([r[1] for r in results]))
    marginal, marginal_se = _mean_se(np.array([r[2] for r in results]))
    util, util_se = _mean_se(np.array([r[3] for r in results]))
    return SimResult(
        grid=np.asarray(cfg.sample_grid, dtype=float),
        level_cdf=cdf,
        level_cdf_se=cdf_se,
        gamma=gamma,
        gamma_se=gamma_se,
        background_marginal=marginal,
        background_marginal_se=marginal_se,
        utilization=float(util),
        utilization_se=float(util_se),
        replications=cfg.replications,
    )
