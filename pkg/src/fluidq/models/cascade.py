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

"""Multi-level cascade FCFS queue.

Level-1 jobs arrive from a MAP into a buffer of capacity N (arrivals finding
N level-1 jobs are lost). While a level-c job is served it spawns level-(c+1)
jobs at rate gamma[c]; a spawned job preempts its parent and is served
depth-first before the parent resumes.

As a fluid queue, the fluid is the remaining work of the level-1 job in
service and its descendants, colored by level. The background S_- tracks the
MAP phase and the number of level-1 jobs, MAP phase major. At level zero an
artificial unit-rate dwell state (i, n), n > 1, hands the next waiting job
to service; those periods are censored when queue lengths are reported.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from fluidq.fluid.jumps import JumpModel, JumpSolution, joint_marginal
from fluidq.fluid.phase_type import PHDist
from fluidq.models.mmap import MMAP, calibrate_load

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CascadeSpec:
    """MAP/cascade/1/N queue.

    Args:
        arrivals: Single-type MAP of level-1 jobs.
        levels: Service demand of a level-c job, c = 1..C.
        gamma: gamma[c-1] is the spawn rate of level-(c+1) jobs during
            level-c service, c = 1..C-1.
        capacity: Buffer size N for level-1 jobs, including the one in service.
    """

    arrivals: MMAP
    levels: tuple[PHDist, ...]
    gamma: tuple[float, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.arrivals.n_types != 1:
            raise ValueError("Cascade arrivals must be a single-type MAP")
        if not self.levels:
            raise ValueError("Need at least one level")
        if len(self.gamma) != len(self.levels) - 1:
            raise ValueError(
                f"{len(self.levels)} levels need {len(self.levels) - 1} spawn rates"
            )
        if any(g < 0 for g in self.gamma):
            raise ValueError("Spawn rates must be nonnegative")
        if self.capacity < 1:
            raise ValueError("Capacity must be at least 1")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def truncated(self, n_levels: int) -> "CascadeSpec":
        if not 1 <= n_levels <= self.n_levels:
            raise ValueError(f"Can truncate to 1..{self.n_levels} levels")
        return replace(
            self,
            levels=self.levels[:n_levels],
            gamma=self.gamma[: n_levels - 1],
        )

    def work(self) -> float:
        """Mean total work of a level-1 job and all its descendants."""
        w = self.levels[-1].mean()
        for c in range(self.n_levels - 2, -1, -1):
            w = self.levels[c].mean() * (1.0 + self.gamma[c] * w)
        return w

    def load(self) -> float:
        return float(self.arrivals.type_rates()[0] * self.work())

    def with_load(self, rho: float) -> "CascadeSpec":
        return replace(self, arrivals=calibrate_load(self.arrivals, [self.work()], rho))


def _count_shift(n: int) -> np.ndarray:
    """Arrival increments the count, saturating at n."""
    shift = np.eye(n, k=1)
    shift[n - 1, n - 1] = 1.0
    return shift


def build_cascade(spec: CascadeSpec) -> JumpModel:
    d0, d1 = spec.arrivals.d0, spec.arrivals.d[0]
    M, N, C = spec.arrivals.order, spec.capacity, spec.n_levels
    eye_m, eye_n = np.eye(M), np.eye(N)
    first = np.zeros((N, N))
    first[0, 0] = 1.0

    t_mm = {}
    moving = np.kron(d0, eye_n) + np.kron(d1, _count_shift(N))
    for c in range(1, C + 1):
        spawn = spec.gamma[c - 1] if c < C else 0.0
        t_mm[c] = moving - spawn * np.eye(M * N)

    dwell = -np.eye(N)
    dwell[0, 0] = 0.0
    t_mm[0] = np.kron(d0, first) + np.kron(eye_m, dwell)
    start = np.kron(d1, first) + np.kron(eye_m, np.eye(N, k=-1))

    q_up = {(0, 1): (start,)}
    for c in range(1, C):
        q_up[(c, c + 1)] = (spec.gamma[c - 1] * np.eye(M * N),)
    ph = {c: (spec.levels[c - 1],) for c in range(1, C + 1)}

    logger.info("Cascade queue: %d levels, %d background states", C, M * N)
    return JumpModel(n_colors=C, t_mm=t_mm, ph=ph, q_up=q_up)


def cascade_queue_length_dist(js: JumpSolution, spec: CascadeSpec) -> np.ndarray:
    """P[n level-1 jobs], n = 0..N."""
    M, N = spec.arrivals.order, spec.capacity
    m = joint_marginal(js)
    boundary = m[0].reshape(M, N)
    busy = m[1:].sum(axis=0).reshape(M, N)

    dist = np.zeros(N + 1)
    dist[0] = boundary[:, 0].sum()
    dist[1:] = busy.sum(axis=0)
    return dist / dist.sum()
