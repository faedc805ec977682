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

import os
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from fluidq.utils import constants


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings for every analytic solve.

    Args:
        generator_tol: Absolute tolerance on row sums and off-diagonal signs
            when checking generator and sub-generator matrices.
        nare_tol: Stop the doubling iteration once successive iterates differ
            by at most this much in the infinity norm.
        nare_max_iter: Iteration cap shared by doubling and Newton.
        residual_tol: Largest accepted NARE residual, relative to the block
            norms. Above it a Newton polish step is tried, then NoConvergence.
        sylvester_direct_max: Sylvester problems with both sides at most this
            size are solved through the Kronecker linear system.
        sylvester_fast_path: Use a Sylvester solve for colors without
            same-color down-to-up transitions.
        linear_gamma_recursion: Use the color-by-color recursion for the top
            color law when the model only moves between adjacent colors.
        max_qbd_phases: Refuse QBD baselines whose expanded service
            representation is larger than this.
    """

    generator_tol: float = constants.GENERATOR_TOL
    nare_tol: float = constants.NARE_TOL
    nare_max_iter: int = constants.NARE_MAX_ITER
    residual_tol: float = constants.NARE_RESIDUAL_TOL
    sylvester_direct_max: int = constants.SYLVESTER_DIRECT_MAX
    sylvester_fast_path: bool = True
    linear_gamma_recursion: bool = True
    max_qbd_phases: int = constants.MAX_QBD_PHASES

    def __post_init__(self):
        for name in ("generator_tol", "nare_tol", "residual_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.nare_max_iter < 1:
            raise ValueError("nare_max_iter must be at least 1")
        if self.sylvester_direct_max < 0:
            raise ValueError("sylvester_direct_max must be nonnegative")
        if self.max_qbd_phases < 1:
            raise ValueError("max_qbd_phases must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULT_SOLVER_CONFIG = SolverConfig()


def resolve_config(config: SolverConfig | None) -> SolverConfig:
    return DEFAULT_SOLVER_CONFIG if config is None else config


def default_workers() -> int:
    """Worker cap from FLUIDQ_THREADS, else the machine's CPU count."""
    raw = os.environ.get(constants.THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(
                f"{constants.THREADS_ENV_VAR} must be an integer, got {raw!r}"
            )
        return max(1, value)
    return os.cpu_count() or 1


@dataclass
class SimConfig:
    """Settings for a Monte Carlo run.

    Args:
        horizon: Simulated time per replication.
        warmup: Prefix of each replication excluded from the time averages.
        replications: Number of independent replications.
        seed: Root seed. Replication r uses the r-th spawned child of
            SeedSequence(seed), so results do not depend on scheduling.
        sample_grid: Fluid levels at which the empirical CDF is recorded.
        workers: Parallel worker processes. None resolves to FLUIDQ_THREADS
            or the CPU count, capped by the replication count.
        check_stack: Verify the color-stack ordering after every event.
    """

    horizon: float = 1e5
    warmup: float = 1e3
    replications: int = 10
    seed: int = 0
    sample_grid: tuple[float, ...] = field(
        default_factory=lambda: tuple(np.linspace(0.0, 10.0, 11))
    )
    workers: int | None = None
    check_stack: bool = False

    def __post_init__(self):
        if not self.horizon > self.warmup:
            raise ValueError("horizon must exceed warmup")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        self.sample_grid = tuple(float(x) for x in self.sample_grid)
        if self.workers is None:
            self.workers = default_workers()
        self.workers = max(1, min(int(self.workers), self.replications))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["sample_grid"] = list(self.sample_grid)
        return data
