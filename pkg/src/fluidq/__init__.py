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

"""Stationary analysis of colored Markov-modulated fluid queues."""

__version__ = "0.1.0"

from fluidq.config import SimConfig, SolverConfig
from fluidq.errors import (
    FluidQueueError,
    HypothesisViolated,
    InvalidBlocks,
    InvalidPoint,
    InvalidThresholds,
    ModelValidationError,
    NoConvergence,
    NotAGenerator,
    NotRecurrent,
    PhaseBlowup,
    Reducible,
    SingularPencil,
    SpecError,
    Unstable,
)
from fluidq.fluid import (
    ClassicModel,
    ColoredModel,
    JumpModel,
    PHDist,
    background_marginal,
    classic_level_cdf,
    density,
    expand_jumps,
    from_classic,
    joint_marginal,
    jump_density,
    jump_level_cdf,
    jump_top_color_dist,
    level_cdf,
    pde_residual,
    reduce_to_classic,
    solve_classic,
    solve_colored,
    solve_jumps,
    top_color_dist,
)
from fluidq.models import (
    MMAP,
    CascadeSpec,
    LCFSSpec,
    build_cascade,
    build_lcfs,
    cascade_queue_length_dist,
    lcfs_loss_probability,
    solve_finite_qbd,
)
from fluidq.sim import SimResult, simulate
