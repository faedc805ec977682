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

from fluidq.fluid.classic import (
    ClassicModel,
    ClassicSolution,
    classic_density,
    classic_level_cdf,
    classic_level_mean,
    mean_drift,
    solve_classic,
)
from fluidq.fluid.colored import (
    ColoredModel,
    ColoredSolution,
    background_marginal,
    density,
    from_classic,
    level_cdf,
    level_mean,
    reduce_to_classic,
    solve_colored,
    top_color_dist,
    validate,
)
from fluidq.fluid.diagnostics import Diagnostic
from fluidq.fluid.jumps import (
    JumpModel,
    JumpSolution,
    StateMap,
    expand_jumps,
    joint_marginal,
    jump_density,
    jump_level_cdf,
    jump_level_mean,
    jump_top_color_dist,
    solve_jumps,
)
from fluidq.fluid.pde import pde_residual
from fluidq.fluid.phase_type import PHDist, erlang, exponential, hyperexponential
