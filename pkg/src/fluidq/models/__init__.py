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

from fluidq.models.cascade import (
    CascadeSpec,
    build_cascade,
    cascade_queue_length_dist,
)
from fluidq.models.lcfs import (
    LCFSSpec,
    build_lcfs,
    lcfs_loss_probability,
    lcfs_queue_length_dist,
    loss_from_marginal,
    mean_queue_length,
)
from fluidq.models.mmap import MMAP, calibrate_load, ipp, poisson, two_state_mmap
from fluidq.models.qbd import expanded_service_ph, qbd_phase_count, solve_finite_qbd
