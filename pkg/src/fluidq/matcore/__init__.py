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

from fluidq.matcore.expm import expm
from fluidq.matcore.generators import (
    GeneratorCheck,
    as_matrix,
    check_generator,
    is_subgenerator,
    stationary_vector,
)
from fluidq.matcore.nare import nare_residual, solve_nare
from fluidq.matcore.sylvester import kronecker_sylvester, solve_sylvester

__all__ = [
    "GeneratorCheck",
    "as_matrix",
    "check_generator",
    "expm",
    "is_subgenerator",
    "kronecker_sylvester",
    "nare_residual",
    "solve_nare",
    "solve_sylvester",
    "stationary_vector",
]
