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

# ============================================================================
# Numerical defaults
# ============================================================================

GENERATOR_TOL = 1e-10
NARE_TOL = 1e-14
NARE_MAX_ITER = 200
NARE_RESIDUAL_TOL = 1e-9
SYLVESTER_DIRECT_MAX = 8
SYLVESTER_SEPARATION_TOL = 1e-12
MAX_QBD_PHASES = 1200

# Terms of the uniformization series are dropped below this Poisson weight
UNIFORMIZATION_EPS = 1e-18

# ============================================================================
# Environment
# ============================================================================

THREADS_ENV_VAR = "FLUIDQ_THREADS"

# ============================================================================
# Output files
# ============================================================================

CDF_FILE = "cdf.csv"
GAMMA_FILE = "gamma.csv"
DRIFTS_FILE = "drifts.csv"
MARGINALS_FILE = "marginals.csv"
LOSS_FILE = "loss.csv"
QUEUE_LENGTH_FILE = "queue_length.csv"
SWEEP_FILE = "sweep.csv"
SIMULATION_FILE = "simulation.csv"

FLOAT_FORMAT = ".17g"
