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

"""Matrix exponentials.

Sub-generators go through uniformization, which only ever adds and multiplies
nonnegative numbers. Everything else is handed to scipy's Pade-based expm.
"""

import math

import numpy as np
import scipy.linalg

from fluidq.matcore.generators import as_matrix, is_subgenerator
from fluidq.utils.constants import GENERATOR_TOL, UNIFORMIZATION_EPS


def expm(a, t: float = 1.0, tol: float = GENERATOR_TOL) -> np.ndarray:
    """Compute e^{A t}.

    Args:
        a: Square matrix.
        t: Nonnegative time.
        tol: Tolerance for recognizing a sub-generator.

    Returns:
        The matrix exponential, entrywise nonnegative when A is a sub-generator.
    """
    a = as_matrix(a, "A")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"A must be square, got shape {a.shape}")
    if not (t >= 0 and math.isfinite(t)):
        raise ValueError(f"t must be finite and nonnegative, got {t}")
    if n == 0:
        return np.zeros((0, 0))
    if t == 0:
        return np.eye(n)
    if is_subgenerator(a, tol):
        return _expm_uniformized(a, t)
    return scipy.linalg.expm(a * t)


def _expm_uniformized(a: np.ndarray, t: float) -> np.ndarray:
    n = a.shape[0]
    q = float(np.max(-np.diag(a)))
    if q <= 0.0:
        # zero diagonal and row sums <= 0 leave nothing off the diagonal
        return np.eye(n)

    p = np.maximum(np.eye(n) + a / q, 0.0)

    # Scale so that the Poisson mean is at most one, then square back up
    squarings = max(0, math.ceil(math.log2(q * t))) if q * t > 1.0 else 0
    tau = q * t / 2.0**squarings

    weight = math.exp(-tau)
    term = np.eye(n)
    result = weight * term
    k = 0
    while True:
        k += 1
        weight *= tau / k
        term = term @ p
        result += weight * term
        if weight < UNIFORMIZATION_EPS:
            break

    for _ in range(squarings):
        result = result @ result
    return result
