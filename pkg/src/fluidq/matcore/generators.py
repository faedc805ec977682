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

"""Generator checks and stationary vectors of continuous-time Markov chains."""

from dataclasses import dataclass

import numpy as np

from fluidq.errors import NotAGenerator, Reducible
from fluidq.utils.constants import GENERATOR_TOL


@dataclass(frozen=True)
class GeneratorCheck:
    is_generator: bool
    is_subgenerator: bool
    max_row_sum_abs: float


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Convert to a finite 2-D float array.

    Args:
        a: Array-like input. Zero-sized dimensions are allowed.
        name: Used in error messages.

    Returns:
        A float64 array with ndim == 2.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def off_diagonal(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    if out.shape[0] == out.shape[1]:
        np.fill_diagonal(out, 0.0)
    return out


def check_generator(g, tol: float = GENERATOR_TOL) -> GeneratorCheck:
    g = as_matrix(g, "generator")
    if g.size == 0:
        return GeneratorCheck(True, True, 0.0)
    off_ok = bool(np.all(off_diagonal(g) >= -tol))
    sums = g.sum(axis=1)
    max_abs = float(np.max(np.abs(sums)))
    return GeneratorCheck(
        is_generator=off_ok and max_abs <= tol,
        is_subgenerator=off_ok and bool(np.all(sums <= tol)),
        max_row_sum_abs=max_abs,
    )


def is_subgenerator(a: np.ndarray, tol: float = GENERATOR_TOL) -> bool:
    if a.shape[0] != a.shape[1]:
        return False
    return check_generator(a, tol).is_subgenerator


def stationary_vector(g, tol: float = GENERATOR_TOL) -> np.ndarray:
    """Solve v G = 0, v e = 1 for a generator with a unique stationary law.

    Raises:
        NotAGenerator: If G is not square or fails the generator check.
        Reducible: If the augmented system [G | e] is rank deficient.
    """
    g = as_matrix(g, "generator")
    n = g.shape[0]
    if g.shape != (n, n):
        raise NotAGenerator(f"Generator must be square, got shape {g.shape}")
    if n == 0:
        return np.zeros(0)
    check = check_generator(g, tol)
    if not check.is_generator:
        raise NotAGenerator(
            f"Not a generator (max |row sum| = {check.max_row_sum_abs:.3e}, "
            f"tol {tol:.1e})"
        )

    augmented = np.hstack([g, np.ones((n, 1))])
    if np.linalg.matrix_rank(augmented.T) < n:
        raise Reducible("Stationary vector is not unique")

    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(augmented.T, rhs, rcond=None)
    v = np.maximum(v, 0.0)
    return v / v.sum()
