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

import logging

import numpy as np
import scipy.linalg

from fluidq.errors import SingularPencil
from fluidq.matcore.generators import as_matrix
from fluidq.utils.constants import SYLVESTER_DIRECT_MAX, SYLVESTER_SEPARATION_TOL

logger = logging.getLogger(__name__)


def _check_inputs(a, b, c) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    c = as_matrix(c, "C")
    m, n = c.shape
    if a.shape != (m, m):
        raise ValueError(f"A must be {m}x{m} to match C, got {a.shape}")
    if b.shape != (n, n):
        raise ValueError(f"B must be {n}x{n} to match C, got {b.shape}")
    return a, b, c


def _check_separation(a: np.ndarray, b: np.ndarray, tol: float) -> None:
    """Raise SingularPencil when A and -B share an eigenvalue."""
    eig_a = np.linalg.eigvals(a)
    eig_b = np.linalg.eigvals(b)
    gaps = np.abs(eig_a[:, None] + eig_b[None, :])
    scale = max(1.0, np.linalg.norm(a, np.inf) + np.linalg.norm(b, np.inf))
    if gaps.min() <= tol * scale:
        raise SingularPencil(
            f"A and -B share an eigenvalue (separation {gaps.min():.3e})"
        )


def kronecker_sylvester(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve A X + X B + C = 0 through the vectorized (mn)x(mn) system."""
    m, n = c.shape
    # column-stacked vec: vec(AX + XB) = (I_n (x) A + B^T (x) I_m) vec(X)
    system = np.kron(np.eye(n), a) + np.kron(b.T, np.eye(m))
    x = np.linalg.solve(system, -c.reshape(-1, order="F"))
    return x.reshape((m, n), order="F")


def solve_sylvester(
    a,
    b,
    c,
    direct_max: int = SYLVESTER_DIRECT_MAX,
    separation_tol: float = SYLVESTER_SEPARATION_TOL,
) -> np.ndarray:
    """Solve A X + X B + C = 0.

    Small problems (both sides at most ``direct_max``) use the Kronecker
    system; larger ones use scipy's Schur-based Bartels-Stewart solver.

    Args:
        a: m x m matrix.
        b: n x n matrix.
        c: m x n matrix.
        direct_max: Size threshold for the Kronecker path.
        separation_tol: Relative eigenvalue gap below which the equation is
            treated as singular.

    Returns:
        The m x n solution X.

    Raises:
        SingularPencil: If A and -B have a common eigenvalue.
    """
    a, b, c = _check_inputs(a, b, c)
    m, n = c.shape
    if m == 0 or n == 0:
        return np.zeros((m, n))

    _check_separation(a, b, separation_tol)

    if max(m, n) <= direct_max:
        return kronecker_sylvester(a, b, c)

    logger.debug("Bartels-Stewart Sylvester solve for %dx%d", m, n)
    return scipy.linalg.solve_sylvester(a, b, -c)
