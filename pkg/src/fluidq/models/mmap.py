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

"""Marked Markovian arrival processes."""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from fluidq.fluid.diagnostics import (
    Diagnostic,
    check_nonnegative,
    check_off_diagonal,
    check_row_sums,
    check_shape,
)
from fluidq.matcore import as_matrix, stationary_vector


@dataclass(frozen=True)
class MMAP:
    """MMAP[L] with hidden-transition matrix d0 and one arrival matrix per type."""

    d0: np.ndarray
    d: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "d0", as_matrix(self.d0, "D0"))
        arrivals = tuple(
            as_matrix(m, f"D{i}") for i, m in enumerate(self.d, start=1)
        )
        if not arrivals:
            raise ValueError("An MMAP needs at least one arrival type")
        object.__setattr__(self, "d", arrivals)

    @property
    def n_types(self) -> int:
        return len(self.d)

    @property
    def order(self) -> int:
        return self.d0.shape[0]

    def generator(self) -> np.ndarray:
        return self.d0 + sum(self.d)

    def validate(self, tol: float = 1e-10) -> list[Diagnostic]:
        diagnostics: list[Diagnostic] = []
        shape = (self.order, self.order)
        ok = check_shape(diagnostics, "D0", self.d0, shape)
        for i, m in enumerate(self.d, start=1):
            ok &= check_shape(diagnostics, f"D{i}", m, shape)
        if not ok:
            return diagnostics
        check_off_diagonal(diagnostics, "D0", self.d0, tol)
        for i, m in enumerate(self.d, start=1):
            check_nonnegative(diagnostics, f"D{i}", m, tol)
        check_row_sums(diagnostics, "D0 + sum D", [self.d0, *self.d], tol)
        return diagnostics

    def stationary(self) -> np.ndarray:
        return stationary_vector(self.generator())

    def type_rates(self) -> np.ndarray:
        """Long-run arrival rate of each type."""
        theta = self.stationary()
        return np.array([theta @ m.sum(axis=1) for m in self.d])

    def scaled(self, factor: float) -> "MMAP":
        """Multiply every arrival matrix by factor; the D0 diagonal follows."""
        if factor < 0:
            raise ValueError("Scale factor must be nonnegative")
        d = tuple(factor * m for m in self.d)
        d0 = self.d0 - np.diag(np.diag(self.d0))
        d0 -= np.diag(d0.sum(axis=1) + sum(m.sum(axis=1) for m in d))
        return MMAP(d0, d)


def poisson(rate: float, n_types: int = 1, split=None) -> MMAP:
    """Poisson arrivals, optionally marked with probabilities ``split``."""
    split = np.full(n_types, 1.0 / n_types) if split is None else np.asarray(split)
    return MMAP(np.array([[-rate]]), tuple(np.array([[rate * s]]) for s in split))


def two_state_mmap(
    lam: float, q1: float, q2: float, p1: float, p2: float
) -> MMAP:
    """Two-type MMAP with a two-state environment.

    Arrivals occur at rate lam in both states; state i lasts an exponential
    time with mean q_i and marks an arrival as type 1 with probability p_i.
    """
    d0 = np.array(
        [[-lam - 1.0 / q1, 1.0 / q1], [1.0 / q2, -lam - 1.0 / q2]], dtype=float
    )
    d1 = np.diag([lam * p1, lam * p2])
    d2 = np.diag([lam * (1 - p1), lam * (1 - p2)])
    return MMAP(d0, (d1, d2))


def ipp(rates, sojourns) -> MMAP:
    """Markov-modulated Poisson process over a cycle of environment states.

    State i has arrival rate rates[i] and mean sojourn time sojourns[i]; on
    leaving, the environment moves uniformly to one of the other states.
    Zero rates give an interrupted Poisson process.
    """
    rates = np.asarray(rates, dtype=float)
    sojourns = np.asarray(sojourns, dtype=float)
    n = rates.size
    if n == 1:
        return poisson(float(rates[0]))
    switch = (1.0 / sojourns)[:, None] * (np.ones((n, n)) - np.eye(n)) / (n - 1)
    d1 = np.diag(rates)
    d0 = switch - np.diag(switch.sum(axis=1) + rates)
    return MMAP(d0, (d1,))


def calibrate_load(mmap: MMAP, demands, rho: float) -> MMAP:
    """Scale the arrival matrices so that sum_l rate_l * demand_l = rho.

    Args:
        mmap: Arrival process to rescale.
        demands: Mean work brought by one arrival of each type.
        rho: Target load.
    """
    demands = np.asarray(demands, dtype=float)
    if demands.shape != (mmap.n_types,):
        raise ValueError("Need one mean demand per arrival type")

    def load(factor: float) -> float:
        return float(mmap.scaled(factor).type_rates() @ demands)

    base = load(1.0)
    if base <= 0:
        raise ValueError("Arrival process carries no load")
    guess = rho / base
    upper = 2.0 * guess
    while load(upper) < rho:
        upper *= 2.0
    factor = scipy.optimize.brentq(
        lambda f: load(f) - rho, 0.0, upper, xtol=1e-15, rtol=1e-14
    )
    return mmap.scaled(factor)
