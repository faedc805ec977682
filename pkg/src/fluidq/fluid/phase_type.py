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

import math
from dataclasses import dataclass

import numpy as np

from fluidq.fluid.diagnostics import Diagnostic
from fluidq.matcore import as_matrix, expm


@dataclass(frozen=True)
class PHDist:
    """Phase-type distribution: absorption time of a chain started in alpha
    with transient sub-generator U."""

    alpha: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        U = as_matrix(np.atleast_2d(self.U), "U")
        if alpha.ndim != 1 or U.shape != (alpha.size, alpha.size):
            raise ValueError(
                f"alpha of length {alpha.size} does not match U of shape {U.shape}"
            )
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "U", U)

    @property
    def order(self) -> int:
        return self.alpha.size

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.U.sum(axis=1)

    def validate(self, name: str = "PH", tol: float = 1e-10) -> list[Diagnostic]:
        diagnostics = []
        if np.any(self.alpha < -tol):
            diagnostics.append(Diagnostic(name, None, "alpha has negative entries"))
        if abs(self.alpha.sum() - 1.0) > 1e-12:
            diagnostics.append(
                Diagnostic(name, None, f"alpha sums to {self.alpha.sum():.12g}")
            )
        off = self.U - np.diag(np.diag(self.U))
        if np.any(off < -tol):
            diagnostics.append(Diagnostic(name, None, "U has negative off-diagonals"))
        exits = self.exit_rates
        if np.any(exits < -tol) or not np.any(exits > tol):
            diagnostics.append(
                Diagnostic(name, None, "U needs nonnegative exit rates, one positive")
            )
        return diagnostics

    def moment(self, k: int) -> float:
        """k-th raw moment, k! alpha (-U)^{-k} e."""
        v = self.alpha
        for _ in range(k):
            v = np.linalg.solve(-self.U.T, v)
        return math.factorial(k) * float(v.sum())

    def mean(self) -> float:
        return self.moment(1)

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return 1.0 - float(self.alpha @ expm(self.U, x) @ np.ones(self.order))

    def sample(self, rng: np.random.Generator) -> float:
        """Draw one value by running the absorbing chain."""
        state = rng.choice(self.order, p=self.alpha / self.alpha.sum())
        total = 0.0
        rates = -np.diag(self.U)
        while True:
            total += rng.exponential(1.0 / rates[state])
            probs = np.append(np.maximum(self.U[state], 0.0), self.exit_rates[state])
            probs[state] = 0.0
            nxt = rng.choice(self.order + 1, p=probs / probs.sum())
            if nxt == self.order:
                return total
            state = nxt


def exponential(rate: float) -> PHDist:
    return PHDist(np.array([1.0]), np.array([[-float(rate)]]))


def erlang(k: int, mean: float) -> PHDist:
    """Erlang distribution with k phases and the given mean."""
    if k < 1 or mean <= 0:
        raise ValueError("Erlang needs k >= 1 and a positive mean")
    rate = k / mean
    U = -rate * np.eye(k) + rate * np.eye(k, k=1)
    alpha = np.zeros(k)
    alpha[0] = 1.0
    return PHDist(alpha, U)


def hyperexponential(probs, rates) -> PHDist:
    probs = np.asarray(probs, dtype=float)
    rates = np.asarray(rates, dtype=float)
    return PHDist(probs, -np.diag(rates))
