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

"""The classic Markov-modulated fluid queue.

The fluid level rises at rate one while the background chain sits in S_+ and
falls at rate one in S_-. At level zero the chain is governed by T0mm and can
leave the boundary into S_+ through T0mp.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fluidq.config import SolverConfig, resolve_config
from fluidq.errors import ModelValidationError, Unstable
from fluidq.fluid.diagnostics import (
    Diagnostic,
    check_nonnegative,
    check_off_diagonal,
    check_row_sums,
    check_shape,
)
from fluidq.matcore import as_matrix, expm, solve_nare, stationary_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassicModel:
    """Rate matrices of a classic fluid queue.

    Args:
        t_pp: S_+ to S_+ rates.
        t_pm: S_+ to S_- rates.
        t_mp: S_- to S_+ rates.
        t_mm: S_- to S_- rates.
        t0_mm: Boundary rates within S_-.
        t0_mp: Boundary rates from S_- into S_+ (the fluid leaves zero).
    """

    t_pp: np.ndarray
    t_pm: np.ndarray
    t_mp: np.ndarray
    t_mm: np.ndarray
    t0_mm: np.ndarray
    t0_mp: np.ndarray

    def __post_init__(self):
        for name in ("t_pp", "t_pm", "t_mp", "t_mm", "t0_mm", "t0_mp"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))

    @property
    def n_plus(self) -> int:
        return self.t_pm.shape[0]

    @property
    def n_minus(self) -> int:
        return self.t_pm.shape[1]

    def generator(self) -> np.ndarray:
        return np.block([[self.t_pp, self.t_pm], [self.t_mp, self.t_mm]])

    def validate(self, tol: float = 1e-10) -> list[Diagnostic]:
        diagnostics: list[Diagnostic] = []
        p, m = self.n_plus, self.n_minus
        shapes_ok = all(
            [
                check_shape(diagnostics, "Tpp", self.t_pp, (p, p)),
                check_shape(diagnostics, "Tmp", self.t_mp, (m, p)),
                check_shape(diagnostics, "Tmm", self.t_mm, (m, m)),
                check_shape(diagnostics, "T0mm", self.t0_mm, (m, m)),
                check_shape(diagnostics, "T0mp", self.t0_mp, (m, p)),
            ]
        )
        if not shapes_ok:
            return diagnostics
        check_off_diagonal(diagnostics, "Tpp", self.t_pp, tol)
        check_nonnegative(diagnostics, "Tpm", self.t_pm, tol)
        check_nonnegative(diagnostics, "Tmp", self.t_mp, tol)
        check_off_diagonal(diagnostics, "Tmm", self.t_mm, tol)
        check_off_diagonal(diagnostics, "T0mm", self.t0_mm, tol)
        check_nonnegative(diagnostics, "T0mp", self.t0_mp, tol)
        check_row_sums(diagnostics, "[Tpp | Tpm]", [self.t_pp, self.t_pm], tol)
        check_row_sums(diagnostics, "[Tmp | Tmm]", [self.t_mp, self.t_mm], tol)
        check_row_sums(diagnostics, "[T0mm | T0mp]", [self.t0_mm, self.t0_mp], tol)
        return diagnostics

    def check(self, tol: float = 1e-10) -> "ClassicModel":
        diagnostics = self.validate(tol)
        if diagnostics:
            raise ModelValidationError(diagnostics)
        return self


@dataclass(frozen=True)
class ClassicSolution:
    psi: np.ndarray
    k: np.ndarray
    p_minus: np.ndarray
    drift: tuple[float, float]
    model: ClassicModel = field(repr=False)

    @property
    def stable(self) -> bool:
        return self.drift[0] < self.drift[1]


def mean_drift(model: ClassicModel, tol: float = 1e-10) -> tuple[float, float]:
    """Stationary time fractions (xi_+ e, xi_- e) of the background chain."""
    xi = stationary_vector(model.generator(), tol)
    return float(xi[: model.n_plus].sum()), float(xi[model.n_plus :].sum())


def solve_classic(
    model: ClassicModel, config: SolverConfig | None = None
) -> ClassicSolution:
    """Stationary solution of a classic fluid queue.

    Raises:
        ModelValidationError: If the rate matrices are malformed.
        Unstable: If the mean drift is not strictly negative.
        Reducible: If the boundary generator has no unique stationary vector.
    """
    config = resolve_config(config)
    model.check(config.generator_tol)

    drift = mean_drift(model, config.generator_tol)
    if not drift[0] < drift[1]:
        raise Unstable(
            f"Mean drift is nonnegative: xi_+ e = {drift[0]:.6g}, "
            f"xi_- e = {drift[1]:.6g}"
        )

    psi = solve_nare(
        model.t_pp,
        model.t_pm,
        model.t_mp,
        model.t_mm,
        tol=config.nare_tol,
        max_iter=config.nare_max_iter,
        generator_tol=config.generator_tol,
        residual_tol=config.residual_tol,
        direct_max=config.sylvester_direct_max,
    )
    k = model.t_pp + psi @ model.t_mp

    p = stationary_vector(model.t0_mm + model.t0_mp @ psi, config.generator_tol)
    r = p @ model.t0_mp
    mass_up = np.linalg.solve(-k.T, r).sum() if model.n_plus else 0.0
    p_minus = p / (p.sum() + 2.0 * mass_up)

    logger.info(
        "Solved classic fluid queue (|S+|=%d, |S-|=%d), P[level=0]=%.6g",
        model.n_plus,
        model.n_minus,
        p_minus.sum(),
    )
    return ClassicSolution(psi=psi, k=k, p_minus=p_minus, drift=drift, model=model)


def classic_density(sol: ClassicSolution, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Densities (pi_plus(x), pi_minus(x)) at a level x > 0."""
    if not x > 0:
        raise ValueError(f"Density is defined for x > 0, got {x}")
    v = sol.p_minus @ sol.model.t0_mp @ expm(sol.k, x)
    return v, v @ sol.psi


def classic_level_cdf(sol: ClassicSolution, x: float) -> float:
    """P[level <= x]."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    base = float(sol.p_minus.sum())
    if sol.model.n_plus == 0:
        return base
    w = np.linalg.solve(-sol.k.T, sol.p_minus @ sol.model.t0_mp)
    ones = np.ones(sol.model.n_plus)
    if math.isinf(x):
        tail = ones
    else:
        tail = ones - expm(sol.k, x) @ ones
    return base + 2.0 * float(w @ tail)


def classic_level_mean(sol: ClassicSolution) -> float:
    """E[level] = 2 p_- T0mp (-K)^{-2} e."""
    if sol.model.n_plus == 0:
        return 0.0
    w = np.linalg.solve(-sol.k.T, sol.p_minus @ sol.model.t0_mp)
    w = np.linalg.solve(-sol.k.T, w)
    return 2.0 * float(w.sum())
