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

"""Colored fluid queues with upward phase-type fluid jumps.

A jump of color c' and type l adds a PH(alpha, U) amount of fluid on top of
the stack. Replacing each jump by an up-interval of the same length gives a
jump-free colored fluid queue over the enlarged up-sets

    S_+^(c) = S_- x {(l, m) : l a jump type of color c, m a phase of its PH},

ordered background state first, then type, then phase. Stationary quantities
of the jump model are those of the enlarged model censored to the periods
where the fluid does not increase, which drops the factor two of the
jump-free normalization.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from fluidq.config import SolverConfig, resolve_config
from fluidq.errors import ModelValidationError
from fluidq.fluid.colored import (
    ColoredModel,
    ColoredSolution,
    cdf_from,
    chain_vector,
    color_masses,
    gamma_from,
    mean_from,
    normalizer,
    require_recurrent,
    solve_colored,
)
from fluidq.fluid.diagnostics import (
    Diagnostic,
    check_nonnegative,
    check_off_diagonal,
    check_row_sums,
    check_shape,
)
from fluidq.fluid.phase_type import PHDist
from fluidq.matcore import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JumpModel:
    """Rate matrices and jump laws of a colored fluid queue with jumps.

    Args:
        n_colors: Number of colors C.
        t_mm: Tmm[c] for c = 0..C, background rates while color c drains
            (c = 0 is the empty queue).
        ph: ph[c], the jump-size laws of color c, one per jump type.
        q_up: Q2[(c, c')] for 0 <= c < c', one rate matrix per jump type of
            c'. A jump starts a new color c' on top of color c.
        q_same: Qsame[c], one rate matrix per jump type of c. A jump adds to
            the top color c.
    """

    n_colors: int
    t_mm: dict[int, np.ndarray]
    ph: dict[int, tuple[PHDist, ...]]
    q_up: dict[tuple[int, int], tuple[np.ndarray, ...]] = field(default_factory=dict)
    q_same: dict[int, tuple[np.ndarray, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_colors < 1:
            raise ValueError("A jump model needs at least one color")
        t_mm = {int(c): as_matrix(b, f"Tmm[{c}]") for c, b in self.t_mm.items()}
        if sorted(t_mm) != list(range(self.n_colors + 1)):
            raise ValueError(f"Tmm must be keyed by 0..{self.n_colors}")
        ph = {int(c): tuple(v) for c, v in self.ph.items() if len(v)}
        if any(not 1 <= c <= self.n_colors for c in ph):
            raise ValueError("ph must be keyed by colors 1..C")
        q_up = {
            (int(c), int(d)): tuple(as_matrix(q, f"Q[{c}][{d}]") for q in qs)
            for (c, d), qs in self.q_up.items()
        }
        for c, d in q_up:
            if not 0 <= c < d <= self.n_colors:
                raise ValueError(f"Invalid jump color pair ({c}, {d})")
        q_same = {
            int(c): tuple(as_matrix(q, f"Q[{c}]") for q in qs)
            for c, qs in self.q_same.items()
        }
        if any(not 1 <= c <= self.n_colors for c in q_same):
            raise ValueError("Same-color jumps must be keyed by colors 1..C")
        object.__setattr__(self, "t_mm", t_mm)
        object.__setattr__(self, "ph", ph)
        object.__setattr__(self, "q_up", q_up)
        object.__setattr__(self, "q_same", q_same)

    @property
    def n_minus(self) -> int:
        return self.t_mm[0].shape[0]

    def types(self, c: int) -> tuple[PHDist, ...]:
        return self.ph.get(c, ())

    def validate(self, tol: float = 1e-10) -> list[Diagnostic]:
        diagnostics: list[Diagnostic] = []
        m = self.n_minus
        for c, block in self.t_mm.items():
            if check_shape(diagnostics, f"Tmm[{c}]", block, (m, m)):
                check_off_diagonal(diagnostics, f"Tmm[{c}]", block, tol)
        for c, dists in self.ph.items():
            for ell, dist in enumerate(dists, start=1):
                diagnostics.extend(dist.validate(f"ph[{c}][{ell}]", tol))

        def check_jumps(name: str, qs: tuple, target: int) -> list[np.ndarray]:
            if len(qs) != len(self.types(target)):
                diagnostics.append(
                    Diagnostic(
                        name,
                        None,
                        f"{len(qs)} rate matrices for {len(self.types(target))} "
                        f"jump types of color {target}",
                    )
                )
            good = []
            for ell, q in enumerate(qs, start=1):
                if check_shape(diagnostics, f"{name}[{ell}]", q, (m, m)):
                    check_nonnegative(diagnostics, f"{name}[{ell}]", q, tol)
                    good.append(q)
            return good

        outflow: dict[int, list[np.ndarray]] = {c: [] for c in self.t_mm}
        for (c, d), qs in self.q_up.items():
            outflow[c] += check_jumps(f"Q[{c}][{d}]", qs, d)
        for c, qs in self.q_same.items():
            outflow[c] += check_jumps(f"Q[{c}]", qs, c)
        if diagnostics:
            return diagnostics
        for c, block in self.t_mm.items():
            check_row_sums(diagnostics, f"rows of color {c}", [block] + outflow[c], tol)
        return diagnostics

    def check(self, tol: float = 1e-10) -> "JumpModel":
        diagnostics = self.validate(tol)
        if diagnostics:
            raise ModelValidationError(diagnostics)
        return self


@dataclass(frozen=True)
class StateMap:
    """Index of the enlarged up-sets: triples (background a, type l, phase m)."""

    states: dict[int, tuple[tuple[int, int, int], ...]]

    def __post_init__(self):
        lookup = {
            c: {triple: i for i, triple in enumerate(triples)}
            for c, triples in self.states.items()
        }
        object.__setattr__(self, "_lookup", lookup)

    def size(self, c: int) -> int:
        return len(self.states.get(c, ()))

    def index(self, c: int, a: int, ell: int, m: int) -> int:
        return self._lookup[c][(a, ell, m)]

    @classmethod
    def for_model(cls, jm: JumpModel) -> "StateMap":
        states = {}
        for c in range(1, jm.n_colors + 1):
            states[c] = tuple(
                (a, ell, m)
                for a in range(jm.n_minus)
                for ell, dist in enumerate(jm.types(c))
                for m in range(dist.order)
            )
        return cls(states)


def _spread(
    qs: tuple[np.ndarray, ...], dists: tuple[PHDist, ...], n: int
) -> np.ndarray:
    """(i, (a, l, m)) entries Q_l[i, a] * alpha_l[m]."""
    width = sum(d.order for d in dists)
    out = np.zeros((n, n, width))
    start = 0
    for q, dist in zip(qs, dists):
        block = q[:, :, None] * dist.alpha[None, None, :]
        out[:, :, start : start + dist.order] = block
        start += dist.order
    return out.reshape(n, n * width)


def expand_jumps(jm: JumpModel) -> tuple[ColoredModel, StateMap]:
    """Replace every jump by an up-interval of the same length."""
    jm.check()
    n = jm.n_minus
    state_map = StateMap.for_model(jm)
    eye = np.eye(n)

    t_pp, t_pm, t_mp, t0_mp = {}, {}, {}, {}
    for c in range(1, jm.n_colors + 1):
        dists = jm.types(c)
        if dists:
            phases = scipy.linalg.block_diag(*[dist.U for dist in dists])
            exits = np.concatenate([dist.exit_rates for dist in dists])[:, None]
        else:
            phases = np.zeros((0, 0))
            exits = np.zeros((0, 1))
        t_pp[c] = np.kron(eye, phases)
        t_pm[c] = np.kron(eye, exits)
        t_mp[c] = _spread(jm.q_same.get(c, ()), dists, n)
        t0_mp[c] = _spread(jm.q_up.get((0, c), ()), dists, n)

    t_mp_up = {
        (c, d): _spread(qs, jm.types(d), n) for (c, d), qs in jm.q_up.items() if c > 0
    }
    model = ColoredModel(
        n_minus=n,
        t_pp=t_pp,
        t_pm=t_pm,
        t_mp=t_mp,
        t_mm={c: jm.t_mm[c] for c in range(1, jm.n_colors + 1)},
        t0_mm=jm.t_mm[0],
        t0_mp=t0_mp,
        t_mp_up=t_mp_up,
    )
    return model, state_map


@dataclass(frozen=True)
class JumpSolution:
    jump_model: JumpModel = field(repr=False)
    colored: ColoredSolution
    state_map: StateMap = field(repr=False)
    p_minus: np.ndarray | None

    @property
    def recurrent(self) -> bool:
        return self.colored.recurrent

    @property
    def n_colors(self) -> int:
        return self.jump_model.n_colors


def solve_jumps(jm: JumpModel, config: SolverConfig | None = None) -> JumpSolution:
    config = resolve_config(config)
    model, state_map = expand_jumps(jm)
    colored = solve_colored(model, config)
    p_minus = None
    if colored.recurrent:
        p = colored.p_direction
        p_minus = p / normalizer(colored, p, weight=1.0)
        logger.info("Solved jump model, P[level=0]=%.6g", p_minus.sum())
    return JumpSolution(
        jump_model=jm, colored=colored, state_map=state_map, p_minus=p_minus
    )


def jump_density(js: JumpSolution, xs) -> np.ndarray:
    """Density of the per-color levels xs over S_- (up-intervals censored)."""
    require_recurrent(js.colored)
    top, v = chain_vector(js.colored, js.p_minus, xs)
    return v @ js.colored.psi[top]


def jump_level_cdf(js: JumpSolution, x: float) -> float:
    require_recurrent(js.colored)
    return cdf_from(js.colored, js.p_minus, x, weight=1.0)


def jump_level_mean(js: JumpSolution) -> float:
    require_recurrent(js.colored)
    return mean_from(js.colored, js.p_minus, weight=1.0)


def jump_top_color_dist(
    js: JumpSolution, config: SolverConfig | None = None
) -> np.ndarray:
    require_recurrent(js.colored)
    return gamma_from(js.colored, js.p_minus, 1.0, config)


def joint_marginal(js: JumpSolution) -> np.ndarray:
    """Matrix m[c, i] = P[top color c, background state i]."""
    require_recurrent(js.colored)
    masses = color_masses(js.colored, js.p_minus)
    rows = [js.p_minus] + [
        masses[c] @ js.colored.psi[c] for c in range(1, js.n_colors + 1)
    ]
    return np.vstack(rows)
