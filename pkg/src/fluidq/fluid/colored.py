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

"""Colored Markov-modulated fluid queues.

Fluid carries one of the colors 1..C and is stacked so that color indices
increase from bottom to top. The top color selects the active rate matrices.
While the level falls the chain moves in S_- according to Tmm[c] of the top
color c, and it can start adding fluid of color c (Tmp[c]) or of a higher
color c' (Tmp2[c][c']). While fluid of color c is added the chain moves in
S_+^(c) and can switch to adding a higher color (Tpp2[c][c']) or start to
drain (Tpm[c]).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from fluidq.config import SolverConfig, resolve_config
from fluidq.errors import (
    HypothesisViolated,
    InvalidPoint,
    ModelValidationError,
    NotAGenerator,
    NotRecurrent,
)
from fluidq.fluid.classic import ClassicModel
from fluidq.fluid.diagnostics import (
    Diagnostic,
    check_nonnegative,
    check_off_diagonal,
    check_row_sums,
    check_shape,
)
from fluidq.matcore import (
    as_matrix,
    expm,
    solve_nare,
    solve_sylvester,
    stationary_vector,
)

logger = logging.getLogger(__name__)

Pair = tuple[int, int]


def _as_color_dict(blocks, name: str) -> dict[int, np.ndarray]:
    return {int(c): as_matrix(b, f"{name}[{c}]") for c, b in blocks.items()}


@dataclass(frozen=True)
class ColoredModel:
    """Rate matrices of a colored fluid queue with colors 1..C.

    Args:
        n_minus: Size of S_-, shared by all colors.
        t_pp: Tpp[c], rates within S_+^(c) while color c is added.
        t_pm: Tpm[c], S_+^(c) to S_- (adding stops, draining starts).
        t_mp: Tmp[c], S_- to S_+^(c) with top color c.
        t_mm: Tmm[c], rates within S_- while color c drains.
        t0_mm: Boundary rates within S_- at level zero.
        t0_mp: T0mp[c], boundary to S_+^(c).
        t_pp_up: Tpp2[(c, c')] for c < c', switch from adding c to adding c'.
        t_mp_up: Tmp2[(c, c')] for c < c', start adding c' on top of c.
    """

    n_minus: int
    t_pp: dict[int, np.ndarray]
    t_pm: dict[int, np.ndarray]
    t_mp: dict[int, np.ndarray]
    t_mm: dict[int, np.ndarray]
    t0_mm: np.ndarray
    t0_mp: dict[int, np.ndarray]
    t_pp_up: dict[Pair, np.ndarray] = field(default_factory=dict)
    t_mp_up: dict[Pair, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t_pp", "t_pm", "t_mp", "t_mm", "t0_mp"):
            object.__setattr__(self, name, _as_color_dict(getattr(self, name), name))
        object.__setattr__(self, "t0_mm", as_matrix(self.t0_mm, "t0_mm"))
        for name in ("t_pp_up", "t_mp_up"):
            blocks = {
                (int(c), int(d)): as_matrix(b, f"{name}[{c}][{d}]")
                for (c, d), b in getattr(self, name).items()
            }
            object.__setattr__(self, name, blocks)

        colors = list(range(1, len(self.t_pp) + 1))
        if not colors:
            raise ValueError("A colored model needs at least one color")
        for name in ("t_pp", "t_pm", "t_mp", "t_mm", "t0_mp"):
            if sorted(getattr(self, name)) != colors:
                raise ValueError(f"{name} must be keyed by colors 1..{len(colors)}")
        for name in ("t_pp_up", "t_mp_up"):
            for c, d in getattr(self, name):
                if not 1 <= c < d <= len(colors):
                    raise ValueError(f"{name} has invalid color pair ({c}, {d})")

    @property
    def n_colors(self) -> int:
        return len(self.t_pp)

    def colors(self) -> range:
        return range(1, self.n_colors + 1)

    def n_plus(self, c: int) -> int:
        return self.t_pm[c].shape[0]

    def cross_pp(self, c: int, d: int) -> np.ndarray:
        block = self.t_pp_up.get((c, d))
        return np.zeros((self.n_plus(c), self.n_plus(d))) if block is None else block

    def cross_mp(self, c: int, d: int) -> np.ndarray:
        block = self.t_mp_up.get((c, d))
        return np.zeros((self.n_minus, self.n_plus(d))) if block is None else block

    @cached_property
    def targets(self) -> dict[int, list[int]]:
        """Colors d > c with a stored Tpp2 or Tmp2 block out of color c."""
        out: dict[int, set[int]] = {c: set() for c in self.colors()}
        for c, d in (*self.t_pp_up, *self.t_mp_up):
            out[c].add(d)
        return {c: sorted(ds) for c, ds in out.items()}

    def cross_pairs(self) -> list[Pair]:
        """Color pairs with a nonzero Tpp2 or Tmp2 block."""
        pairs = {p for p, b in self.t_pp_up.items() if np.any(b)}
        pairs |= {p for p, b in self.t_mp_up.items() if np.any(b)}
        return sorted(pairs)

    def is_adjacent_only(self) -> bool:
        """True when fluid only enters color 1 from the boundary and colors
        are only ever stacked one step up."""
        if any(d > c + 1 for c, d in self.cross_pairs()):
            return False
        return not any(np.any(self.t0_mp[c]) for c in self.colors() if c > 1)

    def validate(self, tol: float = 1e-10) -> list[Diagnostic]:
        return validate(self, tol)

    def check(self, tol: float = 1e-10) -> "ColoredModel":
        diagnostics = validate(self, tol)
        if diagnostics:
            raise ModelValidationError(diagnostics)
        return self


def validate(model: ColoredModel, tol: float = 1e-10) -> list[Diagnostic]:
    """Every violated structural rule of a colored model, empty when valid."""
    diagnostics: list[Diagnostic] = []
    m = model.n_minus
    if not check_shape(diagnostics, "T0mm", model.t0_mm, (m, m)):
        return diagnostics
    shapes_ok = True
    for c in model.colors():
        p = model.n_plus(c)
        shapes_ok &= check_shape(diagnostics, f"Tpm[{c}]", model.t_pm[c], (p, m))
        shapes_ok &= check_shape(diagnostics, f"Tpp[{c}]", model.t_pp[c], (p, p))
        shapes_ok &= check_shape(diagnostics, f"Tmp[{c}]", model.t_mp[c], (m, p))
        shapes_ok &= check_shape(diagnostics, f"Tmm[{c}]", model.t_mm[c], (m, m))
        shapes_ok &= check_shape(diagnostics, f"T0mp[{c}]", model.t0_mp[c], (m, p))
    for (c, d), block in model.t_pp_up.items():
        shape = (model.n_plus(c), model.n_plus(d))
        shapes_ok &= check_shape(diagnostics, f"Tpp2[{c}][{d}]", block, shape)
    for (c, d), block in model.t_mp_up.items():
        shape = (m, model.n_plus(d))
        shapes_ok &= check_shape(diagnostics, f"Tmp2[{c}][{d}]", block, shape)
    if not shapes_ok:
        return diagnostics

    for c in model.colors():
        check_off_diagonal(diagnostics, f"Tpp[{c}]", model.t_pp[c], tol)
        check_nonnegative(diagnostics, f"Tpm[{c}]", model.t_pm[c], tol)
        check_nonnegative(diagnostics, f"Tmp[{c}]", model.t_mp[c], tol)
        check_off_diagonal(diagnostics, f"Tmm[{c}]", model.t_mm[c], tol)
        check_nonnegative(diagnostics, f"T0mp[{c}]", model.t0_mp[c], tol)
        higher = model.targets[c]
        check_row_sums(
            diagnostics,
            f"plus rows of color {c}",
            [model.t_pp[c], model.t_pm[c]] + [model.cross_pp(c, d) for d in higher],
            tol,
        )
        check_row_sums(
            diagnostics,
            f"minus rows of color {c}",
            [model.t_mp[c], model.t_mm[c]] + [model.cross_mp(c, d) for d in higher],
            tol,
        )
    for (c, d), block in model.t_pp_up.items():
        check_nonnegative(diagnostics, f"Tpp2[{c}][{d}]", block, tol)
    for (c, d), block in model.t_mp_up.items():
        check_nonnegative(diagnostics, f"Tmp2[{c}][{d}]", block, tol)
    check_off_diagonal(diagnostics, "T0mm", model.t0_mm, tol)
    check_row_sums(
        diagnostics,
        "boundary rows",
        [model.t0_mm] + [model.t0_mp[c] for c in model.colors()],
        tol,
    )
    return diagnostics


@dataclass(frozen=True)
class ColoredSolution:
    """Output of solve_colored.

    ``p_minus`` is None when the model is not recurrent. ``p_direction`` is
    the stationary vector of the boundary generator before normalization; it
    is kept so that censored variants can apply their own normalizer.
    """

    model: ColoredModel = field(repr=False)
    psi: dict[int, np.ndarray]
    k: dict[int, np.ndarray]
    drifts: dict[int, tuple[float, float]]
    methods: dict[int, str]
    p_direction: np.ndarray | None
    p_minus: np.ndarray | None

    @property
    def recurrent(self) -> bool:
        return all(xp < xm for xp, xm in self.drifts.values())

    def cross_k(self, c: int, d: int) -> np.ndarray:
        """Block (c, d) of the big K matrix, c < d."""
        return self.model.cross_pp(c, d) + self.psi[c] @ self.model.cross_mp(c, d)

    @cached_property
    def offsets(self) -> dict[int, slice]:
        out, start = {}, 0
        for c in self.model.colors():
            out[c] = slice(start, start + self.model.n_plus(c))
            start += self.model.n_plus(c)
        return out

    @cached_property
    def k_big(self) -> np.ndarray:
        """Upper block-triangular K over all colors."""
        n = sum(self.model.n_plus(c) for c in self.model.colors())
        out = np.zeros((n, n))
        for c in self.model.colors():
            out[self.offsets[c], self.offsets[c]] = self.k[c]
        for c, d in self.model.cross_pairs():
            out[self.offsets[c], self.offsets[d]] = self.cross_k(c, d)
        return out

    def boundary_row(self) -> np.ndarray:
        """[T0mp[1] ... T0mp[C]] as one n_minus x sum(n_plus) matrix."""
        return np.hstack([self.model.t0_mp[c] for c in self.model.colors()])


def require_recurrent(sol: ColoredSolution) -> None:
    if sol.p_minus is None:
        bad = [c for c, (xp, xm) in sol.drifts.items() if not xp < xm]
        raise NotRecurrent(f"Colored fluid queue is not recurrent (colors {bad})")


def _drift(tpp, tpm, tmp, tmm, tol: float) -> tuple[float, float]:
    generator = np.block([[tpp, tpm], [tmp, tmm]])
    try:
        xi = stationary_vector(generator, tol)
    except NotAGenerator:
        # a transient higher color leaves a defective effective generator
        return (math.nan, math.nan)
    n_plus = tpp.shape[0]
    return float(xi[:n_plus].sum()), float(xi[n_plus:].sum())


def solve_colored(
    model: ColoredModel,
    config: SolverConfig | None = None,
    force_general: bool = False,
) -> ColoredSolution:
    """Backward recursion over the colors, then the boundary vector.

    Args:
        model: A model passing validate().
        config: Solver settings, defaults when None.
        force_general: Solve every color with the Riccati solver even when a
            Sylvester solve would do.

    Returns:
        The solution. When some color has nonnegative drift the result is
        flagged non-recurrent and carries no boundary vector.
    """
    config = resolve_config(config)
    model.check(config.generator_tol)

    psi: dict[int, np.ndarray] = {}
    k: dict[int, np.ndarray] = {}
    drifts: dict[int, tuple[float, float]] = {}
    methods: dict[int, str] = {}

    for c in reversed(model.colors()):
        higher = model.targets[c]
        t_pm_eff = model.t_pm[c] + sum(
            (model.cross_pp(c, d) @ psi[d] for d in higher),
            np.zeros_like(model.t_pm[c]),
        )
        t_mm_eff = model.t_mm[c] + sum(
            (model.cross_mp(c, d) @ psi[d] for d in higher),
            np.zeros_like(model.t_mm[c]),
        )
        drifts[c] = _drift(
            model.t_pp[c], t_pm_eff, model.t_mp[c], t_mm_eff, config.generator_tol
        )

        use_sylvester = config.sylvester_fast_path and not force_general
        if use_sylvester and not np.any(model.t_mp[c]):
            methods[c] = "sylvester"
            psi[c] = np.maximum(
                solve_sylvester(
                    model.t_pp[c],
                    t_mm_eff,
                    t_pm_eff,
                    direct_max=config.sylvester_direct_max,
                ),
                0.0,
            )
        else:
            methods[c] = "nare"
            psi[c] = solve_nare(
                model.t_pp[c],
                t_pm_eff,
                model.t_mp[c],
                t_mm_eff,
                tol=config.nare_tol,
                max_iter=config.nare_max_iter,
                generator_tol=config.generator_tol,
                residual_tol=config.residual_tol,
                direct_max=config.sylvester_direct_max,
                fast_path=not force_general,
            )
        k[c] = model.t_pp[c] + psi[c] @ model.t_mp[c]
        logger.debug(
            "Color %d: %s solve, drift (%.6g, %.6g)", c, methods[c], *drifts[c]
        )

    sol = ColoredSolution(
        model=model,
        psi=psi,
        k=k,
        drifts=drifts,
        methods=methods,
        p_direction=None,
        p_minus=None,
    )
    if not sol.recurrent:
        bad = [c for c, (xp, xm) in drifts.items() if not xp < xm]
        logger.warning("Colored fluid queue is not recurrent, colors %s", bad)
        return sol

    boundary = model.t0_mm + sum(
        (model.t0_mp[c] @ psi[c] for c in model.colors()),
        np.zeros_like(model.t0_mm),
    )
    p = stationary_vector(boundary, config.generator_tol)
    p_minus = p / normalizer(sol, p, weight=2.0)
    logger.info(
        "Solved colored fluid queue with %d colors, P[level=0]=%.6g",
        model.n_colors,
        p_minus.sum(),
    )
    return ColoredSolution(
        model=model,
        psi=psi,
        k=k,
        drifts=drifts,
        methods=methods,
        p_direction=p,
        p_minus=p_minus,
    )


# ============================================================================
# Evaluation helpers shared with the jump model
# ============================================================================


def color_masses(sol: ColoredSolution, p: np.ndarray) -> dict[int, np.ndarray]:
    """Blocks of p [T0mp] (-K)^{-1}, by forward substitution over colors."""
    incoming: dict[int, list[Pair]] = {c: [] for c in sol.model.colors()}
    for c, d in sol.model.cross_pairs():
        incoming[d].append((c, d))

    out: dict[int, np.ndarray] = {}
    for c in sol.model.colors():
        acc = p @ sol.model.t0_mp[c]
        for b, _ in incoming[c]:
            acc = acc + out[b] @ sol.cross_k(b, c)
        out[c] = np.linalg.solve(-sol.k[c].T, acc) if acc.size else acc
    return out


def normalizer(sol: ColoredSolution, p: np.ndarray, weight: float) -> float:
    masses = color_masses(sol, p)
    return float(p.sum()) + weight * sum(float(v.sum()) for v in masses.values())


def chain_vector(sol: ColoredSolution, p: np.ndarray, xs) -> tuple[int, np.ndarray]:
    """Top color c_n and p T0mp[c_1] prod(e^{K x} cross) e^{K_{c_n} x_{c_n}}."""
    xs = np.asarray(xs, dtype=float)
    if xs.shape != (sol.model.n_colors,):
        raise InvalidPoint(
            f"Expected {sol.model.n_colors} levels, got shape {xs.shape}"
        )
    if np.any(xs < 0) or not np.all(np.isfinite(xs)):
        raise InvalidPoint("Levels must be finite and nonnegative")
    active = [c for c in sol.model.colors() if xs[c - 1] > 0]
    if not active:
        raise InvalidPoint("At least one color level must be positive")

    v = p @ sol.model.t0_mp[active[0]]
    for c, d in zip(active, active[1:]):
        v = v @ expm(sol.k[c], xs[c - 1]) @ sol.cross_k(c, d)
    top = active[-1]
    return top, v @ expm(sol.k[top], xs[top - 1])


def cdf_from(sol: ColoredSolution, p: np.ndarray, x: float, weight: float) -> float:
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    base = float(p.sum())
    masses = color_masses(sol, p)
    w = np.concatenate([masses[c] for c in sol.model.colors()])
    if w.size == 0:
        return base
    ones = np.ones(w.size)
    tail = ones if math.isinf(x) else ones - expm(sol.k_big, x) @ ones
    return base + weight * float(w @ tail)


def mean_from(sol: ColoredSolution, p: np.ndarray, weight: float) -> float:
    masses = color_masses(sol, p)
    w = np.concatenate([masses[c] for c in sol.model.colors()])
    if w.size == 0:
        return 0.0
    return weight * float(np.linalg.solve(-sol.k_big.T, w).sum())


def gamma_general(sol: ColoredSolution, p: np.ndarray, weight: float) -> np.ndarray:
    """Top-color law from the dense upper block-triangular K."""
    out = np.zeros(sol.model.n_colors + 1)
    out[0] = p.sum()
    r = p @ sol.boundary_row()
    if r.size:
        v = weight * np.linalg.solve(-sol.k_big.T, r)
        for c in sol.model.colors():
            out[c] = v[sol.offsets[c]].sum()
    return out


def gamma_linear(sol: ColoredSolution, p: np.ndarray, weight: float) -> np.ndarray:
    """Top-color law for models that only stack adjacent colors."""
    if not sol.model.is_adjacent_only():
        raise ValueError("Linear recursion needs adjacent-only color transitions")
    out = np.zeros(sol.model.n_colors + 1)
    out[0] = p.sum()
    v = weight * (p @ sol.model.t0_mp[1])
    for c in sol.model.colors():
        if c > 1:
            v = v @ sol.cross_k(c - 1, c)
        if v.size:
            v = np.linalg.solve(-sol.k[c].T, v)
        out[c] = v.sum()
    return out


def gamma_from(
    sol: ColoredSolution, p: np.ndarray, weight: float, config: SolverConfig | None
) -> np.ndarray:
    config = resolve_config(config)
    if config.linear_gamma_recursion and sol.model.is_adjacent_only():
        return gamma_linear(sol, p, weight)
    return gamma_general(sol, p, weight)


# ============================================================================
# Stationary quantities
# ============================================================================


def density(sol: ColoredSolution, xs) -> tuple[np.ndarray, np.ndarray]:
    """Joint density at per-color levels xs = (x_1, ..., x_C).

    Returns:
        (pi_plus over S_+ of the top positive color, pi_minus over S_-).
    """
    require_recurrent(sol)
    top, v = chain_vector(sol, sol.p_minus, xs)
    return v, v @ sol.psi[top]


def level_cdf(sol: ColoredSolution, x: float) -> float:
    """P[total fluid <= x]."""
    require_recurrent(sol)
    return cdf_from(sol, sol.p_minus, x, weight=2.0)


def level_mean(sol: ColoredSolution) -> float:
    require_recurrent(sol)
    return mean_from(sol, sol.p_minus, weight=2.0)


def top_color_dist(
    sol: ColoredSolution, config: SolverConfig | None = None
) -> np.ndarray:
    """P[top color = c] for c = 0..C, where 0 means the queue is empty."""
    require_recurrent(sol)
    return gamma_from(sol, sol.p_minus, 2.0, config)


def reduce_to_classic(model: ColoredModel, tol: float = 1e-12) -> ClassicModel:
    """Collapse a colored model whose colors only differ in their up-phases.

    Applies when all colors share Tmm, only the top color C is ever entered
    from S_- (Tmp[c] = 0 for c < C, Tmp2[c][l] = 0 for l < C) and every
    Tmp2[c][C] equals Tmp[C].

    Raises:
        HypothesisViolated: Listing each condition that fails.
    """
    C = model.n_colors
    failures = []
    for c in model.colors():
        if not np.allclose(model.t_mm[c], model.t_mm[1], rtol=0, atol=tol):
            failures.append(f"Tmm[{c}] differs from Tmm[1]")
        if c < C:
            if np.any(np.abs(model.t_mp[c]) > tol):
                failures.append(f"Tmp[{c}] is nonzero")
            if not np.allclose(model.cross_mp(c, C), model.t_mp[C], rtol=0, atol=tol):
                failures.append(f"Tmp2[{c}][{C}] differs from Tmp[{C}]")
            for d in range(c + 1, C):
                if np.any(np.abs(model.cross_mp(c, d)) > tol):
                    failures.append(f"Tmp2[{c}][{d}] is nonzero")
    if failures:
        raise HypothesisViolated(failures)

    offsets = np.cumsum([0] + [model.n_plus(c) for c in model.colors()])
    t_pp = np.zeros((offsets[-1], offsets[-1]))
    t_mp = np.zeros((model.n_minus, offsets[-1]))
    for c in model.colors():
        rows = slice(offsets[c - 1], offsets[c])
        t_pp[rows, rows] = model.t_pp[c]
        for d in range(c + 1, C + 1):
            t_pp[rows, offsets[d - 1] : offsets[d]] = model.cross_pp(c, d)
    t_mp[:, offsets[C - 1] :] = model.t_mp[C]
    return ClassicModel(
        t_pp=t_pp,
        t_pm=np.vstack([model.t_pm[c] for c in model.colors()]),
        t_mp=t_mp,
        t_mm=model.t_mm[1],
        t0_mm=model.t0_mm,
        t0_mp=np.hstack([model.t0_mp[c] for c in model.colors()]),
    )


def from_classic(model: ClassicModel) -> ColoredModel:
    """The classic queue as a colored queue with a single color."""
    return ColoredModel(
        n_minus=model.n_minus,
        t_pp={1: model.t_pp},
        t_pm={1: model.t_pm},
        t_mp={1: model.t_mp},
        t_mm={1: model.t_mm},
        t0_mm=model.t0_mm,
        t0_mp={1: model.t0_mp},
    )


def background_marginal(sol: ColoredSolution) -> np.ndarray:
    """Matrix m[c, i] = P[top color c, background in down-state i]."""
    require_recurrent(sol)
    masses = color_masses(sol, sol.p_minus)
    rows = [sol.p_minus] + [masses[c] @ sol.psi[c] for c in sol.model.colors()]
    return np.vstack(rows)
