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

"""Residuals of the stationary two-color balance equations.

For C = 2 the densities pi(x, y) (x of color 1 below y of color 2) solve a
system of first-order PDEs with boundary conditions on the axes. Evaluating
those equations on the analytic densities is an end-to-end check of a
solution. Derivatives are taken by central differences and the one-sided
limits on the axes by extrapolation from inside the domain.
"""

import numpy as np

from fluidq.fluid.colored import ColoredSolution, require_recurrent
from fluidq.matcore import expm


def _inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _limit(f, h: float) -> np.ndarray:
    """f(0+) from f(h) and f(2h), exact for linear f."""
    return 2.0 * f(h) - f(2.0 * h)


class _Densities:
    """Analytic densities of a two-color solution, including one-sided limits."""

    def __init__(self, sol: ColoredSolution):
        self.sol = sol
        self.model = sol.model
        self.p = sol.p_minus
        self.cross = sol.cross_k(1, 2)

    def on_axis_1(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        """pi(x, 0) for x > 0: color 1 on top."""
        v = self.p @ self.model.t0_mp[1] @ expm(self.sol.k[1], x)
        return v, v @ self.sol.psi[1]

    def interior(self, x: float, y: float) -> tuple[np.ndarray, np.ndarray]:
        """pi(x, y) with color 2 on top; x = 0 means fluid entered color 2 directly
        from the boundary, y = 0 gives the limit y -> 0+."""
        if x > 0:
            v = self.p @ self.model.t0_mp[1] @ expm(self.sol.k[1], x) @ self.cross
        else:
            v = self.p @ self.model.t0_mp[2]
        v = v @ expm(self.sol.k[2], y)
        return v, v @ self.sol.psi[2]


def pde_residual(
    sol: ColoredSolution, x: float, y: float, h: float = 1e-4
) -> dict[str, float]:
    """Infinity-norm residuals of the two-color stationary equations at (x, y).

    Keys:
        drain_2, fill_2: interior equations for S_- and S_+^(2) in y.
        drain_1, fill_1: equations on the color-1 axis in x.
        cross_boundary: pi_+(x, 0+) against the color switch rates.
        boundary_2, boundary_1: entry into colors 2 and 1 from level zero.
        balance: probability flux balance at the origin.

    The densities are built from the boundary data, so cross_boundary,
    boundary_2 and boundary_1 only confirm that the closed form is
    continuous up to the axes; they carry an O(h^2) extrapolation error.
    The differential equations and balance depend on Psi, K and p_- and
    are the checks that detect a wrong solution.
    """
    require_recurrent(sol)
    model = sol.model
    if model.n_colors != 2:
        raise ValueError("pde_residual needs a model with exactly two colors")
    if not (x > h > 0 and y > h):
        raise ValueError("Need x, y > h > 0")

    d = _Densities(sol)
    t_pp1, t_pm1 = model.t_pp[1], model.t_pm[1]
    t_mp1, t_mm1 = model.t_mp[1], model.t_mm[1]
    t_pp2, t_pm2 = model.t_pp[2], model.t_pm[2]
    t_mp2, t_mm2 = model.t_mp[2], model.t_mm[2]
    cross_pp, cross_mp = model.cross_pp(1, 2), model.cross_mp(1, 2)

    plus, minus = d.interior(x, y)
    plus_hi, minus_hi = d.interior(x, y + h)
    plus_lo, minus_lo = d.interior(x, y - h)
    dplus_dy = (plus_hi - plus_lo) / (2 * h)
    dminus_dy = (minus_hi - minus_lo) / (2 * h)

    axis_plus, axis_minus = d.on_axis_1(x)
    axis_plus_hi, axis_minus_hi = d.on_axis_1(x + h)
    axis_plus_lo, axis_minus_lo = d.on_axis_1(x - h)
    daxis_plus = (axis_plus_hi - axis_plus_lo) / (2 * h)
    daxis_minus = (axis_minus_hi - axis_minus_lo) / (2 * h)
    edge_minus = d.interior(x, 0.0)[1]
    edge_plus = _limit(lambda t: d.interior(x, t)[0], h)
    entry_2 = _limit(lambda t: d.interior(0.0, t)[0], h)
    entry_1 = _limit(lambda t: d.on_axis_1(t)[0], h)

    p = sol.p_minus
    origin_minus_2 = d.interior(0.0, 0.0)[1]
    origin_minus_1 = d.on_axis_1(0.0)[1]

    return {
        "drain_2": _inf(-dminus_dy - (minus @ t_mm2 + plus @ t_pm2)),
        "fill_2": _inf(dplus_dy - (minus @ t_mp2 + plus @ t_pp2)),
        "drain_1": _inf(
            -daxis_minus - (axis_minus @ t_mm1 + axis_plus @ t_pm1 + edge_minus)
        ),
        "fill_1": _inf(daxis_plus - (axis_minus @ t_mp1 + axis_plus @ t_pp1)),
        "cross_boundary": _inf(
            edge_plus - axis_minus @ cross_mp - axis_plus @ cross_pp
        ),
        "boundary_2": _inf(entry_2 - p @ model.t0_mp[2]),
        "boundary_1": _inf(entry_1 - p @ model.t0_mp[1]),
        "balance": _inf(p @ model.t0_mm + origin_minus_1 + origin_minus_2),
    }
