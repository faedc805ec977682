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

"""Minimal nonnegative solutions of the fluid-queue Riccati equation

    Tpp Psi + Psi Tmp Psi + Psi Tmm + Tpm = 0.

In the standard M-matrix form X C X - X D - A X + B = 0 this is
A = -Tpp, B = Tpm, C = Tmp, D = -Tmm, and the coefficient matrix
[[D, -C], [-B, A]] is minus the (permuted) generator of the fluid queue.
"""

import logging

import numpy as np

from fluidq.errors import InvalidBlocks, NoConvergence, SingularPencil
from fluidq.matcore.generators import as_matrix, check_generator
from fluidq.matcore.sylvester import solve_sylvester
from fluidq.utils.constants import (
    GENERATOR_TOL,
    NARE_MAX_ITER,
    NARE_RESIDUAL_TOL,
    NARE_TOL,
    SYLVESTER_DIRECT_MAX,
)

logger = logging.getLogger(__name__)


def nare_residual(tpp, tpm, tmp, tmm, psi) -> np.ndarray:
    return tpp @ psi + psi @ tmp @ psi + psi @ tmm + tpm


def _inf_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a).sum(axis=1))) if a.size else 0.0


def _check_blocks(tpp, tpm, tmp, tmm, tol: float) -> None:
    n_plus, n_minus = tpm.shape
    expected = {
        "Tpp": (tpp, (n_plus, n_plus)),
        "Tmp": (tmp, (n_minus, n_plus)),
        "Tmm": (tmm, (n_minus, n_minus)),
    }
    for name, (block, shape) in expected.items():
        if block.shape != shape:
            raise InvalidBlocks(f"{name} has shape {block.shape}, expected {shape}")
    assembled = np.block([[tpp, tpm], [tmp, tmm]])
    if not check_generator(assembled, tol).is_subgenerator:
        raise InvalidBlocks("Blocks do not assemble into a (sub)generator")


def _doubling(tpp, tpm, tmp, tmm, tol: float, max_iter: int) -> np.ndarray:
    """Structure-preserving doubling; returns the minimal solution."""
    a, b, c, d = -tpp, tpm, tmp, -tmm
    m, n = b.shape
    gamma = max(float(np.max(np.diag(a))), float(np.max(np.diag(d))))
    if gamma <= 0.0:
        gamma = 1.0
    a_g = a + gamma * np.eye(m)
    d_g = d + gamma * np.eye(n)
    w_g = a_g - b @ np.linalg.solve(d_g, c)
    v_g = d_g - c @ np.linalg.solve(a_g, b)

    e = np.eye(n) - 2.0 * gamma * np.linalg.inv(v_g)
    f = np.eye(m) - 2.0 * gamma * np.linalg.inv(w_g)
    w_inv = np.linalg.inv(w_g)
    g = 2.0 * gamma * np.linalg.solve(d_g, c) @ w_inv
    h = 2.0 * gamma * w_inv @ b @ np.linalg.inv(d_g)

    for it in range(1, max_iter + 1):
        i_gh = np.eye(n) - g @ h
        i_hg = np.eye(m) - h @ g
        h_next = h + f @ np.linalg.solve(i_hg, h @ e)
        g_next = g + e @ np.linalg.solve(i_gh, g @ f)
        e = e @ np.linalg.solve(i_gh, e)
        f = f @ np.linalg.solve(i_hg, f)
        step = _inf_norm(h_next - h)
        h, g = h_next, g_next
        if step <= tol:
            logger.debug("Doubling converged in %d iterations", it)
            return h
    raise NoConvergence(f"Doubling did not converge in {max_iter} iterations")


def _newton(
    tpp, tpm, tmp, tmm, tol: float, max_iter: int, direct_max: int
) -> np.ndarray:
    """Newton iteration from zero, each step a Sylvester solve."""
    psi = np.zeros_like(tpm)
    for it in range(1, max_iter + 1):
        psi_next = solve_sylvester(
            tpp + psi @ tmp,
            tmm + tmp @ psi,
            tpm - psi @ tmp @ psi,
            direct_max=direct_max,
        )
        step = _inf_norm(psi_next - psi)
        psi = psi_next
        if step <= tol:
            logger.debug("Newton converged in %d iterations", it)
            return psi
    raise NoConvergence(f"Newton did not converge in {max_iter} iterations")


def _polish(tpp, tpm, tmp, tmm, psi, direct_max: int) -> np.ndarray:
    """One Newton correction starting from an accurate iterate."""
    try:
        return solve_sylvester(
            tpp + psi @ tmp,
            tmm + tmp @ psi,
            tpm - psi @ tmp @ psi,
            direct_max=direct_max,
        )
    except (SingularPencil, np.linalg.LinAlgError):
        return psi


def solve_nare(
    tpp,
    tpm,
    tmp,
    tmm,
    tol: float = NARE_TOL,
    max_iter: int = NARE_MAX_ITER,
    generator_tol: float = GENERATOR_TOL,
    residual_tol: float = NARE_RESIDUAL_TOL,
    direct_max: int = SYLVESTER_DIRECT_MAX,
    fast_path: bool = True,
) -> np.ndarray:
    """Minimal nonnegative solution Psi of the fluid-queue Riccati equation.

    Args:
        tpp: Up-to-up rates (n_plus x n_plus).
        tpm: Up-to-down rates (n_plus x n_minus).
        tmp: Down-to-up rates (n_minus x n_plus).
        tmm: Down-to-down rates (n_minus x n_minus).
        tol: Successive-iterate stopping tolerance.
        max_iter: Iteration cap for doubling and for the Newton fallback.
        generator_tol: Tolerance of the block sanity check.
        residual_tol: Accepted residual relative to the block norms.
        direct_max: Kronecker threshold handed to Sylvester solves.
        fast_path: Solve a single Sylvester equation when Tmp is zero instead
            of iterating.

    Returns:
        Psi, n_plus x n_minus, entrywise nonnegative.

    Raises:
        InvalidBlocks: If the blocks do not form a (sub)generator.
        NoConvergence: If neither doubling nor Newton reaches the tolerance.
    """
    tpp = as_matrix(tpp, "Tpp")
    tpm = as_matrix(tpm, "Tpm")
    tmp = as_matrix(tmp, "Tmp")
    tmm = as_matrix(tmm, "Tmm")
    _check_blocks(tpp, tpm, tmp, tmm, generator_tol)

    n_plus, n_minus = tpm.shape
    if n_plus == 0 or n_minus == 0:
        return np.zeros((n_plus, n_minus))

    if fast_path and not np.any(tmp):
        return np.maximum(solve_sylvester(tpp, tmm, tpm, direct_max=direct_max), 0.0)

    try:
        psi = _doubling(tpp, tpm, tmp, tmm, tol, max_iter)
    except (NoConvergence, np.linalg.LinAlgError) as exc:
        logger.warning("Doubling failed (%s), falling back to Newton", exc)
        psi = _newton(tpp, tpm, tmp, tmm, tol, max_iter, direct_max)

    scale = max(
        1.0,
        _inf_norm(tpp) + _inf_norm(tpm) + _inf_norm(tmp) + _inf_norm(tmm),
    )
    residual = _inf_norm(nare_residual(tpp, tpm, tmp, tmm, psi))
    if residual > 1e-14 * scale:
        polished = np.maximum(_polish(tpp, tpm, tmp, tmm, psi, direct_max), 0.0)
        polished_residual = _inf_norm(nare_residual(tpp, tpm, tmp, tmm, polished))
        if polished_residual < residual:
            psi, residual = polished, polished_residual
            logger.debug("Newton polish lowered residual to %.3e", residual)

    if residual > residual_tol * scale:
        raise NoConvergence(f"Riccati residual {residual:.3e} above tolerance")
    return np.maximum(psi, 0.0)
