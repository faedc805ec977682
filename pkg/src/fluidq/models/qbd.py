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

"""Classic QBD baseline for the cascade queue.

A level-1 job together with its descendants is one phase-type service whose
phases are the stacks (m_1, ..., m_c) of phases of the jobs in progress, so a
MAP/PH/1/N QBD gives the same queue-length law. The phase count grows
geometrically in the number of levels.
"""

import logging

import numpy as np

from fluidq.config import SolverConfig, resolve_config
from fluidq.errors import PhaseBlowup
from fluidq.fluid.phase_type import PHDist
from fluidq.matcore import stationary_vector
from fluidq.models.cascade import CascadeSpec

logger = logging.getLogger(__name__)


def qbd_phase_count(spec: CascadeSpec) -> int:
    """sum over c of prod_{i <= c} (order of level i)."""
    total, width = 0, 1
    for dist in spec.levels:
        width *= dist.order
        total += width
    return total


def expanded_service_ph(spec: CascadeSpec, max_phases: int | None = None) -> PHDist:
    """Total service of a level-1 job and its descendants, served depth-first.

    Raises:
        PhaseBlowup: If the stack representation exceeds ``max_phases``.
    """
    count = qbd_phase_count(spec)
    if max_phases is not None and count > max_phases:
        raise PhaseBlowup(count, max_phases)

    stacks: list[tuple[int, ...]] = []
    frontier = [(m,) for m in range(spec.levels[0].order)]
    while frontier:
        stacks.extend(frontier)
        depth = len(frontier[0])
        if depth == spec.n_levels:
            break
        child = spec.levels[depth].order
        frontier = [s + (m,) for s in frontier for m in range(child)]
    index = {s: i for i, s in enumerate(stacks)}

    U = np.zeros((count, count))
    for s, i in index.items():
        c = len(s)
        level = spec.levels[c - 1]
        top = s[-1]
        for m in range(level.order):
            if m != top:
                U[i, index[s[:-1] + (m,)]] += level.U[top, m]
        U[i, i] += level.U[top, top]
        exit_rate = level.exit_rates[top]
        if c > 1:
            U[i, index[s[:-1]]] += exit_rate
        if c < spec.n_levels:
            gamma = spec.gamma[c - 1]
            child = spec.levels[c]
            for m in range(child.order):
                U[i, index[s + (m,)]] += gamma * child.alpha[m]
            U[i, i] -= gamma

    alpha = np.zeros(count)
    for m in range(spec.levels[0].order):
        alpha[index[(m,)]] = spec.levels[0].alpha[m]
    return PHDist(alpha, U)


def solve_finite_qbd(
    spec: CascadeSpec, config: SolverConfig | None = None
) -> np.ndarray:
    """Queue-length law P[n level-1 jobs], n = 0..N, of the MAP/PH/1/N QBD.

    The finite level-structured generator is reduced level by level from the
    top: pi_n = pi_{n-1} R_n with R_n = Up (-U_n)^{-1}, U_N = L_N and
    U_n = L_n + R_{n+1} Down_{n+1}.
    """
    config = resolve_config(config)
    service = expanded_service_ph(spec, config.max_qbd_phases)
    d0, d1 = spec.arrivals.d0, spec.arrivals.d[0]
    M, P, N = spec.arrivals.order, service.order, spec.capacity
    eye_m, eye_p = np.eye(M), np.eye(P)
    logger.info("QBD baseline with %d phases per level, %d levels", P, N)

    exits = service.exit_rates[:, None]
    local = np.kron(d0, eye_p) + np.kron(eye_m, service.U)
    local_full = local + np.kron(d1, eye_p)
    up_first = np.kron(d1, service.alpha[None, :])
    up = np.kron(d1, eye_p)
    down_first = np.kron(eye_m, exits)
    down = np.kron(eye_m, exits @ service.alpha[None, :])

    rates = {}
    for n in range(N, 0, -1):
        u = local_full if n == N else local + rates[n + 1] @ down
        into = up_first if n == 1 else up
        rates[n] = np.linalg.solve(-u.T, into.T).T

    u0 = d0 + rates[1] @ down_first
    pi = [stationary_vector(u0, config.generator_tol)]
    for n in range(1, N + 1):
        pi.append(pi[-1] @ rates[n])
    dist = np.array([block.sum() for block in pi])
    return dist / dist.sum()
