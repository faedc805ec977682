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

"""Finite LCFS queues with per-type admission thresholds.

An arrival of type l is admitted only when fewer than N_l jobs are present;
the admitted job preempts the job in service. With colors equal to the
number of jobs present, each arrival is an upward fluid jump of a new color
whose size is the job's service demand, and the top color is the queue
length.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from fluidq.errors import InvalidThresholds
from fluidq.fluid.jumps import JumpModel, JumpSolution, joint_marginal
from fluidq.fluid.jumps import jump_top_color_dist
from fluidq.fluid.phase_type import PHDist
from fluidq.models.mmap import MMAP, calibrate_load

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LCFSSpec:
    """MMAP[L]/PH[L]/1/N[L] queue under preemptive LCFS.

    Args:
        arrivals: Arrival process with one marked type per job type.
        services: Service demand of each job type.
        thresholds: N_l per type, a nonnegative integer or math.inf. Type l
            is rejected when N_l or more jobs are present.
    """

    arrivals: MMAP
    services: tuple[PHDist, ...]
    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        thresholds = tuple(
            math.inf if math.isinf(float(n)) else int(n) for n in self.thresholds
        )
        object.__setattr__(self, "thresholds", thresholds)
        L = self.arrivals.n_types
        if len(self.services) != L or len(thresholds) != L:
            raise ValueError(
                f"Need one service law and one threshold for each of {L} types"
            )
        if any(n < 0 for n in thresholds):
            raise InvalidThresholds("Thresholds must be nonnegative")
        finite = [n for n in thresholds if not math.isinf(n)]
        if not finite:
            raise InvalidThresholds(
                "At least one threshold must be finite; an unbounded queue "
                "needs no colors"
            )
        if max(thresholds) == 0:
            raise InvalidThresholds("Every job type is always rejected")

    @property
    def n_types(self) -> int:
        return self.arrivals.n_types

    def order(self) -> list[int]:
        """Type indices sorted by nonincreasing threshold (stable)."""
        return sorted(range(self.n_types), key=lambda i: -self.thresholds[i])

    def canonical(self) -> "LCFSSpec":
        idx = self.order()
        return LCFSSpec(
            arrivals=MMAP(self.arrivals.d0, tuple(self.arrivals.d[i] for i in idx)),
            services=tuple(self.services[i] for i in idx),
            thresholds=tuple(self.thresholds[i] for i in idx),
        )

    @property
    def n_colors(self) -> int:
        top = max(self.thresholds)
        if math.isinf(top):
            return 1 + int(max(n for n in self.thresholds if not math.isinf(n)))
        return int(top)

    def load(self) -> float:
        means = np.array([s.mean() for s in self.services])
        return float(self.arrivals.type_rates() @ means)

    def with_load(self, rho: float) -> "LCFSSpec":
        means = [s.mean() for s in self.services]
        return replace(self, arrivals=calibrate_load(self.arrivals, means, rho))

    def with_threshold(self, index: int, value: float) -> "LCFSSpec":
        thresholds = list(self.thresholds)
        thresholds[index] = value
        return replace(self, thresholds=tuple(thresholds))


def build_lcfs(spec: LCFSSpec) -> JumpModel:
    """Jump model of the queue; its colors are job counts 1..C.

    Types are handled in canonical order (largest threshold first), so jump
    type l of color c is the l-th admissible type at that queue length.
    """
    spec = spec.canonical()
    C = spec.n_colors
    d0, d = spec.arrivals.d0, spec.arrivals.d
    N = spec.thresholds

    t_mm = {}
    for c in range(C + 1):
        blocked = [d[i] for i in range(spec.n_types) if N[i] <= c]
        t_mm[c] = d0 + sum(blocked, np.zeros_like(d0))
    # types admitted when c jobs are present, a prefix in canonical order
    admitted = {c: [i for i in range(spec.n_types) if N[i] > c] for c in range(C)}
    ph = {c + 1: tuple(spec.services[i] for i in admitted[c]) for c in range(C)}
    q_up = {(c, c + 1): tuple(d[i] for i in admitted[c]) for c in range(C)}

    q_same = {}
    if math.isinf(N[0]):
        unbounded = [i for i in range(spec.n_types) if math.isinf(N[i])]
        q_same[C] = tuple(d[i] for i in unbounded)
        ph[C] = tuple(spec.services[i] for i in unbounded)

    logger.info("LCFS queue with %d types mapped to %d colors", spec.n_types, C)
    return JumpModel(n_colors=C, t_mm=t_mm, ph=ph, q_up=q_up, q_same=q_same)


def lcfs_queue_length_dist(js: JumpSolution) -> np.ndarray:
    """P[n jobs], n = 0..C. With an unbounded type the last entry is P[>= C]."""
    return jump_top_color_dist(js)


def lcfs_loss_probability(js: JumpSolution, spec: LCFSSpec) -> np.ndarray:
    """Rejected over offered arrival rate per type, in the caller's type order."""
    return loss_from_marginal(joint_marginal(js), spec)


def loss_from_marginal(m: np.ndarray, spec: LCFSSpec) -> np.ndarray:
    """Loss per type from a (job count, arrival phase) law such as a
    simulated background marginal."""
    m = np.asarray(m, dtype=float)
    m = m / m.sum()
    loss = np.zeros(spec.n_types)
    for i in range(spec.n_types):
        rates = m @ spec.arrivals.d[i].sum(axis=1)
        offered = rates.sum()
        if offered <= 0:
            continue
        threshold = spec.thresholds[i]
        if math.isinf(threshold):
            continue
        loss[i] = rates[int(threshold) :].sum() / offered
    return loss


def mean_queue_length(dist) -> float:
    dist = np.asarray(dist, dtype=float)
    return float(np.arange(dist.size) @ dist)
