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

"""Structural checks shared by the model containers."""

from dataclasses import dataclass

import numpy as np

from fluidq.matcore.generators import off_diagonal


@dataclass(frozen=True)
class Diagnostic:
    block: str
    row: int | None
    message: str

    def __str__(self):
        where = self.block if self.row is None else f"{self.block} row {self.row}"
        return f"{where}: {self.message}"


def check_shape(
    diagnostics: list[Diagnostic], name: str, block: np.ndarray, shape: tuple
) -> bool:
    if block.shape != shape:
        diagnostics.append(
            Diagnostic(name, None, f"shape {block.shape}, expected {shape}")
        )
        return False
    if not np.all(np.isfinite(block)):
        diagnostics.append(Diagnostic(name, None, "non-finite entries"))
        return False
    return True


def check_nonnegative(
    diagnostics: list[Diagnostic], name: str, block: np.ndarray, tol: float
) -> None:
    for row in np.flatnonzero(np.any(block < -tol, axis=1)):
        diagnostics.append(
            Diagnostic(name, int(row), f"negative entry {block[row].min():.3e}")
        )


def check_off_diagonal(
    diagnostics: list[Diagnostic], name: str, block: np.ndarray, tol: float
) -> None:
    check_nonnegative(diagnostics, name, off_diagonal(block), tol)


def check_row_sums(
    diagnostics: list[Diagnostic],
    name: str,
    blocks: list[np.ndarray],
    tol: float,
) -> None:
    """Rows of the horizontally concatenated blocks must sum to zero."""
    if not blocks or blocks[0].shape[0] == 0:
        return
    sums = np.sum([b.sum(axis=1) for b in blocks], axis=0)
    for row in np.flatnonzero(np.abs(sums) > tol):
        diagnostics.append(
            Diagnostic(name, int(row), f"row sum {sums[row]:.3e} is not zero")
        )
