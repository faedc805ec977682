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

"""Exception hierarchy shared by all fluidq modules."""


class FluidQueueError(Exception):
    """Base class for every error raised by fluidq."""


class NotAGenerator(FluidQueueError, ValueError):
    """A matrix expected to be a generator has bad row sums or off-diagonals."""


class Reducible(FluidQueueError, ValueError):
    """The stationary vector of a generator is not unique."""


class SingularPencil(FluidQueueError, ValueError):
    """A Sylvester equation has A and -B with a shared eigenvalue."""


class NoConvergence(FluidQueueError, RuntimeError):
    """An iterative solver hit its iteration cap or left a large residual."""


class InvalidBlocks(FluidQueueError, ValueError):
    """NARE blocks do not assemble into a generator or sub-generator."""


class Unstable(FluidQueueError):
    """A classic fluid queue violates the drift condition."""


class NotRecurrent(FluidQueueError):
    """A colored fluid queue is not positive recurrent.

    Raised when a stationary quantity is requested from a flagged solution.
    """


class InvalidPoint(FluidQueueError, ValueError):
    """A density was requested at a point outside the open support."""


class HypothesisViolated(FluidQueueError, ValueError):
    """A colored model does not satisfy the conditions for a classic reduction."""

    def __init__(self, failures: list[str]):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class InvalidThresholds(FluidQueueError, ValueError):
    """LCFS thresholds cannot define a finite color count."""


class PhaseBlowup(FluidQueueError, RuntimeError):
    """The expanded QBD phase space exceeds the configured bound."""

    def __init__(self, phases: int, bound: int):
        self.phases = phases
        self.bound = bound
        super().__init__(
            f"Expanded service representation has {phases} phases (bound {bound})"
        )


class ModelValidationError(FluidQueueError, ValueError):
    """A model failed structural validation.

    Args:
        diagnostics: Every violated rule, as returned by the model's validate().
    """

    def __init__(self, diagnostics: list):
        self.diagnostics = list(diagnostics)
        lines = [str(d) for d in self.diagnostics[:10]]
        more = len(self.diagnostics) - len(lines)
        if more > 0:
            lines.append(f"... and {more} more")
        super().__init__("Model validation failed:\n  " + "\n  ".join(lines))


class SpecError(FluidQueueError, ValueError):
    """A model spec file does not match the expected schema."""
