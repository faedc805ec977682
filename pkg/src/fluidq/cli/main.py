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

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from fluidq.cli.commands import SWEEP_PARAMS, cmd_simulate, cmd_solve, cmd_sweep
from fluidq.config import SimConfig, SolverConfig
from fluidq.errors import FluidQueueError, NotRecurrent, Unstable

logger = logging.getLogger("fluidq")

EXIT_OK, EXIT_ERROR, EXIT_NOT_RECURRENT = 0, 1, 2


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` as n evenly spaced levels from a to b."""
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}")
    if n < 1 or lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"need 0 <= a <= b and n >= 1, got {text!r}")
    return np.linspace(lo, hi, n)


def parse_values(text: str) -> list[float]:
    values = []
    for item in text.split(","):
        item = item.strip()
        try:
            values.append(math.inf if item == "inf" else float(item))
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {item!r}")
    return [int(v) if math.isfinite(v) and v.is_integer() else v for v in values]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluidq",
        description="Stationary analysis of colored Markov-modulated fluid queues",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log solver details."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", type=Path, help="Path to the JSON model file.")
    common.add_argument(
        "--out",
        type=Path,
        default=Path("."),
        help="Directory for the CSV outputs (default: current directory).",
    )
    common.add_argument(
        "--tol",
        type=float,
        default=None,
        help="Stopping tolerance of the Riccati iterations.",
    )

    solve = subparsers.add_parser(
        "solve", parents=[common], help="Solve a model and write its tables."
    )
    solve.add_argument(
        "--grid",
        type=parse_grid,
        default=parse_grid("0:10:11"),
        help="Levels for the CDF table as a:b:n (default: 0:10:11).",
    )
    solve.add_argument(
        "--qbd-baseline",
        action="store_true",
        help="Add the QBD queue-length law to cascade outputs.",
    )

    sweep = subparsers.add_parser(
        "sweep", parents=[common], help="Solve a model over parameter values."
    )
    sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sweep.add_argument(
        "--values",
        type=parse_values,
        required=True,
        help="Comma-separated values; thresholds accept inf.",
    )
    sweep.add_argument(
        "--n2-ratio",
        type=float,
        default=None,
        help="Tie N2 to round(ratio * N1) in N1 sweeps.",
    )
    sweep.add_argument(
        "--qbd-baseline",
        action="store_true",
        help="Time the QBD baseline next to each cascade solve.",
    )

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Monte Carlo estimates of a model."
    )
    simulate.add_argument("--horizon", type=float, default=1e5)
    simulate.add_argument("--warmup", type=float, default=1e3)
    simulate.add_argument("--reps", type=int, default=10)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--grid", type=parse_grid, default=parse_grid("0:10:11"))
    simulate.add_argument(
        "--compare",
        action="store_true",
        help="Append analytic values and z-scores.",
    )
    return parser


def run(args: argparse.Namespace) -> int:
    config = SolverConfig() if args.tol is None else SolverConfig(nare_tol=args.tol)
    if args.command == "solve":
        return cmd_solve(args.spec, args.out, args.grid, config, args.qbd_baseline)
    if args.command == "sweep":
        return cmd_sweep(
            args.spec,
            args.param,
            args.values,
            args.out,
            config,
            n2_ratio=args.n2_ratio,
            qbd_baseline=args.qbd_baseline,
        )
    sim_config = SimConfig(
        horizon=args.horizon,
        warmup=args.warmup,
        replications=args.reps,
        seed=args.seed,
        sample_grid=tuple(args.grid),
    )
    return cmd_simulate(args.spec, args.out, sim_config, config, args.compare)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except (NotRecurrent, Unstable) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NOT_RECURRENT
    except (FluidQueueError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
