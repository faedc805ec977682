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

"""Subcommand bodies. Each returns an exit status or raises a library error
that ``main`` maps to one."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from fluidq.cli.spec_io import LoadedSpec, load_spec
from fluidq.cli.tables import ResultTable, provenance
from fluidq.config import SimConfig, SolverConfig, default_workers
from fluidq.errors import FluidQueueError, PhaseBlowup, SpecError
from fluidq.fluid.classic import classic_level_cdf, mean_drift, solve_classic
from fluidq.fluid.colored import (
    ColoredSolution,
    background_marginal,
    from_classic,
    level_cdf,
    require_recurrent,
    solve_colored,
    top_color_dist,
)
from fluidq.fluid.jumps import (
    JumpModel,
    joint_marginal,
    jump_level_cdf,
    jump_top_color_dist,
    solve_jumps,
)
from fluidq.models.cascade import build_cascade, cascade_queue_length_dist
from fluidq.models.lcfs import (
    build_lcfs,
    lcfs_loss_probability,
    lcfs_queue_length_dist,
    mean_queue_length,
)
from fluidq.models.qbd import solve_finite_qbd
from fluidq.sim import simulate
from fluidq.utils import constants as c

logger = logging.getLogger(__name__)

SWEEP_PARAMS = {
    "N1": ("lcfs",),
    "N2": ("lcfs",),
    "C": ("cascade",),
    "rho": ("lcfs", "cascade"),
}
MONOTONE_SLACK = 1e-12


def _jump_model(loaded: LoadedSpec) -> JumpModel:
    if loaded.kind == "lcfs":
        return build_lcfs(loaded.model)
    if loaded.kind == "cascade":
        return build_cascade(loaded.model)
    return loaded.model


def _drift_table(sol: ColoredSolution) -> ResultTable:
    table = ResultTable(["color", "xi_plus", "xi_minus", "recurrent", "method"])
    for color in sol.model.colors():
        xp, xm = sol.drifts[color]
        table.add_row(color, xp, xm, int(xp < xm), sol.methods[color])
    return table


def _cdf_table(grid: np.ndarray, cdf) -> ResultTable:
    table = ResultTable(["x", "cdf"])
    for x in grid:
        table.add_row(float(x), cdf(float(x)))
    return table


def _dist_table(name: str, key: str, values) -> ResultTable:
    table = ResultTable([name, key])
    for i, v in enumerate(values):
        table.add_row(i, float(v))
    return table


def _marginal_table(m: np.ndarray) -> ResultTable:
    table = ResultTable(["color", "state", "probability"])
    for color, row in enumerate(m):
        for state, v in enumerate(row):
            table.add_row(color, state, float(v))
    return table


def _fill_solve_tables(
    loaded: LoadedSpec,
    config: SolverConfig,
    grid: np.ndarray,
    qbd_baseline: bool,
    tables: dict[str, ResultTable],
) -> None:
    kind, model = loaded.kind, loaded.model

    if kind == "classic":
        model.check(config.generator_tol)
        xp, xm = mean_drift(model, config.generator_tol)
        drifts = ResultTable(["color", "xi_plus", "xi_minus", "recurrent", "method"])
        drifts.add_row(1, xp, xm, int(xp < xm), "nare")
        tables[c.DRIFTS_FILE] = drifts
        sol = solve_classic(model, config)
        empty = float(sol.p_minus.sum())
        tables[c.CDF_FILE] = _cdf_table(grid, lambda x: classic_level_cdf(sol, x))
        tables[c.GAMMA_FILE] = _dist_table("color", "probability", [empty, 1 - empty])
        return

    if kind == "colored":
        sol = solve_colored(model, config)
        tables[c.DRIFTS_FILE] = _drift_table(sol)
        require_recurrent(sol)
        tables[c.CDF_FILE] = _cdf_table(grid, lambda x: level_cdf(sol, x))
        tables[c.GAMMA_FILE] = _dist_table(
            "color", "probability", top_color_dist(sol, config)
        )
        return

    js = solve_jumps(_jump_model(loaded), config)
    tables[c.DRIFTS_FILE] = _drift_table(js.colored)
    require_recurrent(js.colored)
    tables[c.CDF_FILE] = _cdf_table(grid, lambda x: jump_level_cdf(js, x))
    tables[c.GAMMA_FILE] = _dist_table(
        "color", "probability", jump_top_color_dist(js, config)
    )
    tables[c.MARGINALS_FILE] = _marginal_table(joint_marginal(js))

    if kind == "lcfs":
        loss = ResultTable(["type", "threshold", "offered_rate", "loss"])
        rates = model.arrivals.type_rates()
        for i, p in enumerate(lcfs_loss_probability(js, model)):
            loss.add_row(i + 1, float(model.thresholds[i]), float(rates[i]), float(p))
        tables[c.LOSS_FILE] = loss
        tables[c.QUEUE_LENGTH_FILE] = _dist_table(
            "n", "probability", lcfs_queue_length_dist(js)
        )
    elif kind == "cascade":
        dist = cascade_queue_length_dist(js, model)
        if not qbd_baseline:
            tables[c.QUEUE_LENGTH_FILE] = _dist_table("n", "probability", dist)
            return
        try:
            qbd = solve_finite_qbd(model, config)
        except PhaseBlowup as exc:
            logger.warning("Skipping QBD baseline: %s", exc)
            qbd = np.full_like(dist, np.nan)
        table = ResultTable(["n", "probability", "qbd"])
        for n, (p, q) in enumerate(zip(dist, qbd)):
            table.add_row(n, float(p), float(q))
        tables[c.QUEUE_LENGTH_FILE] = table


def _write_tables(
    tables: dict[str, ResultTable], out_dir: Path, footer: dict
) -> list[Path]:
    paths = []
    for name, table in tables.items():
        table.footer = footer
        paths.append(table.write_csv(Path(out_dir) / name))
    return paths


def cmd_solve(
    spec_path: Path,
    out_dir: Path,
    grid: np.ndarray,
    config: SolverConfig,
    qbd_baseline: bool = False,
) -> int:
    loaded = load_spec(spec_path)
    if qbd_baseline and loaded.kind != "cascade":
        raise SpecError("--qbd-baseline applies to cascade models only")
    logger.info("Solving %s model from %s", loaded.kind, spec_path)
    tables: dict[str, ResultTable] = {}
    try:
        _fill_solve_tables(loaded, config, grid, qbd_baseline, tables)
    finally:
        _write_tables(tables, out_dir, provenance(config, kind=loaded.kind))
    return 0


# ============================================================================
# Sweeps
# ============================================================================


def _sweep_variant(spec, param: str, value: float, n2_ratio: float | None):
    if param == "N1":
        spec = spec.with_threshold(0, value)
        if n2_ratio is not None:
            n2 = value if math.isinf(value) else int(round(n2_ratio * value))
            spec = spec.with_threshold(1, n2)
        return spec
    if param == "N2":
        return spec.with_threshold(1, value)
    if param == "C":
        return spec.truncated(int(value))
    return spec.with_load(value)


def _sweep_columns(loaded: LoadedSpec, qbd_baseline: bool) -> list[str]:
    if loaded.kind == "lcfs":
        n_types = loaded.model.n_types
        return [f"loss_{i + 1}" for i in range(n_types)] + ["mean_queue_length"]
    columns = ["mean_queue_length", "p_empty", "p_full"]
    if qbd_baseline:
        columns += ["qbd_seconds", "qbd_max_diff"]
    return columns


def _sweep_point(
    loaded: LoadedSpec,
    param: str,
    value: float,
    config: SolverConfig,
    n2_ratio: float | None,
    qbd_baseline: bool,
) -> list:
    n_metrics = len(_sweep_columns(loaded, qbd_baseline))
    start = time.perf_counter()
    try:
        spec = _sweep_variant(loaded.model, param, value, n2_ratio)
        if loaded.kind == "lcfs":
            js = solve_jumps(build_lcfs(spec), config)
            require_recurrent(js.colored)
            loss = lcfs_loss_probability(js, spec)
            metrics = [*map(float, loss), mean_queue_length(lcfs_queue_length_dist(js))]
        else:
            js = solve_jumps(build_cascade(spec), config)
            require_recurrent(js.colored)
            dist = cascade_queue_length_dist(js, spec)
            metrics = [mean_queue_length(dist), float(dist[0]), float(dist[-1])]
        seconds = time.perf_counter() - start

        if qbd_baseline:
            qbd_start = time.perf_counter()
            try:
                qbd = solve_finite_qbd(spec, config)
                metrics += [
                    time.perf_counter() - qbd_start,
                    float(np.max(np.abs(qbd - dist))),
                ]
            except PhaseBlowup as exc:
                logger.warning("%s=%s: QBD baseline skipped (%s)", param, value, exc)
                metrics += [math.nan, math.nan]
        status = "ok"
    except (FluidQueueError, ValueError) as exc:
        logger.warning("%s=%s failed: %s", param, value, exc)
        seconds = time.perf_counter() - start
        status = type(exc).__name__
        metrics = [math.nan] * n_metrics
    logger.info("%s=%s: %s in %.3fs", param, value, status, seconds)
    return [value, status, seconds, *metrics]


def check_loss_monotone(table: ResultTable) -> list[str]:
    """Loss columns that increase along increasing sweep values."""
    ok = sorted(
        (row for row in table.rows if row[1] == "ok"), key=lambda row: row[0]
    )
    violated = []
    for j, name in enumerate(table.columns):
        if not name.startswith("loss_"):
            continue
        values = [row[j] for row in ok]
        if any(b > a + MONOTONE_SLACK for a, b in zip(values, values[1:])):
            violated.append(name)
    return violated


def cmd_sweep(
    spec_path: Path,
    param: str,
    values: list[float],
    out_dir: Path,
    config: SolverConfig,
    n2_ratio: float | None = None,
    qbd_baseline: bool = False,
) -> int:
    loaded = load_spec(spec_path)
    if loaded.kind not in SWEEP_PARAMS[param]:
        raise SpecError(f"Parameter {param} does not apply to {loaded.kind} models")
    if param in ("N1", "N2") and loaded.model.n_types < (2 if param == "N2" else 1):
        raise SpecError(f"Parameter {param} needs at least two job types")
    if n2_ratio is not None and (param != "N1" or loaded.model.n_types < 2):
        raise SpecError("--n2-ratio applies to N1 sweeps of two-type models")
    if qbd_baseline and loaded.kind != "cascade":
        raise SpecError("--qbd-baseline applies to cascade models only")

    columns = ["value", "status", "seconds"] + _sweep_columns(loaded, qbd_baseline)
    table = ResultTable(columns)
    workers = max(1, min(default_workers(), len(values)))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = executor.map(
            lambda v: _sweep_point(loaded, param, v, config, n2_ratio, qbd_baseline),
            values,
        )
        for row in rows:
            table.add_row(*row)

    if param == "N1":
        for name in check_loss_monotone(table):
            logger.warning("%s is not monotone in N1", name)
    failed = sum(row[1] != "ok" for row in table.rows)
    if failed:
        logger.warning("%d of %d sweep points failed", failed, len(values))
    table.footer = provenance(config, kind=loaded.kind, param=param)
    table.write_csv(Path(out_dir) / c.SWEEP_FILE)
    return 0


# ============================================================================
# Simulation
# ============================================================================


def _analytic(model, config: SolverConfig, grid: np.ndarray) -> dict:
    if isinstance(model, JumpModel):
        js = solve_jumps(model, config)
        require_recurrent(js.colored)
        return {
            "cdf": [jump_level_cdf(js, float(x)) for x in grid],
            "gamma": jump_top_color_dist(js, config),
            "marginal": joint_marginal(js).ravel(),
            "utilization": [1.0 - float(js.p_minus.sum())],
        }
    sol = solve_colored(model, config)
    require_recurrent(sol)
    return {
        "cdf": [level_cdf(sol, float(x)) for x in grid],
        "gamma": top_color_dist(sol, config),
        "marginal": background_marginal(sol).ravel(),
        "utilization": [1.0 - float(sol.p_minus.sum())],
    }


def cmd_simulate(
    spec_path: Path,
    out_dir: Path,
    sim_config: SimConfig,
    config: SolverConfig,
    compare: bool = False,
) -> int:
    loaded = load_spec(spec_path)
    if loaded.kind == "classic":
        model = from_classic(loaded.model)
    elif loaded.kind == "colored":
        model = loaded.model
    else:
        model = _jump_model(loaded)

    result = simulate(model, sim_config)
    empirical = {
        "cdf": (result.level_cdf, result.level_cdf_se),
        "gamma": (result.gamma, result.gamma_se),
        "marginal": (
            result.background_marginal.ravel(),
            result.background_marginal_se.ravel(),
        ),
        "utilization": ([result.utilization], [result.utilization_se]),
    }

    columns = ["statistic", "index", "mean", "stderr"]
    analytic = None
    if compare:
        columns += ["analytic", "z"]
        analytic = _analytic(model, config, result.grid)

    table = ResultTable(columns)
    for name, (means, errors) in empirical.items():
        for i, (mean, se) in enumerate(zip(means, errors)):
            row = [name, i, float(mean), float(se)]
            if analytic is not None:
                exact = float(analytic[name][i])
                z = (mean - exact) / se if se > 0 else math.nan
                row += [exact, float(z)]
            table.add_row(*row)

    table.footer = provenance(
        config,
        seed=sim_config.seed,
        kind=loaded.kind,
        horizon=sim_config.horizon,
        warmup=sim_config.warmup,
        replications=sim_config.replications,
        grid=",".join(format(x, c.FLOAT_FORMAT) for x in result.grid),
    )
    table.write_csv(Path(out_dir) / c.SIMULATION_FILE)
    return 0
