import json

import numpy as np
import pytest

from fluidq.fluid.classic import ClassicModel
from fluidq.fluid.colored import ColoredModel
from fluidq.fluid.jumps import JumpModel
from fluidq.fluid.phase_type import exponential


def _fill_diagonal(rows: list[np.ndarray], diag_block: np.ndarray) -> None:
    """Set the diagonal of diag_block so that the concatenated rows sum to 0."""
    np.fill_diagonal(diag_block, 0.0)
    total = sum(block.sum(axis=1) for block in rows) + diag_block.sum(axis=1)
    diag_block[np.diag_indices_from(diag_block)] = -total


def random_generator(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.uniform(0.1, 1.0, size=(n, n))
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -g.sum(axis=1))
    return g


def random_classic_model(
    rng: np.random.Generator, n_plus: int = 4, n_minus: int = 4
) -> ClassicModel:
    """A stable classic model; up-phases drain quickly into S_-."""
    t_pp = rng.uniform(0.0, 1.0, size=(n_plus, n_plus))
    t_pm = rng.uniform(1.0, 3.0, size=(n_plus, n_minus))
    t_mp = rng.uniform(0.0, 0.2 / n_plus, size=(n_minus, n_plus))
    t_mm = rng.uniform(0.0, 1.0, size=(n_minus, n_minus))
    t0_mm = rng.uniform(0.1, 1.0, size=(n_minus, n_minus))
    t0_mp = rng.uniform(0.0, 0.5, size=(n_minus, n_plus))
    _fill_diagonal([t_pm], t_pp)
    _fill_diagonal([t_mp], t_mm)
    _fill_diagonal([t0_mp], t0_mm)
    return ClassicModel(
        t_pp=t_pp, t_pm=t_pm, t_mp=t_mp, t_mm=t_mm, t0_mm=t0_mm, t0_mp=t0_mp
    )


def random_colored_model(
    rng: np.random.Generator,
    n_colors: int,
    max_block: int = 4,
    adjacent_only: bool = False,
    same_color_up: bool = True,
) -> ColoredModel:
    """A positive recurrent colored model.

    Down-to-up rates are small and up-to-down rates large, so every color
    drains on average.
    """
    n_minus = int(rng.integers(1, max_block + 1))
    n_plus = {c: int(rng.integers(1, max_block + 1)) for c in range(1, n_colors + 1)}
    colors = range(1, n_colors + 1)
    pairs = [
        (c, d)
        for c in colors
        for d in colors
        if c < d and (not adjacent_only or d == c + 1)
    ]

    t_pp, t_pm, t_mp, t_mm, t0_mp = {}, {}, {}, {}, {}
    t_pp_up, t_mp_up = {}, {}
    for c in colors:
        t_pp[c] = rng.uniform(0.0, 1.0, size=(n_plus[c], n_plus[c]))
        t_pm[c] = rng.uniform(1.0, 3.0, size=(n_plus[c], n_minus))
        t_mm[c] = rng.uniform(0.0, 1.0, size=(n_minus, n_minus))
        if same_color_up:
            t_mp[c] = rng.uniform(0.0, 0.2 / n_plus[c], size=(n_minus, n_plus[c]))
        else:
            t_mp[c] = np.zeros((n_minus, n_plus[c]))
        t0_mp[c] = rng.uniform(0.0, 0.5, size=(n_minus, n_plus[c]))
        if adjacent_only and c > 1:
            t0_mp[c] = np.zeros((n_minus, n_plus[c]))
    for c, d in pairs:
        t_pp_up[(c, d)] = rng.uniform(0.0, 0.5, size=(n_plus[c], n_plus[d]))
        t_mp_up[(c, d)] = rng.uniform(0.0, 0.2 / n_plus[d], size=(n_minus, n_plus[d]))

    for c in colors:
        up_rows = [t_pm[c]] + [t_pp_up[(c, d)] for d in colors if (c, d) in t_pp_up]
        _fill_diagonal(up_rows, t_pp[c])
        down_rows = [t_mp[c]] + [t_mp_up[(c, d)] for d in colors if (c, d) in t_mp_up]
        _fill_diagonal(down_rows, t_mm[c])
    t0_mm = rng.uniform(0.1, 1.0, size=(n_minus, n_minus))
    _fill_diagonal(list(t0_mp.values()), t0_mm)

    return ColoredModel(
        n_minus=n_minus,
        t_pp=t_pp,
        t_pm=t_pm,
        t_mp=t_mp,
        t_mm=t_mm,
        t0_mm=t0_mm,
        t0_mp=t0_mp,
        t_pp_up=t_pp_up,
        t_mp_up=t_mp_up,
    )


def reducible_colored_model(
    rng: np.random.Generator, n_colors: int, max_block: int = 3
) -> ColoredModel:
    """A model whose colors share Tmm and only re-enter S_+ through color C."""
    n_minus = int(rng.integers(1, max_block + 1))
    n_plus = {c: int(rng.integers(1, max_block + 1)) for c in range(1, n_colors + 1)}
    colors = range(1, n_colors + 1)
    C = n_colors

    entry = rng.uniform(0.0, 0.2 / n_plus[C], size=(n_minus, n_plus[C]))
    t_mm_shared = rng.uniform(0.0, 1.0, size=(n_minus, n_minus))
    _fill_diagonal([entry], t_mm_shared)

    t_pp, t_pm, t_mp, t_mm, t0_mp = {}, {}, {}, {}, {}
    t_pp_up, t_mp_up = {}, {}
    for c in colors:
        t_pp[c] = rng.uniform(0.0, 1.0, size=(n_plus[c], n_plus[c]))
        t_pm[c] = rng.uniform(1.0, 3.0, size=(n_plus[c], n_minus))
        t_mm[c] = t_mm_shared.copy()
        t_mp[c] = entry.copy() if c == C else np.zeros((n_minus, n_plus[c]))
        t0_mp[c] = rng.uniform(0.0, 0.5, size=(n_minus, n_plus[c]))
        for d in range(c + 1, C + 1):
            t_pp_up[(c, d)] = rng.uniform(0.0, 0.5, size=(n_plus[c], n_plus[d]))
        if c < C:
            t_mp_up[(c, C)] = entry.copy()
    for c in colors:
        up_rows = [t_pm[c]] + [t_pp_up[(c, d)] for d in range(c + 1, C + 1)]
        _fill_diagonal(up_rows, t_pp[c])
    t0_mm = rng.uniform(0.1, 1.0, size=(n_minus, n_minus))
    _fill_diagonal(list(t0_mp.values()), t0_mm)

    return ColoredModel(
        n_minus=n_minus,
        t_pp=t_pp,
        t_pm=t_pm,
        t_mp=t_mp,
        t_mm=t_mm,
        t0_mm=t0_mm,
        t0_mp=t0_mp,
        t_pp_up=t_pp_up,
        t_mp_up=t_mp_up,
    )


def mm1_jump_model(lam: float = 1.0, mu: float = 2.0) -> JumpModel:
    """Workload of the M/M/1 queue as a single-color jump model."""
    rate = np.array([[lam]])
    return JumpModel(
        n_colors=1,
        t_mm={0: -rate, 1: -rate},
        ph={1: (exponential(mu),)},
        q_up={(0, 1): (rate,)},
        q_same={1: (rate,)},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20251019)


@pytest.fixture
def write_spec(tmp_path):
    def _write(doc: dict, name: str = "model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return _write


CLASSIC_SCALAR = {
    "kind": "classic",
    "Tpp": [[-2.0]],
    "Tpm": [[2.0]],
    "Tmp": [[1.0]],
    "Tmm": [[-1.0]],
    "T0mm": [[-1.0]],
    "T0mp": [[1.0]],
}


def mm1_jump_spec(lam: float = 1.0, mu: float = 2.0) -> dict:
    return {
        "kind": "jumps",
        "n_colors": 1,
        "Tmm": [[[-lam]], [[-lam]]],
        "ph": {"1": [{"exponential": mu}]},
        "jumps": [
            {"from": 0, "to": 1, "type": 0, "Q": [[lam]]},
            {"from": 1, "to": 1, "type": 0, "Q": [[lam]]},
        ],
    }


def mm1n_lcfs_spec(capacity: int, lam: float = 1.0, mu: float = 2.0) -> dict:
    return {
        "kind": "lcfs",
        "arrivals": {"D0": [[-lam]], "D": [[[lam]]]},
        "services": [{"exponential": mu}],
        "thresholds": [capacity],
    }
