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

"""JSON model files.

A file names its ``kind``; each kind has a parser registered under that name.
Schema problems raise SpecError naming the offending field before any
numerical validation runs.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from fluidq.errors import SpecError
from fluidq.fluid.classic import ClassicModel
from fluidq.fluid.colored import ColoredModel
from fluidq.fluid.jumps import JumpModel
from fluidq.fluid.phase_type import PHDist, erlang, exponential
from fluidq.models.cascade import CascadeSpec
from fluidq.models.lcfs import LCFSSpec
from fluidq.models.mmap import MMAP, ipp, two_state_mmap

_SPEC_KINDS: dict[str, Callable[[dict], Any]] = {}


def register_spec_kind(fn=None, *, name=None):
    def _register(fn):
        local_name = name
        if local_name is None:
            local_name = fn.__name__.removeprefix("parse_")
        if local_name in _SPEC_KINDS:
            raise ValueError(f"Already registered spec kind with name: {local_name}")
        _SPEC_KINDS[local_name] = fn
        return fn

    if fn is None:
        return _register
    return _register(fn)


def get_spec_parser(kind: str) -> Callable[[dict], Any]:
    try:
        return _SPEC_KINDS[kind]
    except KeyError:
        raise SpecError(
            f"kind: unknown model kind {kind!r}, expected one of {sorted(_SPEC_KINDS)}"
        )


def spec_kinds() -> list[str]:
    return sorted(_SPEC_KINDS)


@dataclass(frozen=True)
class LoadedSpec:
    kind: str
    model: Any
    source: Path | None = None


def parse_spec(doc: dict, source: Path | None = None) -> LoadedSpec:
    if not isinstance(doc, dict):
        raise SpecError("<root>: expected a JSON object")
    kind = _field(doc, "kind", "")
    return LoadedSpec(kind=kind, model=get_spec_parser(kind)(doc), source=source)


def load_spec(path: Path) -> LoadedSpec:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise SpecError(f"{path}: cannot read model file ({exc.strerror})")
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_spec(doc, source=path)


# ============================================================================
# Field helpers
# ============================================================================


def _join(where: str, name) -> str:
    return f"{where}.{name}" if where else str(name)


def _field(doc: dict, name: str, where: str, default=...):
    if not isinstance(doc, dict):
        raise SpecError(f"{where or '<root>'}: expected an object")
    if name not in doc:
        if default is ...:
            raise SpecError(f"{_join(where, name)}: missing field")
        return default
    return doc[name]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _threshold(value, where: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise SpecError(f"{where}: expected a nonnegative integer or \"inf\"")
    return value


def _vector(value, where: str) -> np.ndarray:
    if not isinstance(value, list):
        raise SpecError(f"{where}: expected an array of numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
        raise SpecError(f"{where}: expected an array of arrays")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(value)]
    widths = {r.size for r in rows}
    if len(widths) > 1:
        raise SpecError(f"{where}: rows have different lengths {sorted(widths)}")
    if not rows:
        return np.zeros((0, 0))
    return np.vstack(rows)


def _list(value, where: str) -> list:
    if not isinstance(value, list):
        raise SpecError(f"{where}: expected an array")
    return value


def _color(value, where: str, lo: int, hi: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
        raise SpecError(f"{where}: expected a color in {lo}..{hi}, got {value!r}")
    return value


def parse_ph(doc, where: str) -> PHDist:
    if not isinstance(doc, dict):
        raise SpecError(f"{where}: expected a phase-type object")
    try:
        if "exponential" in doc:
            return exponential(_number(doc["exponential"], _join(where, "exponential")))
        if "erlang" in doc:
            k = _field(doc, "erlang", where)
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise SpecError(
                    f"{_join(where, 'erlang')}: expected a positive integer"
                )
            return erlang(k, _number(_field(doc, "mean", where), _join(where, "mean")))
        return PHDist(
            _vector(_field(doc, "alpha", where), _join(where, "alpha")),
            _matrix(_field(doc, "U", where), _join(where, "U")),
        )
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"{where}: {exc}")


def parse_mmap(doc, where: str) -> MMAP:
    if not isinstance(doc, dict):
        raise SpecError(f"{where}: expected an arrival-process object")
    preset = doc.get("preset")
    try:
        if preset == "two_state":
            return two_state_mmap(
                *(
                    _number(_field(doc, key, where), _join(where, key))
                    for key in ("lam", "q1", "q2", "p1", "p2")
                )
            )
        if preset == "ipp":
            return ipp(
                _vector(_field(doc, "rates", where), _join(where, "rates")),
                _vector(_field(doc, "sojourns", where), _join(where, "sojourns")),
            )
        if preset is not None:
            raise SpecError(f"{_join(where, 'preset')}: unknown preset {preset!r}")
        d_where = _join(where, "D")
        return MMAP(
            _matrix(_field(doc, "D0", where), _join(where, "D0")),
            tuple(
                _matrix(d, f"{d_where}[{i}]")
                for i, d in enumerate(_list(_field(doc, "D", where), d_where))
            ),
        )
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"{where}: {exc}")


def _build(factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(str(exc))


# ============================================================================
# Kinds
# ============================================================================


@register_spec_kind
def parse_classic(doc: dict) -> ClassicModel:
    names = {
        "t_pp": "Tpp",
        "t_pm": "Tpm",
        "t_mp": "Tmp",
        "t_mm": "Tmm",
        "t0_mm": "T0mm",
        "t0_mp": "T0mp",
    }
    blocks = {key: _matrix(_field(doc, name, ""), name) for key, name in names.items()}
    return _build(ClassicModel, **blocks)


@register_spec_kind
def parse_colored(doc: dict) -> ColoredModel:
    colors = _list(_field(doc, "colors", ""), "colors")
    n_colors = len(colors)
    if n_colors == 0:
        raise SpecError("colors: at least one color is required")
    blocks: dict[str, dict] = {"t_pp": {}, "t_pm": {}, "t_mp": {}, "t_mm": {}}
    names = {"t_pp": "Tpp", "t_pm": "Tpm", "t_mp": "Tmp", "t_mm": "Tmm"}
    for c, entry in enumerate(colors, start=1):
        where = f"colors[{c - 1}]"
        for key, name in names.items():
            blocks[key][c] = _matrix(_field(entry, name, where), _join(where, name))

    t_pp_up, t_mp_up = {}, {}
    for i, entry in enumerate(_list(_field(doc, "cross", "", []), "cross")):
        where = f"cross[{i}]"
        c = _color(_field(entry, "from", where), _join(where, "from"), 1, n_colors)
        d = _color(_field(entry, "to", where), _join(where, "to"), c + 1, n_colors)
        if "Tpp" in entry:
            t_pp_up[(c, d)] = _matrix(entry["Tpp"], _join(where, "Tpp"))
        if "Tmp" in entry:
            t_mp_up[(c, d)] = _matrix(entry["Tmp"], _join(where, "Tmp"))

    t0_mp = _list(_field(doc, "T0mp", ""), "T0mp")
    if len(t0_mp) != n_colors:
        raise SpecError(f"T0mp: expected {n_colors} matrices, got {len(t0_mp)}")
    n_minus = _field(doc, "n_minus", "")
    if isinstance(n_minus, bool) or not isinstance(n_minus, int) or n_minus < 1:
        raise SpecError("n_minus: expected a positive integer")
    return _build(
        ColoredModel,
        n_minus=n_minus,
        t0_mm=_matrix(_field(doc, "T0mm", ""), "T0mm"),
        t0_mp={c: _matrix(b, f"T0mp[{c - 1}]") for c, b in enumerate(t0_mp, 1)},
        t_pp_up=t_pp_up,
        t_mp_up=t_mp_up,
        **blocks,
    )


@register_spec_kind
def parse_jumps(doc: dict) -> JumpModel:
    n_colors = _field(doc, "n_colors", "")
    if isinstance(n_colors, bool) or not isinstance(n_colors, int) or n_colors < 1:
        raise SpecError("n_colors: expected a positive integer")
    t_mm = _list(_field(doc, "Tmm", ""), "Tmm")
    if len(t_mm) != n_colors + 1:
        raise SpecError(f"Tmm: expected {n_colors + 1} matrices, got {len(t_mm)}")
    t_mm = {c: _matrix(b, f"Tmm[{c}]") for c, b in enumerate(t_mm)}
    n = t_mm[0].shape[0]

    ph_doc = _field(doc, "ph", "")
    if not isinstance(ph_doc, dict):
        raise SpecError("ph: expected an object keyed by color")
    ph = {}
    for key, dists in ph_doc.items():
        try:
            c = int(key)
        except ValueError:
            raise SpecError(f"ph.{key}: keys must be colors")
        _color(c, f"ph.{key}", 1, n_colors)
        ph[c] = tuple(
            parse_ph(d, f"ph.{key}[{i}]")
            for i, d in enumerate(_list(dists, f"ph.{key}"))
        )

    rates: dict[tuple[int, int], dict[int, np.ndarray]] = {}
    for i, entry in enumerate(_list(_field(doc, "jumps", "", []), "jumps")):
        where = f"jumps[{i}]"
        c = _color(_field(entry, "from", where), _join(where, "from"), 0, n_colors)
        d = _color(_field(entry, "to", where), _join(where, "to"), max(c, 1), n_colors)
        n_types = len(ph.get(d, ()))
        ell = _field(entry, "type", where, 0)
        if isinstance(ell, bool) or not isinstance(ell, int) or not 0 <= ell < n_types:
            raise SpecError(
                f"{_join(where, 'type')}: color {d} has {n_types} jump types"
            )
        rates.setdefault((c, d), {})[ell] = _matrix(
            _field(entry, "Q", where), _join(where, "Q")
        )

    q_up, q_same = {}, {}
    for (c, d), by_type in rates.items():
        qs = tuple(by_type.get(ell, np.zeros((n, n))) for ell in range(len(ph[d])))
        if c == d:
            q_same[c] = qs
        else:
            q_up[(c, d)] = qs
    return _build(
        JumpModel, n_colors=n_colors, t_mm=t_mm, ph=ph, q_up=q_up, q_same=q_same
    )


def _with_load(spec, doc: dict):
    if "load" not in doc:
        return spec
    rho = _number(doc["load"], "load")
    if not rho > 0:
        raise SpecError("load: expected a positive number")
    return _build(spec.with_load, rho)


@register_spec_kind
def parse_lcfs(doc: dict) -> LCFSSpec:
    services = _list(_field(doc, "services", ""), "services")
    thresholds = _list(_field(doc, "thresholds", ""), "thresholds")
    spec = _build(
        LCFSSpec,
        arrivals=parse_mmap(_field(doc, "arrivals", ""), "arrivals"),
        services=tuple(parse_ph(s, f"services[{i}]") for i, s in enumerate(services)),
        thresholds=tuple(
            _threshold(n, f"thresholds[{i}]") for i, n in enumerate(thresholds)
        ),
    )
    return _with_load(spec, doc)


@register_spec_kind
def parse_cascade(doc: dict) -> CascadeSpec:
    levels = _list(_field(doc, "levels", ""), "levels")
    capacity = _field(doc, "capacity", "")
    if isinstance(capacity, bool) or not isinstance(capacity, int):
        raise SpecError("capacity: expected an integer")
    spec = _build(
        CascadeSpec,
        arrivals=parse_mmap(_field(doc, "arrivals", ""), "arrivals"),
        levels=tuple(parse_ph(s, f"levels[{i}]") for i, s in enumerate(levels)),
        gamma=tuple(_vector(_field(doc, "gamma", "", []), "gamma")),
        capacity=capacity,
    )
    return _with_load(spec, doc)
