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

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from fluidq.utils.constants import FLOAT_FORMAT

logger = logging.getLogger(__name__)


@dataclass
class ResultTable:
    """Rows of named columns written as CSV with a provenance footer.

    Floats carry 17 significant digits, so reading a value back yields the
    same double.
    """

    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    footer: dict[str, Any] = field(default_factory=dict)

    def add_row(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"Row has {len(values)} values for {len(self.columns)} columns"
            )
        self.rows.append(list(values))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = self.to_frame().to_csv(
            index=False,
            float_format=f"%{FLOAT_FORMAT}",
            na_rep="nan",
            lineterminator="\n",
        )
        footer = "".join(f"# {key}={value}\n" for key, value in self.footer.items())
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(body + footer)
        logger.info("Wrote %s (%d rows)", path, len(self.rows))
        return path


def provenance(config, seed: int | None = None, **extra) -> dict[str, Any]:
    from fluidq import __version__

    footer: dict[str, Any] = {"fluidq_version": __version__}
    footer.update(config.to_dict())
    if seed is not None:
        footer["seed"] = seed
    footer.update(extra)
    return footer


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")
