"""Experiment configuration for the 2D shallow-water corpus."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from ..errors import CflViolation, ModelError


@dataclass(frozen=True)
class ModelParams:
    """Grid, time stepping and physics constants.

    The flat-basin initial condition is a lake at rest of depth `depth` with
    a centred square surface pulse of height `pulse_height` covering roughly
    `pulse_frac` of the interior cells.
    """

    nx: int = 64
    ny: int = 64
    nt: int = 100
    dt: float = 0.01
    dx: float = 1.0
    dy: float = 1.0
    g: float = 9.81
    eps: float = 0.05
    hmin: float = 0.1
    depth: float = 10.0
    pulse_height: float = 1.0
    pulse_frac: float = 0.05

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ModelError(f"grid {self.ny}x{self.nx} is empty")
        if self.nt < 0:
            raise ModelError("nt must be >= 0")
        if not (0.0 <= self.eps <= 1.0):
            raise ModelError(f"eps={self.eps} outside [0, 1]")
        if self.dx <= 0 or self.dy <= 0 or self.dt <= 0:
            raise ModelError("dt, dx, dy must be positive")
        if self.depth <= 0:
            raise ModelError("depth must be positive")
        limit = self.cfl_limit()
        if self.dt >= limit:
            raise CflViolation(self.dt, limit)

    def cfl_limit(self) -> float:
        hmax = self.depth + max(self.pulse_height, 0.0)
        return min(self.dx, self.dy) / math.sqrt(self.g * hmax)

    @property
    def shape(self) -> Tuple[int, int]:
        """Allocated array shape including the ghost ring (rows, cols)."""
        return (self.ny + 2, self.nx + 2)

    @property
    def row_stride(self) -> int:
        return self.nx + 2

    @property
    def size(self) -> int:
        return (self.ny + 2) * (self.nx + 2)

    def pulse_box(self) -> Tuple[int, int, int, int]:
        """Inclusive (j1, j2, k1, k2) bounds of the centred pulse, 1-based."""
        side = max(1, round(math.sqrt(self.pulse_frac * self.nx * self.ny)))
        side_j = min(side, self.ny)
        side_k = min(side, self.nx)
        j1 = (self.ny - side_j) // 2 + 1
        k1 = (self.nx - side_k) // 2 + 1
        return (j1, j1 + side_j - 1, k1, k1 + side_k - 1)

    def to_json(self) -> dict:
        return {
            "nx": self.nx, "ny": self.ny, "nt": self.nt,
            "dt": self.dt, "dx": self.dx, "dy": self.dy,
            "g": self.g, "eps": self.eps, "hmin": self.hmin,
            "init": {
                "kind": "pulse",
                "depth": self.depth,
                "height": self.pulse_height,
                "area_frac": self.pulse_frac,
            },
        }


def load_params(path) -> ModelParams:
    data = json.loads(Path(path).read_text())
    return params_from_dict(data)


def params_from_dict(data: dict) -> ModelParams:
    init = data.get("init", {})
    if init and init.get("kind", "pulse") != "pulse":
        raise ModelError(f"unknown init kind '{init.get('kind')}'")
    kw = dict(
        nx=int(data["nx"]),
        ny=int(data["ny"]),
        nt=int(data.get("nt", data.get("NT", 100))),
        dt=float(data.get("dt", 0.01)),
        dx=float(data.get("dx", 1.0)),
        g=float(data.get("g", 9.81)),
        eps=float(data.get("eps", 0.05)),
        hmin=float(data.get("hmin", 0.1)),
        depth=float(init.get("depth", 10.0)),
        pulse_height=float(init.get("height", 1.0)),
        pulse_frac=float(init.get("area_frac", 0.05)),
    )
    kw["dy"] = float(data.get("dy", kw["dx"]))
    return ModelParams(**kw)


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_json(), indent=2) + "\n")
