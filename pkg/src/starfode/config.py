"""Problem configuration files (YAML) with a strict schema.

Example::

    kind: scalar
    alpha: 0.7
    T: 2.0
    m: 200
    cutoff: 140
    scalar:
      f: {type: constant, value: -1.0}
      y0: 1.0
      oracle: mittag_leffler
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

__all__ = [
    "ProblemConfig",
    "ScalarSection",
    "SystemSection",
    "SchrodingerSection",
    "Guards",
    "load_config",
    "parse_config",
    "dump_config",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantFn(_Strict):
    type: Literal["constant"] = "constant"
    value: float = 0.0

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t)

    def to_callable(self):
        return self.value


class LinearFn(_Strict):
    type: Literal["linear"] = "linear"
    slope: float = 1.0
    intercept: float = 0.0

    def __call__(self, t):
        return self.intercept + self.slope * np.asarray(t, dtype=float)

    def to_callable(self):
        return self


class SineFn(_Strict):
    """``amplitude * sin(frequency * t + phase)``."""

    type: Literal["sine"] = "sine"
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def to_callable(self):
        return self


class PowerFn(_Strict):
    """``coefficient * t**exponent`` (``exponent >= 0``)."""

    type: Literal["power"] = "power"
    coefficient: float = 1.0
    exponent: float = Field(1.0, ge=0.0)

    def __call__(self, t):
        return self.coefficient * np.asarray(t, dtype=float) ** self.exponent

    def to_callable(self):
        return self


FunctionSpec = Annotated[Union[ConstantFn, LinearFn, SineFn, PowerFn], Field(discriminator="type")]


class ScalarSection(_Strict):
    f: FunctionSpec = ConstantFn(value=-1.0)
    g: Optional[FunctionSpec] = None
    y0: float = 1.0
    oracle: Literal["mittag_leffler", "linear_t", "forced_ml", "abm", "none"] = "none"
    expansion_tol: float = Field(1e-13, gt=0)


class SystemSection(_Strict):
    K: list[list[float]]
    L: Optional[list[list[float]]] = None
    f: Optional[FunctionSpec] = None
    u0: list[float]
    oracle: Literal["pathsum", "mittag_leffler_diag", "abm", "none"] = "none"

    @model_validator(mode="after")
    def _shapes(self):
        n = len(self.u0)
        for name in ("K", "L"):
            A = getattr(self, name)
            if A is not None and (len(A) != n or any(len(r) != n for r in A)):
                raise ValueError(f"{name} must be {n}x{n}")
        if self.L is not None and self.f is None:
            raise ValueError("f is required when L is given")
        return self


class SchrodingerSection(_Strict):
    grid_n: int = Field(15, ge=5)
    time_dependent: bool = False
    krylov_dim: Optional[int] = Field(None, ge=1)
    reference: Literal["direct", "abm", "both", "none"] = "both"


class Guards(_Strict):
    """Accuracy thresholds; any violation makes the run fail.

    ``first``/``last``/``interior`` bound relative errors at the first grid
    point, the last one and inside ``interior_window``; ``abm_rel`` and
    ``direct_rel`` bound the disagreement with the time-stepping and the
    direct matrix-equation references.
    """

    first: Optional[float] = None
    last: Optional[float] = None
    interior: Optional[float] = None
    interior_window: tuple[float, float] = (0.1, 1.98)
    max_abs: Optional[float] = None
    max_rel: Optional[float] = None
    abm_rel: Optional[float] = None
    direct_rel: Optional[float] = None
    max_rank: Optional[int] = None


class ProblemConfig(_Strict):
    kind: Literal["scalar", "system", "schrodinger"]
    alpha: float = Field(gt=0.0, le=1.0)
    T: float = Field(1.0, gt=0.0)
    m: int = Field(100, ge=8)
    cutoff: Union[Literal["auto"], int] = "auto"
    solver: Literal["dense", "stein", "projected", "lowrank", "direct", "abm"] = "dense"
    dt: float = Field(1e-4, gt=0.0)
    grid_points: int = Field(200, ge=2)
    scalar: Optional[ScalarSection] = None
    system: Optional[SystemSection] = None
    schrodinger: Optional[SchrodingerSection] = None
    guards: Guards = Guards()

    @model_validator(mode="after")
    def _sections(self):
        needed = {"scalar": self.scalar, "system": self.system, "schrodinger": self.schrodinger}
        if needed[self.kind] is None:
            raise ValueError(f"kind {self.kind!r} requires a {self.kind!r} section")
        others = [k for k, v in needed.items() if k != self.kind and v is not None]
        if others:
            raise ValueError(f"sections {others} do not apply to kind {self.kind!r}")
        if isinstance(self.cutoff, int) and self.cutoff < 1:
            raise ValueError("cutoff must be positive")
        allowed = {
            "scalar": {"dense"},
            "system": {"dense", "stein", "projected", "lowrank", "direct", "abm"},
            "schrodinger": {"direct", "projected", "lowrank", "abm", "dense"},
        }[self.kind]
        if self.solver not in allowed:
            raise ValueError(f"solver {self.solver!r} not available for kind {self.kind!r}")
        return self


def parse_config(data: dict | str) -> ProblemConfig:
    """Validate a mapping or YAML text."""
    try:
        if isinstance(data, str):
            data = yaml.safe_load(data)
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        return ProblemConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc


def load_config(path: str | Path) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: ProblemConfig) -> str:
    """Canonical YAML text of ``cfg``; ``parse_config(dump_config(c)) == c``."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False)
