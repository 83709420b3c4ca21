"""Run and verification configuration (TOML or JSON, chosen by file extension)."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError

OUTPUT_DIR_ENV = "SQG_OUTPUT_DIR"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Strict):
    n: int = 64
    length: float = 1.0
    dealias_fraction: float = 2.0 / 3.0

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        if v <= 0 or v % 2:
            raise ValueError("n must be an even positive integer")
        return v

    @field_validator("length")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("length must be > 0")
        return v

    @field_validator("dealias_fraction")
    @classmethod
    def _fraction(cls, v):
        if not 0 < v <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        return v


class SolverSection(_Strict):
    gamma: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: Literal["etd_rk2", "etd_rk4"] = "etd_rk4"
    snapshot_stride: int = Field(default=10, ge=1)
    linear_only: bool = False
    cfl_number: float = 1.0
    pileup_threshold: float = 0.1

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v):
        if not 0 < v <= 1:
            raise ValueError("gamma must satisfy gamma ∈ (0,1]")
        return v

    @model_validator(mode="after")
    def _times(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if not self.dt < self.t_end:
            raise ValueError(f"dt ({self.dt}) must be smaller than t_end ({self.t_end})")
        return self


class InitialDataSection(_Strict):
    kind: Literal["single_mode", "random_band", "vortex_pair"] = "single_mode"
    seed: int = 0
    params: dict = Field(default_factory=dict)


class CriterionSection(_Strict):
    p: float = 2.0
    r0: float = 2.0
    q: float = 2.0

    @field_validator("p")
    @classmethod
    def _p(cls, v):
        if not 2 <= v < math.inf:
            raise ValueError(f"p must satisfy p ∈ [2,∞), got {v}")
        return v

    @field_validator("r0")
    @classmethod
    def _r0(cls, v):
        if not 2 <= v < math.inf:
            raise ValueError(f"r0 must satisfy r0 ∈ [2,∞), got {v}")
        return v

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        if not v >= 1:
            raise ValueError(f"q must satisfy q ∈ [1,∞], got {v}")
        return v


class OutputsSection(_Strict):
    dir: str = "runs/out"
    checkpoint_stride: int = Field(default=100, ge=1)
    csv_flags: dict = Field(default_factory=lambda: {"diagnostics": True, "monitor": True, "norms": True})
    blowup_t_guess: Optional[float] = None


class PicardSection(_Strict):
    k_max: int = Field(default=8, ge=1)
    c_cal: Optional[float] = None
    t_end: Optional[float] = None
    steps: Optional[int] = Field(default=None, ge=1)


class RunConfig(_Strict):
    grid: GridSection = Field(default_factory=GridSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    initial_data: InitialDataSection = Field(default_factory=InitialDataSection)
    criterion: CriterionSection = Field(default_factory=CriterionSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)
    picard: PicardSection = Field(default_factory=PicardSection)

    @model_validator(mode="after")
    def _cross(self):
        if self.initial_data.kind == "random_band":
            j1 = self.initial_data.params.get("j1", 1)
            j2 = self.initial_data.params.get("j2", 2)
            if j1 > j2:
                raise ValueError("initial_data.params: j1 must not exceed j2")
        return self

    def output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.outputs.dir)


class VerifyConfig(_Strict):
    grid: GridSection = Field(default_factory=GridSection)
    samples: int = Field(default=100, ge=1)
    seed: int = 0
    output: str = "runs/verify"
    bernstein: dict = Field(default_factory=dict)
    gen_bernstein: dict = Field(default_factory=dict)
    commutator: dict = Field(default_factory=dict)
    product: dict = Field(default_factory=dict)
    partition: dict = Field(default_factory=dict)
    scaling: dict = Field(default_factory=dict)

    def output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output)


def _read_raw(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix == ".toml":
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: TOML syntax error: {exc}") from exc
    if suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    raise ConfigurationError(f"{path}: unsupported config extension {suffix!r} (use .toml or .json)")


def _format_validation(path, exc: ValidationError):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return f"{path}: invalid configuration\n" + "\n".join(lines)


def _load(model, path):
    raw = _read_raw(path)
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(_format_validation(path, exc)) from exc


def load_run_config(path) -> RunConfig:
    return _load(RunConfig, path)


def load_verify_config(path) -> VerifyConfig:
    return _load(VerifyConfig, path)
