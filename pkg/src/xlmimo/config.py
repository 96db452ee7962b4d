"""Run configuration: parsing, validation and conversion to library objects.

Configs are JSON objects with flat keys. Missing keys take the defaults
below, which reproduce the reference experiment setup; unknown keys are
rejected.
"""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .estimators import EstimatorParams, StoppingConfig
from .scene import ArrayGeometry, ConfigError, RegionBounds, SceneConfig

Method = Literal["subarray", "scatterer", "ls"]
METHODS: tuple[str, ...] = ("subarray", "scatterer", "ls")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # array and scene
    element_count: int = Field(1024, gt=0)
    spacing: float = Field(0.5, gt=0)
    subarray_counts: list[int] = Field(default_factory=lambda: [4, 16], min_length=1)
    x_min: float = 20.0
    x_max: float = 200.0
    y_min: float = -600.0
    y_max: float = 600.0
    num_scatterers: int = Field(2, ge=1)
    visible_count: int | None = Field(None, ge=1)
    gain_power_min: float = Field(0.5, gt=0)
    gain_power_max: float = Field(1.0, gt=0)
    min_separation: float = Field(20.0, ge=0)

    # estimators
    coarse_step_x: float = Field(4.0, gt=0)
    coarse_step_y: float = Field(4.0, gt=0)
    fine_step_x: float = Field(0.1, gt=0)
    fine_step_y: float = Field(0.1, gt=0)
    local_half_width: float | None = Field(None, gt=0)
    local_half_height: float | None = Field(None, gt=0)
    false_alarm_rate: float = Field(0.01, gt=0, lt=1)
    max_iterations: int = Field(20, ge=1)
    delta: float = Field(0.5, gt=0, lt=1)
    alpha: float = Field(0.8, gt=0, lt=1)

    # sweep
    snr_db: list[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0], min_length=1)
    trials: int = Field(10, ge=1)
    methods: list[Method] = Field(default_factory=lambda: list(METHODS), min_length=1)
    detection_radius: float = Field(10.0, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=1)
    out_dir: str = "out"

    # pattern map
    pattern_subarray_count: int = Field(8, ge=1)
    pattern_point: tuple[float, float] = (120.0, 120.0)
    pattern_visible: list[int] = Field(default_factory=lambda: [4], min_length=1)
    pattern_x_min: float = Field(0.0, ge=0)
    pattern_x_max: float = 200.0
    pattern_y_min: float = -600.0
    pattern_y_max: float = 600.0
    pattern_step: float = Field(1.0, gt=0)

    @field_validator("subarray_counts")
    @classmethod
    def _positive_counts(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("subarray counts must be positive")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if not 0 < self.x_min < self.x_max:
            raise ValueError("need 0 < x_min < x_max")
        if not self.y_min < self.y_max:
            raise ValueError("need y_min < y_max")
        if self.gain_power_min > self.gain_power_max:
            raise ValueError("gain_power_min exceeds gain_power_max")
        for n in self.subarray_counts + [self.pattern_subarray_count]:
            if self.element_count % n or self.element_count // n < 2:
                raise ValueError(f"subarray count {n} incompatible with element_count {self.element_count}")
            if self.visible_count is not None and self.visible_count > n:
                raise ValueError(f"visible_count {self.visible_count} exceeds subarray count {n}")
        if any(not 1 <= n <= self.pattern_subarray_count for n in self.pattern_visible):
            raise ValueError("pattern_visible indices outside 1..pattern_subarray_count")
        return self

    def geometry(self, subarray_count: int) -> ArrayGeometry:
        return ArrayGeometry(self.element_count, subarray_count, self.spacing)

    def bounds(self) -> RegionBounds:
        return RegionBounds(self.x_min, self.x_max, self.y_min, self.y_max)

    def scene_config(self, subarray_count: int) -> SceneConfig:
        return SceneConfig(
            geometry=self.geometry(subarray_count),
            bounds=self.bounds(),
            num_scatterers=self.num_scatterers,
            visible_count=self.visible_count,
            gain_power=(self.gain_power_min, self.gain_power_max),
            min_separation=self.min_separation,
            seed=self.seed,
        )

    def estimator_params(self) -> EstimatorParams:
        return EstimatorParams(
            bounds=self.bounds(),
            coarse_step=(self.coarse_step_x, self.coarse_step_y),
            fine_step=(self.fine_step_x, self.fine_step_y),
            local_half_width=self.local_half_width,
            local_half_height=self.local_half_height,
            delta=self.delta,
            alpha=self.alpha,
            stopping=StoppingConfig(self.false_alarm_rate, self.max_iterations),
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        field = ".".join(str(p) for p in e["loc"]) or "config"
        parts.append(f"{field}: {e['msg']}")
    return "; ".join(parts)


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse a JSON config document; an empty document yields the defaults.

    ``overrides`` replace individual keys (None values are ignored).

    Raises:
        ConfigError: on malformed JSON (with line/column) or invalid values
            (naming the offending field).
    """
    data: dict = {}
    if text.strip():
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_describe(exc)}") from exc
