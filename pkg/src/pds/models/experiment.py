import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from pds.config import settings
from pds.core.exceptions import InvalidParameterError


class ComponentSpec(BaseModel):
    weight: float = Field(gt=0)
    mean: float = 0.0
    variance: float = Field(default=1.0, gt=0)


class TargetSpec(BaseModel):
    kind: Literal['gaussian', 'mixture', 'zero', 'fixed_cost'] = 'gaussian'
    shape: Tuple[int, int, int] = (1, 8, 8)
    mean: float = 0.0
    covariance: Literal['isotropic', 'diagonal', 'frequency'] = 'isotropic'
    variance: float = Field(default=1.0, gt=0)
    variance_range: Optional[Tuple[float, float]] = None
    condition_number: float = Field(default=1000.0, ge=1)
    max_variance: float = Field(default=1.0, gt=0)
    components: List[ComponentSpec] = Field(default_factory=list)
    latency: Optional[float] = None

    @field_validator('shape')
    @classmethod
    def _positive_shape(cls, v):
        if any(s < 1 for s in v):
            raise ValueError(f"shape entries must be positive, got {v}")
        return v

    @model_validator(mode='after')
    def _components_present(self):
        if self.kind == 'mixture' and not self.components:
            raise ValueError("mixture target needs at least one component")
        return self


class ScheduleSpec(BaseModel):
    T: int = Field(default=1000, ge=0)
    sigma_min: float = Field(default=0.01, gt=0)
    sigma_max: float = Field(default=50.0, gt=0)
    kind: Literal['geometric', 'linear'] = 'geometric'
    epsilon_base: Optional[float] = Field(default=None, gt=0)
    epsilon_exponent: float = 2.0
    accel: float = Field(default=1.0, ge=1)

    @model_validator(mode='after')
    def _ordered(self):
        if self.sigma_max <= self.sigma_min:
            raise ValueError(f"sigma_max ({self.sigma_max}) must exceed sigma_min ({self.sigma_min})")
        return self


class SamplerSpec(BaseModel):
    mode: Literal['corrector_only', 'predictor_only', 'predictor_corrector'] = 'predictor_corrector'
    frequency_mask: Optional[Path] = None
    pixel_mask: Optional[Path] = None
    build_masks_from: Optional[Path] = None
    synthetic_masks: bool = False
    matched_mask: bool = False
    alpha: Optional[float] = Field(default=None, ge=1)
    gradient_order: Literal['mmt', 'mtm', 'MT_then_M', 'Mp_Mf2_Mp'] = 'mmt'
    omega: float = Field(default=0.0, ge=0)
    solenoidal: Optional[str] = None
    initial_law: Optional[Literal['ve', 'unit']] = None
    transformed_oracle: bool = False

    @field_validator('frequency_mask', 'pixel_mask', 'build_masks_from')
    @classmethod
    def _exists(cls, v):
        if v is not None and not Path(v).exists():
            raise ValueError(f"path does not exist: {v}")
        return v


class RunSpec(BaseModel):
    n_chains: int = Field(default=512, ge=1)
    seed: int = settings.PDS_SEED
    out: Path = Path('pds_out')
    pgm: bool = False


class ExperimentConfig(BaseModel):
    target: TargetSpec = Field(default_factory=TargetSpec)
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    run: RunSpec = Field(default_factory=RunSpec)

    @classmethod
    def load(cls, path: Optional[Path] = None, overrides: Optional[dict] = None) -> "ExperimentConfig":
        """Read a JSON config and apply dotted-key overrides; overrides win."""
        data = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise InvalidParameterError(f"Config file not found: {path}")
            data = json.loads(path.read_text(encoding='utf-8'))
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            section, _, name = key.partition('.')
            data.setdefault(section, {})[name] = value
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise InvalidParameterError(f"Invalid experiment config: {e}") from e
