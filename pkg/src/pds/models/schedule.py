from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np

from pds.core.exceptions import InvalidParameterError
from pds.models.masks import Preconditioner, SolenoidalOp


class ScheduleKind(str, Enum):
    GEOMETRIC = "geometric"
    LINEAR = "linear"


class SamplerMode(str, Enum):
    CORRECTOR_ONLY = "corrector_only"
    PREDICTOR_ONLY = "predictor_only"
    PREDICTOR_CORRECTOR = "predictor_corrector"

    @property
    def has_predictor(self) -> bool:
        return self != SamplerMode.CORRECTOR_ONLY

    @property
    def has_corrector(self) -> bool:
        return self != SamplerMode.PREDICTOR_ONLY


class InitialLaw(str, Enum):
    VE = "ve"
    UNIT = "unit"


@dataclass(frozen=True, eq=False)
class Schedule:
    """Noise levels sigma_1 <= ... <= sigma_T and corrector steps epsilon_t.

    Index t is 1-based in the accessors. The reverse-time accessors map
    predictor step t to level T - t + 1.
    """

    sigmas: np.ndarray
    epsilons: np.ndarray
    kind: ScheduleKind = ScheduleKind.GEOMETRIC
    sigma_max: Optional[float] = None
    epsilon_base: float = 0.0
    epsilon_exponent: float = 2.0
    accel_factor: float = 1.0

    def __post_init__(self):
        sigmas = np.array(self.sigmas, dtype=np.float64).reshape(-1)
        epsilons = np.array(self.epsilons, dtype=np.float64).reshape(-1)
        if sigmas.shape != epsilons.shape:
            raise InvalidParameterError("sigmas and epsilons must have the same length")
        if np.any(sigmas <= 0) or np.any(np.diff(sigmas) < 0):
            raise InvalidParameterError("sigmas must be positive and non-decreasing")
        if np.any(epsilons <= 0):
            raise InvalidParameterError("epsilons must be positive")
        sigmas.setflags(write=False)
        epsilons.setflags(write=False)
        object.__setattr__(self, 'sigmas', sigmas)
        object.__setattr__(self, 'epsilons', epsilons)
        if self.sigma_max is None:
            object.__setattr__(self, 'sigma_max', float(sigmas[-1]) if len(sigmas) else 1.0)

    @property
    def T(self) -> int:
        return len(self.sigmas)

    @property
    def g(self) -> np.ndarray:
        return np.sqrt(np.diff(self.sigmas ** 2, prepend=0.0))

    @property
    def terminal_sigma(self) -> float:
        return float(self.sigmas[-1]) if self.T else float(self.sigma_max)

    def reverse_index(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"Step {t} outside 1..{self.T}")
        return self.T - t

    def reverse_g(self, t: int) -> float:
        return float(self.g[self.reverse_index(t)])

    def reverse_sigma(self, t: int) -> float:
        return float(self.sigmas[self.reverse_index(t)])

    def reverse_epsilon(self, t: int) -> float:
        return float(self.epsilons[self.reverse_index(t)])


@dataclass
class ChainState:
    x: np.ndarray
    t: int
    rng: Any
    chain_offset: int = 0


@dataclass(frozen=True)
class SamplerConfig:
    mode: SamplerMode = SamplerMode.PREDICTOR_CORRECTOR
    preconditioner: Optional[Preconditioner] = None
    solenoidal: Optional[SolenoidalOp] = None
    initial_law: Optional[InitialLaw] = None
    transformed_oracle: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'mode', SamplerMode(self.mode))
        if self.initial_law is not None:
            object.__setattr__(self, 'initial_law', InitialLaw(self.initial_law))

    @property
    def resolved_initial_law(self) -> InitialLaw:
        if self.initial_law is not None:
            return self.initial_law
        return InitialLaw.VE if self.mode.has_predictor else InitialLaw.UNIT

    @property
    def is_vanilla(self) -> bool:
        no_mask = self.preconditioner is None or self.preconditioner.is_identity
        no_sol = self.solenoidal is None or self.solenoidal.omega == 0
        return no_mask and no_sol
