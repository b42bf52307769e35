import logging
import math
from typing import Optional

import numpy as np

from pds.core.exceptions import InvalidParameterError
from pds.models.schedule import Schedule, ScheduleKind

logger = logging.getLogger(__name__)


def noise_levels(T: int, sigma_min: float, sigma_max: float, kind: ScheduleKind) -> np.ndarray:
    if T == 0:
        return np.empty(0)
    if T == 1:
        return np.array([sigma_min], dtype=np.float64)
    if ScheduleKind(kind) == ScheduleKind.GEOMETRIC:
        exponents = np.arange(T) / (T - 1)
        return sigma_min * (sigma_max / sigma_min) ** exponents
    return np.linspace(sigma_min, sigma_max, T)


def default_epsilon_base(sigma_min: float) -> float:
    return 0.16 * sigma_min


def make_schedule(
    T: int,
    sigma_min: float,
    sigma_max: float,
    kind: ScheduleKind = ScheduleKind.GEOMETRIC,
    epsilon_base: Optional[float] = None,
    epsilon_exponent: float = 2.0,
) -> Schedule:
    """sigma_t spaced between the bounds; epsilon_t = epsilon_base * (sigma_t / sigma_T) ** epsilon_exponent."""
    if T < 0:
        raise InvalidParameterError(f"T must be >= 0, got {T}")
    if not 0 < sigma_min < sigma_max:
        raise InvalidParameterError(f"Need 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}")
    if epsilon_base is None:
        epsilon_base = default_epsilon_base(sigma_min)
    if epsilon_base <= 0:
        raise InvalidParameterError(f"epsilon_base must be > 0, got {epsilon_base}")
    kind = ScheduleKind(kind)
    sigmas = noise_levels(T, sigma_min, sigma_max, kind)
    epsilons = epsilon_base * (sigmas / sigmas[-1]) ** epsilon_exponent if T else np.empty(0)
    return Schedule(sigmas, epsilons, kind, sigma_max, epsilon_base, epsilon_exponent)


def accelerate(schedule: Schedule, c: float) -> Schedule:
    """T' = max(1, round(T / c)) levels over the same endpoints, epsilon scaled by sqrt(c)."""
    if c < 1:
        raise InvalidParameterError(f"Acceleration factor must be >= 1, got {c}")
    if c == 1 or schedule.T == 0:
        return schedule
    if schedule.epsilon_base <= 0:
        raise InvalidParameterError("Only schedules built by make_schedule can be accelerated")
    new_T = max(1, int(round(schedule.T / c)))
    sigma_min = float(schedule.sigmas[0])
    sigma_max = float(schedule.sigmas[-1])
    if new_T == 1 or sigma_max == sigma_min:
        sigmas = np.full(new_T, sigma_max if new_T > 1 else sigma_min)
    else:
        sigmas = noise_levels(new_T, sigma_min, sigma_max, schedule.kind)
    epsilons = math.sqrt(c) * schedule.epsilon_base * (sigmas / sigmas[-1]) ** schedule.epsilon_exponent
    logger.info(f"Accelerated schedule T={schedule.T} -> {new_T} (c={c:g})")
    return Schedule(
        sigmas,
        epsilons,
        schedule.kind,
        schedule.sigma_max,
        math.sqrt(c) * schedule.epsilon_base,
        schedule.epsilon_exponent,
        schedule.accel_factor * c,
    )
