"""Linear law between the iteration budget T and the mask parameter alpha.

With the constants fixed to one, y is linear in 1/T where
  freq_only:  y = 1/alpha
  both_masks: y = (1 + 1/alpha)^2 - 1
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from pds.core.exceptions import ExtrapolationError, FitError, InvalidParameterError

logger = logging.getLogger(__name__)


class FitVariant(str, Enum):
    BOTH_MASKS = "both_masks"
    FREQ_ONLY = "freq_only"


@dataclass(frozen=True)
class AlphaObservation:
    T: int
    alpha: float

    def __post_init__(self):
        if self.T < 1:
            raise InvalidParameterError(f"T must be positive, got {self.T}")
        if not self.alpha >= 1:
            raise InvalidParameterError(f"alpha must be >= 1, got {self.alpha}")


@dataclass(frozen=True)
class AlphaFit:
    variant: FitVariant
    a: float
    b: float
    r_squared: float
    t_range: Tuple[int, int]


@dataclass(frozen=True)
class AlphaPrediction:
    T: float
    alpha: float
    extrapolated: bool


# Published (T, alpha) pairs for 32x32 CIFAR-10 and 64x64 CelebA.
REFERENCE_CIFAR10 = [(1000, 50.0), (400, 25.0), (200, 12.0), (100, 5.0), (50, 1.8)]
REFERENCE_CELEBA64 = [(1000, 300.0), (400, 40.0), (200, 15.0), (100, 6.0), (50, 2.5)]


def transform(alpha: float, variant: FitVariant) -> float:
    if FitVariant(variant) == FitVariant.FREQ_ONLY:
        return 1.0 / alpha
    return (1.0 + 1.0 / alpha) ** 2 - 1.0


def inverse_transform(y: float, variant: FitVariant) -> float:
    if FitVariant(variant) == FitVariant.FREQ_ONLY:
        return 1.0 / y
    return 1.0 / (math.sqrt(1.0 + y) - 1.0)


def as_observations(pairs: Sequence) -> List[AlphaObservation]:
    return [p if isinstance(p, AlphaObservation) else AlphaObservation(int(p[0]), float(p[1])) for p in pairs]


def fit(observations: Sequence, variant: FitVariant) -> AlphaFit:
    variant = FitVariant(variant)
    observations = as_observations(observations)
    if len(observations) < 2:
        raise FitError(f"Need at least 2 observations, got {len(observations)}")
    ts = np.array([o.T for o in observations], dtype=np.float64)
    if np.all(ts == ts[0]):
        raise FitError("All observations share the same T")
    x = 1.0 / ts
    y = np.array([transform(o.alpha, variant) for o in observations])
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - (a * x + b)
    ss_res = float(residual @ residual)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    logger.info(f"alpha fit ({variant.value}): a={a:.6g}, b={b:.6g}, R^2={r_squared:.4f}")
    return AlphaFit(variant, float(a), float(b), r_squared, (int(ts.min()), int(ts.max())))


def predict_alpha(alpha_fit: AlphaFit, T: float) -> AlphaPrediction:
    y = alpha_fit.a / T + alpha_fit.b
    if y <= 0:
        raise ExtrapolationError(T, y)
    alpha = max(1.0, inverse_transform(y, alpha_fit.variant))
    extrapolated = not alpha_fit.t_range[0] <= T <= alpha_fit.t_range[1]
    if extrapolated:
        logger.warning(f"Predicting alpha at T={T:g} outside the fitted range {alpha_fit.t_range}")
    return AlphaPrediction(T, alpha, extrapolated)


def slope_ratio(fit_a: AlphaFit, fit_b: AlphaFit) -> float:
    return fit_a.a / fit_b.a


def load_observations(path: Path) -> List[AlphaObservation]:
    """Two whitespace- or comma-separated columns (T, alpha); '#' starts a comment."""
    observations = []
    for number, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.replace(',', ' ').split()
        if len(fields) != 2:
            raise FitError(f"{path}:{number}: expected 'T alpha', got {line!r}")
        try:
            observations.append(AlphaObservation(int(float(fields[0])), float(fields[1])))
        except ValueError as e:
            raise FitError(f"{path}:{number}: {e}") from e
    return observations
