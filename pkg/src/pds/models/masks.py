from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from pds.core.exceptions import InvalidParameterError, ShapeMismatchError


class MaskKind(IntEnum):
    FREQUENCY = 0
    PIXEL = 1


class GradientOrder(str, Enum):
    MT_THEN_M = "MT_then_M"
    MP_MF2_MP = "Mp_Mf2_Mp"

    @classmethod
    def from_flag(cls, flag: str) -> "GradientOrder":
        aliases = {'mmt': cls.MT_THEN_M, 'mtm': cls.MP_MF2_MP}
        if flag in aliases:
            return aliases[flag]
        return cls(flag)


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 3:
        raise InvalidParameterError(f"Mask values must be C x H x W, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidParameterError("Mask entries must be finite and strictly positive")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _Mask:
    values: np.ndarray
    alpha: float = 1.0
    floored_count: int = 0
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'values', _freeze(self.values))
        if not self.alpha >= 1.0:
            raise InvalidParameterError(f"alpha must be >= 1, got {self.alpha}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.values.shape)

    @cached_property
    def is_identity(self) -> bool:
        return bool(np.all(self.values == 1.0))

    def check_shape(self, x: np.ndarray):
        if tuple(x.shape[-3:]) != self.shape:
            raise ShapeMismatchError(self.shape, x.shape[-3:], f"{self.kind.name.lower()} mask operand")


@dataclass(frozen=True, eq=False)
class SpectralMask(_Mask):
    """R_f in DFT storage order; M_f divides spectra by it."""

    kind = MaskKind.FREQUENCY


@dataclass(frozen=True, eq=False)
class PixelMask(_Mask):
    """R_p; M_p divides pixels by it."""

    kind = MaskKind.PIXEL


@dataclass(frozen=True)
class Preconditioner:
    frequency: Optional[SpectralMask] = None
    pixel: Optional[PixelMask] = None
    gradient_order: GradientOrder = GradientOrder.MT_THEN_M

    def __post_init__(self):
        if self.frequency is not None and self.pixel is not None and self.frequency.shape != self.pixel.shape:
            raise ShapeMismatchError(self.frequency.shape, self.pixel.shape, "pixel mask")

    @property
    def active_frequency(self) -> Optional[SpectralMask]:
        if self.frequency is None or self.frequency.is_identity:
            return None
        return self.frequency

    @property
    def active_pixel(self) -> Optional[PixelMask]:
        if self.pixel is None or self.pixel.is_identity:
            return None
        return self.pixel

    @property
    def is_identity(self) -> bool:
        return self.active_frequency is None and self.active_pixel is None

    @property
    def shape(self) -> Optional[Tuple[int, int, int]]:
        mask = self.frequency or self.pixel
        return mask.shape if mask is not None else None


class SolenoidalKind(str, Enum):
    FOURIER_ANTISYM = "fourier_antisym"
    SHIFT = "shift"
    FOURIER_SHIFT = "fourier_shift"


@dataclass(frozen=True)
class SolenoidalOp:
    kind: SolenoidalKind
    offset: Tuple[int, int] = (0, 0)
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', SolenoidalKind(self.kind))
        object.__setattr__(self, 'offset', (int(self.offset[0]), int(self.offset[1])))
        if self.omega < 0:
            raise InvalidParameterError(f"omega must be >= 0, got {self.omega}")

    @property
    def label(self) -> str:
        if self.kind == SolenoidalKind.FOURIER_ANTISYM:
            return self.kind.value
        return f"{self.kind.value}({self.offset[0]},{self.offset[1]})"

    @classmethod
    def standard_set(cls, omega: float = 0.0) -> List["SolenoidalOp"]:
        """Roll shifts by 1, 10 and 100 pixels, their Fourier-domain versions, and the antisymmetric DFT."""
        offsets = [(1, 1), (10, 10), (100, 100)]
        ops = [cls(SolenoidalKind.SHIFT, o, omega) for o in offsets]
        ops += [cls(SolenoidalKind.FOURIER_SHIFT, o, omega) for o in offsets]
        ops.append(cls(SolenoidalKind.FOURIER_ANTISYM, (0, 0), omega))
        return ops

    @classmethod
    def parse(cls, text: str, omega: float = 0.0) -> "SolenoidalOp":
        """Parse labels such as ``shift(1,1)``, ``fourier_shift(10,10)`` or ``fourier_antisym``."""
        text = text.strip().replace(' ', '')
        if '(' not in text:
            return cls(SolenoidalKind(text), (0, 0), omega)
        name, _, rest = text.partition('(')
        try:
            m, n = (int(v) for v in rest.rstrip(')').split(','))
        except ValueError:
            raise InvalidParameterError(f"Cannot parse solenoidal offset in {text!r}")
        return cls(SolenoidalKind(name), (m, n), omega)
