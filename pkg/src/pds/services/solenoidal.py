"""Skew-symmetric operators S with <x, S[x]> = 0.

The weight omega is applied by the sampler, not here. The two Fourier kinds
are implemented as written; on real tensors they evaluate to zero up to
rounding, because the DFT matrix is symmetric and circular shifts are diagonal
in the Fourier basis.
"""
import logging
from typing import Optional

import numpy as np

from pds.core.fourier import dft2, dft2_complex, idft2_complex
from pds.models.masks import SolenoidalKind, SolenoidalOp

logger = logging.getLogger(__name__)

_AXES = (-2, -1)


def _roll_difference(x: np.ndarray, m: int, n: int) -> np.ndarray:
    return np.roll(x, (m, n), axis=_AXES) - np.roll(x, (-m, -n), axis=_AXES)


def transposed_dft2(x: np.ndarray) -> np.ndarray:
    """DFT with the kernel's two index roles swapped (the matrix transpose of F)."""
    return dft2(np.swapaxes(x, -1, -2)).swapaxes(-1, -2) if x.shape[-1] == x.shape[-2] else dft2(x)


def apply_solenoidal(op: Optional[SolenoidalOp], x: np.ndarray) -> np.ndarray:
    if op is None:
        return np.zeros_like(x)
    if op.kind == SolenoidalKind.SHIFT:
        return _roll_difference(x, *op.offset)
    if op.kind == SolenoidalKind.FOURIER_SHIFT:
        inner = idft2_complex(x)
        return np.ascontiguousarray(dft2_complex(_roll_difference(inner, *op.offset)).real)
    return np.ascontiguousarray((dft2(x) - transposed_dft2(x)).real)
