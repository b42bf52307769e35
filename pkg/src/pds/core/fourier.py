"""2D DFT pair over the trailing (H, W) axes.

Forward transform is unnormalized, the inverse carries 1/(HW). Any leading
axes (channels, chains) are transformed independently.
"""
import logging
from typing import Tuple, Union

import numpy as np
from scipy import fft as sp_fft

from pds.config import settings

logger = logging.getLogger(__name__)

_AXES = (-2, -1)


def dft2(x: np.ndarray) -> np.ndarray:
    return sp_fft.fft2(np.asarray(x, dtype=np.float64), axes=_AXES, workers=settings.worker_count())


def dft2_complex(x: np.ndarray) -> np.ndarray:
    return sp_fft.fft2(x, axes=_AXES, workers=settings.worker_count())


def idft2_complex(s: np.ndarray) -> np.ndarray:
    return sp_fft.ifft2(s, axes=_AXES, workers=settings.worker_count())


def imaginary_residue(s: np.ndarray) -> float:
    """Max-norm of the imaginary part that idft2 would discard."""
    return float(np.max(np.abs(idft2_complex(s).imag), initial=0.0))


def idft2(s: np.ndarray, return_residue: bool = False) -> Union[np.ndarray, Tuple[np.ndarray, float]]:
    inv = idft2_complex(s)
    real = np.ascontiguousarray(inv.real)
    residue = float(np.max(np.abs(inv.imag), initial=0.0))
    tolerance = 1e-10 * max(1.0, float(np.max(np.abs(real), initial=0.0)))
    if residue > tolerance:
        logger.warning(f"idft2 discarded imaginary residue {residue:.3e} (input not conjugate-symmetric)")
    if return_residue:
        return real, residue
    return real


def spectral_reflection(a: np.ndarray) -> np.ndarray:
    """Index reflection a(..., (H-h) mod H, (W-w) mod W)."""
    return np.roll(np.flip(a, axis=_AXES), shift=(1, 1), axis=_AXES)


def centered_frequency_grid(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Signed integer frequencies (k, l) per storage index, zero at the origin."""
    k = sp_fft.fftfreq(height, d=1.0 / height)
    l = sp_fft.fftfreq(width, d=1.0 / width)
    return np.meshgrid(k, l, indexing='ij')
