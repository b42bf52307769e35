"""Frequency and pixel preconditioners.

M_f[x] = Re F^-1(F[x] / R_f) and M_p[x] = x / R_p, composed as M = M_f M_p.
Both factors are self-adjoint, so M^T = M_p M_f.
"""
import logging
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from pds.config import settings
from pds.core.exceptions import EmptyDatasetError, InvalidParameterError, ShapeMismatchError
from pds.core.fourier import dft2, idft2_complex, spectral_reflection
from pds.models.masks import GradientOrder, PixelMask, Preconditioner, SpectralMask

logger = logging.getLogger(__name__)


def _dataset_moments(dataset: Iterable[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, int]:
    """Mean power spectrum |F[x]|^2 and mean second moment x*x, reduced in dataset order."""
    power = None
    second = None
    count = 0
    shape = None
    for x in dataset:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise InvalidParameterError(f"Dataset items must be C x H x W, got shape {x.shape}")
        if shape is None:
            shape = x.shape
            power = np.zeros(shape)
            second = np.zeros(shape)
        elif x.shape != shape:
            raise ShapeMismatchError(shape, x.shape, f"dataset item {count}")
        spectrum = dft2(x)
        power += (spectrum * np.conj(spectrum)).real
        second += x * x
        count += 1
    if count == 0:
        raise EmptyDatasetError("Cannot build a mask from an empty dataset")
    return power / count, second / count, count


def _normalize(raw: np.ndarray, alpha: float, what: str) -> Tuple[np.ndarray, int, Tuple[str, ...]]:
    if alpha < 1:
        raise InvalidParameterError(f"alpha must be >= 1, got {alpha}")
    peak = float(np.max(raw))
    if peak <= 0:
        message = f"{what} statistics are all zero; using the identity mask"
        logger.warning(message)
        return np.ones_like(raw), 0, (message,)

    values = (raw / peak + alpha - 1.0) / alpha
    low = values < settings.PDS_MASK_FLOOR
    floored = int(np.count_nonzero(low))
    warnings: Tuple[str, ...] = ()
    if floored:
        message = f"{floored} {what} mask entries floored at {settings.PDS_MASK_FLOOR:g}"
        logger.warning(message)
        values = np.where(low, settings.PDS_MASK_FLOOR, values)
        warnings = (message,)
    return values, floored, warnings


def symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + spectral_reflection(values))


def build_masks(dataset: Iterable[np.ndarray], alpha: float) -> Tuple[SpectralMask, PixelMask]:
    """Both masks from one pass over the dataset, sharing alpha."""
    if alpha < 1:
        raise InvalidParameterError(f"alpha must be >= 1, got {alpha}")
    power, second, count = _dataset_moments(dataset)
    freq_values, freq_floored, freq_warnings = _normalize(symmetrize(np.log(power + 1.0)), alpha, "frequency")
    pixel_values, pixel_floored, pixel_warnings = _normalize(np.log(second + 1.0), alpha, "pixel")
    logger.info(f"Built masks from {count} tensors with alpha={alpha:g}")
    return (
        SpectralMask(symmetrize(freq_values), alpha, freq_floored, freq_warnings),
        PixelMask(pixel_values, alpha, pixel_floored, pixel_warnings),
    )


def build_frequency_mask(dataset: Iterable[np.ndarray], alpha: float) -> SpectralMask:
    return build_masks(dataset, alpha)[0]


def build_pixel_mask(dataset: Iterable[np.ndarray], alpha: float) -> PixelMask:
    return build_masks(dataset, alpha)[1]


def build_radial_mask(height: int, width: int, radius: float, lam: float, channels: int = 1) -> SpectralMask:
    """1 inside the centred disc (h-H/2)^2 + (w-W/2)^2 <= 2 r^2, lam outside. Not normalized."""
    if radius <= 0 or lam <= 0:
        raise InvalidParameterError(f"radius and lambda must be positive, got r={radius}, lambda={lam}")
    h = np.arange(height)[:, None]
    w = np.arange(width)[None, :]
    inside = (h - 0.5 * height) ** 2 + (w - 0.5 * width) ** 2 <= 2.0 * radius ** 2
    centered = np.where(inside, 1.0, float(lam))
    stored = np.fft.ifftshift(centered, axes=(-2, -1))
    values = symmetrize(np.broadcast_to(stored, (channels, height, width)))
    return SpectralMask(values, 1.0)


def build_matched_frequency_mask(spectral_variance: np.ndarray) -> SpectralMask:
    """R_f = sqrt(min lambda / lambda): equalizes the drift rates of a frequency-diagonal Gaussian."""
    lam = np.asarray(spectral_variance, dtype=np.float64)
    if np.any(lam <= 0):
        raise InvalidParameterError("Spectral variances must be strictly positive")
    return SpectralMask(symmetrize(np.sqrt(lam.min() / lam)), 1.0)


def build_matched_pixel_mask(variances: np.ndarray) -> PixelMask:
    v = np.asarray(variances, dtype=np.float64)
    if np.any(v <= 0):
        raise InvalidParameterError("Variances must be strictly positive")
    return PixelMask(np.sqrt(v.min() / v), 1.0)


def _divide_spectrum(x: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(idft2_complex(dft2(x) / values).real)


def _multiply_spectrum(x: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(idft2_complex(dft2(x) * values).real)


def apply_frequency(mask: Optional[SpectralMask], x: np.ndarray) -> np.ndarray:
    if mask is None or mask.is_identity:
        return x
    mask.check_shape(x)
    return _divide_spectrum(x, mask.values)


def apply_pixel(mask: Optional[PixelMask], x: np.ndarray) -> np.ndarray:
    if mask is None or mask.is_identity:
        return x
    mask.check_shape(x)
    return x / mask.values


def _check(p: Preconditioner, x: np.ndarray):
    if p.shape is not None and tuple(x.shape[-3:]) != p.shape:
        raise ShapeMismatchError(p.shape, x.shape[-3:], "preconditioner operand")


def apply_M(p: Optional[Preconditioner], x: np.ndarray) -> np.ndarray:
    if p is None or p.is_identity:
        return x
    _check(p, x)
    return apply_frequency(p.active_frequency, apply_pixel(p.active_pixel, x))


def apply_adjoint(p: Optional[Preconditioner], x: np.ndarray) -> np.ndarray:
    if p is None or p.is_identity:
        return x
    _check(p, x)
    return apply_pixel(p.active_pixel, apply_frequency(p.active_frequency, x))


def apply_inverse_M(p: Optional[Preconditioner], x: np.ndarray) -> np.ndarray:
    if p is None or p.is_identity:
        return x
    _check(p, x)
    y = x
    if p.active_frequency is not None:
        y = _multiply_spectrum(y, p.active_frequency.values)
    if p.active_pixel is not None:
        y = y * p.active_pixel.values
    return y


def apply_gradient_transform(p: Optional[Preconditioner], g: np.ndarray) -> np.ndarray:
    """M[M^T[g]] (default) or M_p[M_f[M_f[M_p[g]]]].

    Adjacent factors of the same mask are fused into one division by the squared mask.
    """
    if p is None or p.is_identity:
        return g
    _check(p, g)
    freq, pixel = p.active_frequency, p.active_pixel
    if p.gradient_order == GradientOrder.MT_THEN_M:
        y = _divide_spectrum(g, freq.values) if freq is not None else g
        if pixel is not None:
            y = y / pixel.values ** 2
        return _divide_spectrum(y, freq.values) if freq is not None else y

    y = g / pixel.values if pixel is not None else g
    if freq is not None:
        y = _divide_spectrum(y, freq.values ** 2)
    return y / pixel.values if pixel is not None else y


def mask_summary(mask) -> Dict[str, float]:
    values = mask.values
    prob = values / values.sum()
    return {
        'kind': mask.kind.name.lower(),
        'alpha': float(mask.alpha),
        'min': float(values.min()),
        'max': float(values.max()),
        'mean': float(values.mean()),
        'entropy': float(-np.sum(prob * np.log(prob))),
        'floored': int(mask.floored_count),
    }


def contraction_rates(p: Optional[Preconditioner], spectral_precision: np.ndarray, step_size: float = 1.0) -> np.ndarray:
    """Per-frequency contraction rate h * a(k) / R_f(k)^2 of the preconditioned linear drift."""
    precision = np.asarray(spectral_precision, dtype=np.float64)
    if p is not None and p.active_pixel is not None:
        raise InvalidParameterError("Contraction rates are only diagonal in frequency without a pixel mask")
    if p is None or p.active_frequency is None:
        return step_size * precision
    return step_size * precision / p.active_frequency.values ** 2


def condition_number(rates: np.ndarray) -> float:
    return float(np.max(rates) / np.min(rates))
