"""Binary mask (PDSM) and tensor (PDST) files, plus P5 pixmap export.

PDSM: magic, u16 version, u8 kind, C H W as u32, alpha f64, then C*H*W f64.
PDST: magic, u16 version, C H W as u32, then C*H*W f32.
All little-endian, values row-major.
"""
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from pds.config import settings
from pds.core.exceptions import BadMagicError, MaskFormatError, TruncatedFileError, VersionMismatchError
from pds.models.masks import MaskKind, PixelMask, SpectralMask

logger = logging.getLogger(__name__)

_MASK_HEADER = struct.Struct('<4sHB3Id')
_TENSOR_HEADER = struct.Struct('<4sH3I')

Mask = Union[SpectralMask, PixelMask]


def _read_header(path: Path, data: bytes, header: struct.Struct, magic: bytes) -> tuple:
    if data[:len(magic)] != magic[:len(data)]:
        raise BadMagicError(path, magic, data[:len(magic)])
    if len(data) < header.size:
        raise TruncatedFileError(path, header.size, len(data))
    fields = header.unpack_from(data)
    if fields[1] != settings.FORMAT_VERSION:
        raise VersionMismatchError(path, settings.FORMAT_VERSION, fields[1])
    return fields


def _payload(path: Path, data: bytes, offset: int, count: int, dtype: str) -> np.ndarray:
    expected = offset + count * np.dtype(dtype).itemsize
    if len(data) < expected:
        raise TruncatedFileError(path, expected, len(data))
    if len(data) > expected:
        logger.warning(f"{path}: {len(data) - expected} trailing bytes ignored")
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset)


def mask_to_bytes(mask: Mask) -> bytes:
    c, h, w = mask.shape
    header = _MASK_HEADER.pack(settings.MASK_MAGIC, settings.FORMAT_VERSION, int(mask.kind), c, h, w, float(mask.alpha))
    return header + np.ascontiguousarray(mask.values, dtype='<f8').tobytes()


def save_mask(path: Path, mask: Mask) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(mask_to_bytes(mask))
    logger.info(f"Saved {mask.kind.name.lower()} mask {mask.shape} to {path}")
    return path


def load_mask(path: Path) -> Mask:
    path = Path(path)
    data = path.read_bytes()
    _, _, kind, c, h, w, alpha = _read_header(path, data, _MASK_HEADER, settings.MASK_MAGIC)
    values = _payload(path, data, _MASK_HEADER.size, c * h * w, '<f8').reshape(c, h, w)
    try:
        kind = MaskKind(kind)
    except ValueError:
        raise MaskFormatError(f"{path}: unknown mask kind {kind}")
    cls = SpectralMask if kind == MaskKind.FREQUENCY else PixelMask
    return cls(values.astype(np.float64), alpha)


def save_tensor(path: Path, x: np.ndarray) -> Path:
    x = np.asarray(x)
    if x.ndim != 3:
        raise MaskFormatError(f"PDST files hold a single C x H x W tensor, got shape {x.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _TENSOR_HEADER.pack(settings.TENSOR_MAGIC, settings.FORMAT_VERSION, *x.shape)
    path.write_bytes(header + np.ascontiguousarray(x, dtype='<f4').tobytes())
    return path


def load_tensor(path: Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    _, _, c, h, w = _read_header(path, data, _TENSOR_HEADER, settings.TENSOR_MAGIC)
    return _payload(path, data, _TENSOR_HEADER.size, c * h * w, '<f4').reshape(c, h, w).astype(np.float64)


def save_pixmap(path: Path, channel: np.ndarray, low: float = None, high: float = None) -> Path:
    """Write one H x W channel as binary P5, min-max scaled to 0..255 unless bounds are given."""
    channel = np.asarray(channel, dtype=np.float64)
    low = float(channel.min()) if low is None else low
    high = float(channel.max()) if high is None else high
    span = high - low if high > low else 1.0
    pixels = np.clip(np.rint((channel - low) / span * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode('ascii')
    path.write_bytes(header + pixels.tobytes())
    return path
