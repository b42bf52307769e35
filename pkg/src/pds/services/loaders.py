import logging
import re
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pds.config import settings
from pds.core.exceptions import DatasetError, EmptyDatasetError, MaskFormatError
from pds.core.fourier import centered_frequency_grid, idft2_complex, dft2
from pds.core.rng import RngStream
from pds.models.tensor import TensorShape
from pds.services.storage import load_tensor

logger = logging.getLogger(__name__)


class TensorLoader(ABC):

    @abstractmethod
    def load(self, file_path: Path) -> Tuple[np.ndarray, float]:
        """Stored values as C x H x W float64, and the value that maps to 1.0."""
        pass

    @abstractmethod
    def supports(self, file_extension: str) -> bool:
        pass


class RawTensorLoader(TensorLoader):

    def load(self, file_path: Path) -> Tuple[np.ndarray, float]:
        return load_tensor(file_path), 1.0

    def supports(self, file_extension: str) -> bool:
        return file_extension.lower() == '.pdst'


class PixmapLoader(TensorLoader):
    """Binary P5 (grey) and P6 (RGB) pixmaps, 8- or 16-bit."""

    _HEADER = re.compile(rb'^(P[56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s')

    def load(self, file_path: Path) -> Tuple[np.ndarray, float]:
        data = Path(file_path).read_bytes()
        match = self._HEADER.match(data)
        if not match:
            raise DatasetError(f"{file_path}: not a binary P5/P6 pixmap")
        magic, width, height, maxval = match.group(1), *(int(g) for g in match.groups()[1:])
        channels = 3 if magic == b'P6' else 1
        dtype = '>u2' if maxval > 255 else 'u1'
        count = width * height * channels
        offset = match.end()
        expected = offset + count * np.dtype(dtype).itemsize
        if len(data) < expected:
            raise DatasetError(f"{file_path}: truncated pixmap, expected {expected} bytes, found {len(data)}")
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=offset).astype(np.float64)
        return pixels.reshape(height, width, channels).transpose(2, 0, 1).copy(), float(maxval)

    def supports(self, file_extension: str) -> bool:
        return file_extension.lower() in ['.pgm', '.ppm', '.pnm']


class TensorLoaderFactory:

    def __init__(self):
        self.loaders = [
            RawTensorLoader(),
            PixmapLoader()
        ]

    def get_loader(self, file_path: Path) -> TensorLoader:
        extension = file_path.suffix

        for loader in self.loaders:
            if loader.supports(extension):
                return loader

        raise DatasetError(f"No loader found for file type: {extension}")

    def register_loader(self, loader: TensorLoader):
        self.loaders.append(loader)


class ValueScaling(str, Enum):
    UNIT = "unit"
    SYMMETRIC = "symmetric"
    RAW = "raw"


@dataclass(frozen=True)
class DatasetSource:
    root: Path
    shape: Optional[Tuple[int, int, int]] = None
    format: Optional[str] = None
    scaling: ValueScaling = ValueScaling.UNIT

    def files(self, factory: TensorLoaderFactory) -> List[Path]:
        root = Path(self.root)
        if not root.exists():
            raise DatasetError(f"Dataset path does not exist: {root}")
        candidates = [root] if root.is_file() else sorted(p for p in root.iterdir() if p.is_file())
        if self.format is not None:
            candidates = [p for p in candidates if p.suffix.lower().lstrip('.') == self.format.lower().lstrip('.')]
        supported = []
        for p in candidates:
            try:
                factory.get_loader(p)
                supported.append(p)
            except DatasetError:
                logger.debug(f"Skipping unsupported file {p}")
        return supported


def _scale(values: np.ndarray, full_scale: float, scaling: ValueScaling) -> np.ndarray:
    if scaling == ValueScaling.RAW:
        return values
    unit = values / full_scale
    return 2.0 * unit - 1.0 if scaling == ValueScaling.SYMMETRIC else unit


def load_dataset(source: DatasetSource, factory: Optional[TensorLoaderFactory] = None) -> List[np.ndarray]:
    """Tensors in lexicographic filename order, scaled per ``source.scaling``."""
    factory = factory or TensorLoaderFactory()
    files = source.files(factory)
    if not files:
        raise EmptyDatasetError(f"No loadable tensors under {source.root}")

    def read(path: Path) -> np.ndarray:
        try:
            values, full_scale = factory.get_loader(path).load(path)
        except (OSError, MaskFormatError) as e:
            raise DatasetError(f"Failed to read {path}: {e}") from e
        return _scale(values, full_scale, ValueScaling(source.scaling))

    workers = min(settings.worker_count(), len(files))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        tensors = list(pool.map(read, files))

    expected = tuple(source.shape) if source.shape is not None else tensors[0].shape
    for path, x in zip(files, tensors):
        if x.shape != expected:
            raise DatasetError(f"{path}: shape {x.shape} does not match {expected}")
    logger.info(f"Loaded {len(tensors)} tensors of shape {expected} from {source.root}")
    return tensors


def subsample(dataset: Sequence[np.ndarray], n: int, rng: RngStream) -> List[np.ndarray]:
    """n items drawn uniformly without replacement, kept in dataset order."""
    if n < 1:
        raise DatasetError(f"Subsample size must be >= 1, got {n}")
    if n >= len(dataset):
        return list(dataset)
    picks = np.sort(rng.generator.choice(len(dataset), size=n, replace=False))
    return [dataset[i] for i in picks]


def synthetic_power_law_dataset(
    n: int,
    shape: Sequence[int],
    rng: RngStream,
    exponent: float = 2.0,
    contrast: float = 0.15,
) -> List[np.ndarray]:
    """Natural-image-like tensors: power spectrum ~ |k|^-exponent around a smooth positive mean, clipped to [0, 1]."""
    shape = TensorShape.of(shape)
    k, l = centered_frequency_grid(shape.height, shape.width)
    amplitude = (1.0 + k ** 2 + l ** 2) ** (-exponent / 4.0)
    amplitude[0, 0] = 0.0
    w = np.linspace(0.0, np.pi, shape.width)
    base = 0.5 + 0.15 * np.cos(w)[None, None, :] * np.linspace(1.0, 0.5, shape.channels)[:, None, None]
    base = np.broadcast_to(base, tuple(shape))
    white = rng.normal((n,) + tuple(shape))
    field = idft2_complex(dft2(white) * amplitude).real
    field /= max(float(field.std()), 1e-12)
    images = np.clip(base + contrast * field, 0.0, 1.0)
    return [images[i] for i in range(n)]
