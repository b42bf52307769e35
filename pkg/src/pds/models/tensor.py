from typing import NamedTuple, Sequence

import numpy as np

from pds.core.exceptions import InvalidParameterError


class TensorShape(NamedTuple):
    channels: int
    height: int
    width: int

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width

    @classmethod
    def of(cls, shape: Sequence[int]) -> "TensorShape":
        if len(shape) != 3 or any(int(s) < 1 for s in shape):
            raise InvalidParameterError(f"Tensor shape must be three positive integers, got {tuple(shape)}")
        return cls(*(int(s) for s in shape))


def inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean inner product over the trailing C, H, W axes."""
    return np.sum(x * y, axis=(-3, -2, -1))
