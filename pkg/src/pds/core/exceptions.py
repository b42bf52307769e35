from typing import Optional


class PDSError(Exception):
    pass


class ShapeMismatchError(PDSError, ValueError):

    def __init__(self, expected, actual, what: str = "tensor"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"Shape mismatch for {what}: expected {self.expected}, got {self.actual}")


class InvalidParameterError(PDSError, ValueError):
    pass


class DivergenceError(PDSError, ArithmeticError):

    def __init__(self, iteration: int, chain: Optional[int] = None, phase: Optional[str] = None):
        self.iteration = iteration
        self.chain = chain
        self.phase = phase
        where = f"iteration {iteration}"
        if phase:
            where += f" ({phase})"
        if chain is not None:
            where = f"chain {chain}, " + where
        super().__init__(f"Non-finite state at {where}")


class DatasetError(PDSError):
    pass


class EmptyDatasetError(DatasetError, ValueError):
    pass


class MaskFormatError(PDSError):
    pass


class BadMagicError(MaskFormatError):

    def __init__(self, path, expected: bytes, actual: bytes):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: bad magic {actual!r}, expected {expected!r}")


class TruncatedFileError(MaskFormatError):

    def __init__(self, path, expected_bytes: int, actual_bytes: int):
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes
        super().__init__(f"{path}: truncated, expected {expected_bytes} bytes, found {actual_bytes}")


class VersionMismatchError(MaskFormatError):

    def __init__(self, path, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: unsupported format version {actual}, expected {expected}")


class FitError(PDSError, ValueError):
    pass


class ExtrapolationError(FitError):

    def __init__(self, T: float, y: float):
        self.T = T
        self.y = y
        super().__init__(f"No valid alpha at T={T}: fitted value {y:.6g} is not positive")


class VerificationError(PDSError):
    pass
