"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class LatentGraphError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class DataError(LatentGraphError):
    exit_code = 2


class ConfigError(LatentGraphError):
    exit_code = 1


class NumericalError(LatentGraphError):
    exit_code = 3


# ingest
class MalformedRow(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonMonotonicTimestamps(DataError):
    pass


class NonPositivePrice(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class HttpError(DataError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class GapDetected(DataError):
    def __init__(self, gaps: list[tuple[int, int]]):
        listed = ", ".join(f"{a}->{b}" for a, b in gaps[:20])
        super().__init__(f"{len(gaps)} gap(s) in bar sequence: {listed}")
        self.gaps = gaps


# windowing / model / embedding
class EmptyBatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch


class EmptyLatentList(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# stability
class DegenerateInput(NumericalError):
    pass


class BlockTooShort(DataError):
    def __init__(self, block: int, message: str):
        super().__init__(f"block {block}: {message}")
        self.block = block


# diagnostics
class ConstantRegressor(NumericalError):
    pass


class LengthMismatch(DataError):
    pass


class SingularDesign(NumericalError):
    pass


class MissingSeries(DataError):
    def __init__(self, node: str):
        super().__init__(f"no price series for node {node!r}")
        self.node = node


# synth
class InvalidRho(ConfigError):
    pass


class SpecInvalid(ConfigError):
    pass
