"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class AFRError(Exception):
    """Base class for every error raised by hybrid_afr."""


class InvalidArgument(AFRError, ValueError):
    pass


class PlacementRejected(AFRError):
    """A feature footprint overlaps existing geometry or leaves its host face."""


class TopologyError(AFRError):
    pass


class GeometryError(AFRError):
    pass


class MeshError(AFRError):
    pass


class InputError(AFRError):
    pass


class OversizeGraph(AFRError):
    pass


class ContainerError(AFRError):
    """Corrupt, truncated or foreign .hgb / checkpoint file."""


class ConfigError(AFRError):
    pass


class NumericError(AFRError, FloatingPointError):
    pass


class ExtractionMismatch(AFRError):
    """Geometry of an instance does not fit the rules of its recognized class."""


class NoData(AFRError):
    pass


class StepError(AFRError):
    """Any failure while reading or writing a STEP document."""

    def __init__(self, message: str, entity_id: int | None = None):
        super().__init__(message)
        self.entity_id = entity_id


class StepSyntaxError(StepError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class DanglingReference(StepError):
    pass


class ReferenceCycle(StepError):
    pass


class UnsupportedEntity(StepError):
    pass


class UnsupportedGeometry(StepError):
    pass


class StepStructureError(StepError):
    """Entities parse but do not describe a valid solid."""
