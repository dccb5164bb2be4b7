"""Exception and warning types shared across the package."""


class DMCRemeshError(Exception):
    """Base class for all errors raised by this package."""


class MeshIOError(DMCRemeshError):
    pass


class ParseError(MeshIOError):
    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.offset = offset


class EmptyMesh(DMCRemeshError):
    pass


class DegenerateBounds(DMCRemeshError):
    pass


class NonManifoldInput(DMCRemeshError):
    pass


class ConfigError(DMCRemeshError, ValueError):
    """Invalid user configuration (maps to CLI exit code 2)."""


class ResolutionOutOfRange(ConfigError):
    pass


class BoundaryNotExterior(DMCRemeshError):
    pass


class NoSignChange(DMCRemeshError):
    pass


class NoSharpEdges(DMCRemeshError):
    pass


class EmptySample(DMCRemeshError):
    pass


class CodecError(DMCRemeshError):
    pass


class ResolutionTooHigh(CodecError):
    pass


class NonCanonicalOrder(CodecError):
    pass


class BadMagic(CodecError):
    pass


class BadVersion(CodecError):
    pass


class ChecksumMismatch(CodecError):
    pass


class TruncatedStream(CodecError):
    pass


class MalformedStream(CodecError):
    """Length, padding or trailing-byte violations not covered by the other variants."""


class InconsistentRecords(CodecError):
    pass


class LeakDetected(UserWarning):
    """Flood fill reached a corner that lies inside the closed input solid."""
