"""Exception types shared across the package.

The CLI maps these onto exit codes: validation and configuration problems
are usage errors, file-format problems are I/O errors, and solver or
reconstruction failures are numeric errors.
"""


class LimrsfError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(LimrsfError, ValueError):
    """A value or combination of values violates a documented contract."""


class ConfigError(LimrsfError, ValueError):
    """Configuration text, a key, or a value is malformed or out of bounds."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"config line {line}: {message}"
        super().__init__(message)


class PlyError(LimrsfError):
    """Base class for PLY read/write failures."""


class PlyHeaderError(PlyError):
    """Malformed PLY header."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"PLY header line {line}: {message}")


class PlyPropertyError(PlyError):
    """Unknown or unsupported property in an otherwise well-formed header."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"PLY header line {line}: {message}")


class PlyTruncatedError(PlyError):
    """Payload shorter or longer than the header declares."""

    def __init__(self, message: str, *, expected: int, actual: int, offset: int | None = None):
        self.expected = expected
        self.actual = actual
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where} (expected {expected}, got {actual})")


class PlyCountError(PlyError):
    """Element or list counts inconsistent with the header."""

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        self.line = line
        self.offset = offset
        if line is not None:
            message = f"PLY body line {line}: {message}"
        elif offset is not None:
            message = f"PLY body byte {offset}: {message}"
        super().__init__(message)


class ImageFormatError(LimrsfError):
    """A netpbm file violates the supported subset."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"byte {offset}: {message}"
        super().__init__(message)


class ProtocolError(LimrsfError):
    """Base class for wire-format decode failures.

    ``offset`` is the byte position, within the buffer handed to the
    decoder, at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


class BadMagicError(ProtocolError):
    """Frame does not start with the expected magic bytes."""


class UnsupportedVersionError(ProtocolError):
    """Message carries a version this decoder does not speak."""


class UnknownFlagsError(ProtocolError):
    """Message sets flag bits this decoder does not define."""


class TruncatedMessageError(ProtocolError):
    """Buffer ends before the declared payload does."""

    def __init__(self, message: str, *, expected: int, actual: int, offset: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{message} (expected {expected} bytes, got {actual})", offset)


class TrailingDataError(ProtocolError):
    """Buffer continues past the end of the declared payload."""


class TriangleIndexOutOfRangeError(ProtocolError):
    """A triangle references a vertex index >= vertex_count."""

    def __init__(self, *, index: int, vertex_count: int, offset: int):
        self.index = index
        self.vertex_count = vertex_count
        super().__init__(
            f"triangle index {index} out of range for {vertex_count} vertices", offset
        )


class FrameLengthError(ProtocolError):
    """Frame declares a payload longer than the decoder is willing to buffer."""


class SolverError(LimrsfError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, *, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")


class ReconstructionError(LimrsfError):
    """Surface reconstruction cannot proceed on this input."""


class PipelineStageError(LimrsfError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
