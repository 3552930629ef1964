"""Exception types shared across the pipeline."""

from __future__ import annotations


class SailstateError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(SailstateError):
    """Error tied to a location in a source file."""

    def __init__(self, message: str, path: str = "<unknown>", line: int = 0, col: int = 0):
        self.path = path
        self.line = line
        self.col = col
        super().__init__(f"{path}:{line}:{col}: {message}")


class UnterminatedComment(SourceError):
    pass


class UnterminatedStringLiteral(SourceError):
    pass


class MalformedDeclaration(SourceError):
    pass


class DuplicateDefinition(SourceError):
    pass


class CrossFileDuplicate(SailstateError):
    pass


class IoError(SailstateError):
    """A corpus or fixture file could not be read."""


class BackendConfigError(SailstateError):
    pass


class UnknownCsrAddress(SailstateError):
    pass


class UnknownInstruction(SailstateError):
    pass


class MissingEntryFunction(SailstateError):
    """Raised only when callers opt into strict baseline checking."""


class UnknownState(SailstateError):
    pass


class UnknownMode(SailstateError):
    pass


class MalformedSExpression(SailstateError):
    def __init__(self, message: str, path: str = "<trace>", line: int = 0):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class MissingManifestEntry(SailstateError):
    pass


class MixedGroup(SailstateError):
    pass


class TraceManifestError(SailstateError):
    pass


class MalformedLine(SailstateError):
    pass


class UnknownAction(SailstateError):
    pass


class PairMismatch(SailstateError):
    pass
