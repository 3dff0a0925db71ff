"""Exception hierarchy shared by every dialsql component."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from dialsql.aide.trajectory import RepairTrajectory


class DialError(Exception):
    """Base class for every domain failure raised by dialsql."""


class PreconditionError(DialError):
    """An operation was called with arguments violating its contract."""


class InvalidTask(DialError):
    """A translation task failed validation."""

    def __init__(self, violations: list[str]) -> None:
        super().__init__("; ".join(violations))
        self.violations = violations


class ParseError(DialError):
    """Text could not be parsed; `line`/`col` locate the failure when known."""

    def __init__(self, message: str, *, line: int | None = None, col: int | None = None) -> None:
        location = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.col = col


class DuplicateObject(DialError):
    """A schema object name was declared twice."""


class PlanFormatError(DialError):
    """The model reply could not be parsed into a plan."""


class BlacklistViolation(DialError):
    """A plan description contains SQL syntax."""


class UnknownCategory(DialError):
    """A category label lies outside the canonical reference."""


class UnsupportedFormat(DialError):
    """A documentation file format is not handled."""


class GenerationFormatError(DialError):
    """A generation reply did not follow its expected layout."""


class EmptyRepository(DialError):
    """The knowledge base holds no entries for the requested dialect."""


class IoError(DialError):
    """Reading or writing knowledge base files failed."""


class CorruptRecord(DialError):
    """A line-delimited record could not be decoded."""

    def __init__(self, path: str, line: int, reason: str) -> None:
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line


class AdapterUnavailable(DialError):
    """No embedded engine is registered for a dialect."""


class RecoveryExhausted(DialError):
    """The syntactic repair budget ran out."""

    def __init__(self, message: str, trajectory: RepairTrajectory) -> None:
        super().__init__(message)
        self.trajectory = trajectory


class VerificationExhausted(DialError):
    """The semantic repair budget ran out."""

    def __init__(self, message: str, trajectory: RepairTrajectory) -> None:
        super().__init__(message)
        self.trajectory = trajectory


class BackendUnavailable(DialError):
    """The chat backend could not be reached or answered with an error."""


class FixtureMiss(DialError):
    """No recorded reply exists for a replay key."""

    def __init__(self, key: str) -> None:
        super().__init__(f"no recorded reply for {key}")
        self.key = key


class MalformedReply(DialError):
    """A backend answered with a payload that has no usable text."""


class UnknownTemplate(DialError):
    """A prompt template id has no file."""


class UnboundPlaceholder(DialError):
    """A prompt template references placeholders that were not bound."""

    def __init__(self, names: list[str]) -> None:
        super().__init__(f"unbound placeholder(s): {', '.join(names)}")
        self.names = names


class InvalidPattern(DialError):
    """A feature pattern is not a valid regular expression."""

    def __init__(self, pattern: str, reason: str) -> None:
        super().__init__(f"invalid pattern {pattern!r}: {reason}")
        self.pattern = pattern


class MissingDialectOutcome(DialError):
    """An item lacks an outcome for one of the evaluated dialects."""
