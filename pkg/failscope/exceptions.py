from typing import TYPE_CHECKING, List

from pydantic import ValidationError

if TYPE_CHECKING:
    from failscope.vm.validate import Defect


class FailscopeException(Exception):
    """Base failscope exception."""


class ConfigurationException(FailscopeException):
    """Raise when a configuration value or experiment parameter is rejected before any work starts."""


class ProgramException(FailscopeException):
    """Base program loading exception."""


class AssemblyParseException(ProgramException):
    """Raise when assembly text cannot be parsed."""

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ProgramValidationException(ProgramException):
    """Raise when a program is loaded or executed without passing static validation."""

    def __init__(self, defects: List["Defect"]) -> None:
        super().__init__("; ".join(str(defect) for defect in defects))
        self.defects = defects


class InstrumentationException(FailscopeException):
    """Raise when instrumentation is requested in an unusable mode or observes diverging executions."""


class CorpusException(FailscopeException):
    """Base corpus exception."""


class EmptyCorpusException(CorpusException):
    """Raise when no execution survives corpus filtering."""


class DatasetException(FailscopeException):
    """Raise when a dataset cannot be balanced, split or scored."""


class ModelException(FailscopeException):
    """Raise when a persisted model cannot be decoded."""


def exit_code_for(exception: BaseException) -> int:
    """Translate an exception into a process exit status.

    Usage and configuration problems map to `1`, everything else to `2`.
    """

    if isinstance(exception, (ConfigurationException, ValidationError, FileNotFoundError)):
        return 1
    return 2
