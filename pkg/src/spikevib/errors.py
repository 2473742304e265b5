"""Exception types shared across the pipeline.

Each class maps to one CLI exit code so scripted callers can branch on
failure category without parsing messages.
"""


class SpikevibError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class RejectedInputError(SpikevibError):
    """Input violates an operation precondition (bad rates, ranges, counts)."""

    exit_code = 3


class ParseError(SpikevibError):
    """A data file could not be parsed. Carries the offending line when known."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")


class ContractViolationError(SpikevibError):
    """A runtime contract was broken (non-monotone time, unsorted events)."""

    exit_code = 4


class FilterDesignError(SpikevibError):
    """A filter could not be designed for the requested parameters."""

    exit_code = 3


class TuningFailureError(SpikevibError):
    """Every point of the tuning grid produced output spikes."""

    exit_code = 5
