import functools
import json
import logging
import sys
from typing import Any, Callable, Dict, Optional

# Get logger
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INCONCLUSIVE = 1
EXIT_VIOLATION = 2


class ApplicationError(Exception):
    """Base application exception."""

    error_name = "application_error"

    def __init__(self, message: str, exit_code: int = EXIT_VIOLATION, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class RankMismatchError(ApplicationError):
    error_name = "rank_mismatch"

    def __init__(self, left: int, right: int):
        super().__init__(f"Rank mismatch: {left} vs {right}", details={"left": left, "right": right})


class NotAnAutomorphismError(ApplicationError):
    error_name = "not_an_automorphism"


class BudgetExceededError(ApplicationError):
    error_name = "budget_exceeded"


class PlateauCapError(BudgetExceededError):
    error_name = "plateau_cap_exceeded"


class PreconditionError(ApplicationError):
    error_name = "precondition_violation"


class NotFoundWithinBudgetError(ApplicationError):
    error_name = "not_found_within_budget"


class NoWitnessFoundError(ApplicationError):
    error_name = "no_witness_found"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_INCONCLUSIVE, details=details)


class NotCertifiedExponentialError(ApplicationError):
    error_name = "not_certified_exponential"


class InconclusiveError(ApplicationError):
    """Budgets ran out before a verdict; `partial` holds whatever was computed."""

    error_name = "inconclusive"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None, partial: Any = None):
        super().__init__(message, exit_code=EXIT_INCONCLUSIVE, details=details)
        self.partial = partial


class InvalidFixtureError(ApplicationError):
    error_name = "invalid_fixture"

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message, details={"index": index} if index is not None else {})
        self.index = index


class ParseError(ApplicationError):
    error_name = "parse_error"

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None, source: str = ""):
        location = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(
            f"{message}{location}" + (f" in {source}" if source else ""),
            details={"line": line, "column": column, "source": source},
        )
        self.line = line
        self.column = column


def error_payload(exc: Exception) -> Dict[str, Any]:
    """JSON body describing an error, as written to stderr by the CLI."""
    if isinstance(exc, ApplicationError):
        return {"error": exc.error_name, "message": exc.message, "details": exc.details}
    return {"error": "internal_error", "message": "An unexpected error occurred"}


def register_exception_handlers(entry: Callable[..., int]) -> Callable[..., int]:
    """Wrap a CLI entry point so domain errors become exit codes."""

    @functools.wraps(entry)
    def handled(*args: Any, **kwargs: Any) -> int:
        try:
            return entry(*args, **kwargs)
        except ApplicationError as exc:
            logger.error(f"Application error: {exc.message}", extra={"details": exc.details})
            print(json.dumps(error_payload(exc), sort_keys=True, default=str), file=sys.stderr)
            return exc.exit_code
        except Exception as exc:
            logger.error(f"Unexpected error: {str(exc)}")
            print(json.dumps(error_payload(exc), sort_keys=True), file=sys.stderr)
            return EXIT_VIOLATION

    return handled
