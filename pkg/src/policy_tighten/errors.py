"""Exception hierarchy shared by every subcommand."""

from __future__ import annotations

from typing import Any

EXIT_INPUT = 1
EXIT_INCONSISTENT = 2
EXIT_RESOURCE = 3


class PolicyToolError(Exception):
    """Base class for errors that end a CLI invocation."""

    exit_code = EXIT_INPUT


class ParseError(PolicyToolError):
    """Raised when a schema, policy, entity or log document is malformed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 source: str | None = None) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = source or "<input>"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


class SchemaError(PolicyToolError):
    """Raised when a schema is well-formed but references are invalid."""


class EntityError(PolicyToolError):
    """Raised when an entity document does not validate against the schema."""


class TypeCheckError(PolicyToolError):
    """Raised when an expression or rule does not type-check."""

    def __init__(self, message: str, expr_text: str | None = None,
                 rule_id: str | None = None) -> None:
        self.message = message
        self.expr_text = expr_text
        self.rule_id = rule_id
        text = message
        if expr_text:
            text += f" in `{expr_text}`"
        if rule_id:
            text = f"rule {rule_id}: {text}"
        super().__init__(text)


class LogError(PolicyToolError):
    """Raised on malformed or contradictory access-log entries."""


class ConfigError(PolicyToolError):
    """Raised when configuration values are out of range."""


class InfeasibleDensityError(PolicyToolError):
    """Raised when a log density cannot be honoured by a generated store."""


class InconsistentLogError(PolicyToolError):
    """Raised when the initial policy disagrees with the access log."""

    exit_code = EXIT_INCONSISTENT

    def __init__(self, violations: list[Any]) -> None:
        self.violations = violations
        super().__init__(
            f"policy is inconsistent with the access log ({len(violations)} violating entries)"
        )


class ResourceCapError(PolicyToolError):
    """Raised when a materialized request set exceeds its configured cap."""

    exit_code = EXIT_RESOURCE

    def __init__(self, what: str, cap: int, observed: int) -> None:
        self.what = what
        self.cap = cap
        self.observed = observed
        super().__init__(f"{what} exceeds the cap of {cap} requests (at least {observed})")


class RequestError(PolicyToolError):
    """Raised when a request does not fit the schema's action declarations."""


class ExportError(PolicyToolError):
    """Raised when a rule or candidate cannot be encoded as a synthesis problem."""


class EvalError(Exception):
    """Raised while evaluating an expression; absorbed by rule application."""
