"""Access logs: parsing, consistency against a policy and per-rule slices."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

from policy_tighten.cedar.ast import (
    Decision,
    EntityUid,
    Policy,
    Request,
    Rule,
    make_context,
    request_sort_key,
)
from policy_tighten.cedar.entities import EntityStore, check_value, parse_uid
from policy_tighten.cedar.evaluator import compile_policy, compile_rule, validate_request
from policy_tighten.cedar.schema import ACTION_TYPE, Schema
from policy_tighten.errors import EntityError, LogError, ParseError, RequestError

logger = logging.getLogger(__name__)

_FIELDS = {"principal", "action", "resource", "context", "decision"}


@dataclass
class AccessLog:
    """Set of labelled requests; a request never carries two labels."""

    entries: dict[Request, Decision] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, req: object) -> bool:
        return req in self.entries

    def add(self, req: Request, decision: Decision) -> None:
        existing = self.entries.get(req)
        if existing is not None and existing is not decision:
            raise LogError(f"request {req} is labelled both {existing.value} and {decision.value}")
        self.entries[req] = decision

    def sorted_entries(self) -> list[tuple[Request, Decision]]:
        return sorted(self.entries.items(), key=lambda item: request_sort_key(item[0]))

    def count(self, decision: Decision) -> int:
        return sum(1 for d in self.entries.values() if d is decision)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[Request, Decision]]) -> "AccessLog":
        log = cls()
        for req, decision in entries:
            log.add(req, decision)
        return log


@dataclass(frozen=True)
class LogSlice:
    rule_id: str
    requests: frozenset[Request] = frozenset()

    def __len__(self) -> int:
        return len(self.requests)


@dataclass(frozen=True)
class Violation:
    request: Request
    logged: Decision
    actual: Decision

    def to_dict(self) -> dict[str, Any]:
        return {
            "request": str(self.request),
            "logged": self.logged.value,
            "policy": self.actual.value,
        }


@dataclass
class ConsistencyReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "checked": self.checked,
            "consistent": self.consistent,
            "violations": [v.to_dict() for v in self.violations],
        }


# --- parsing ---


def _parse_action(value: Any) -> str:
    if not isinstance(value, str):
        raise LogError(f"'action' must be a string, got {value!r}")
    if "::" in value:
        uid = parse_uid(value)
        if uid.type != ACTION_TYPE:
            raise LogError(f"'action' must reference an {ACTION_TYPE}, got {uid}")
        return uid.id
    return value


def _parse_entity(value: Any, name: str) -> EntityUid:
    if isinstance(value, dict) and set(value) == {"type", "id"}:
        return EntityUid(str(value["type"]), str(value["id"]))
    if not isinstance(value, str):
        raise LogError(f"'{name}' must be a Type::\"id\" string, got {value!r}")
    return parse_uid(value)


def _parse_entry(record: Any, schema: Schema) -> tuple[Request, Decision]:
    if not isinstance(record, dict):
        raise LogError("entry must be a JSON object")
    missing = {"principal", "action", "resource", "decision"} - set(record)
    if missing:
        raise LogError(f"missing field(s) {', '.join(sorted(missing))}")
    unknown = set(record) - _FIELDS
    if unknown:
        raise LogError(f"unknown field(s) {', '.join(sorted(unknown))}")

    action = _parse_action(record["action"])
    decl = schema.actions.get(action)
    if decl is None:
        raise LogError(f"unknown action '{action}'")

    raw_context = record.get("context") or {}
    if not isinstance(raw_context, dict):
        raise LogError("'context' must be a flat object")
    context = {}
    for name, value in raw_context.items():
        attr = decl.context_attrs.get(name)
        if attr is None:
            raise LogError(f"context attribute '{name}' is not declared for '{action}'")
        context[name] = check_value(value, attr.type, f"context attribute '{name}'")

    try:
        decision = Decision(record["decision"])
    except ValueError:
        raise LogError(
            f"'decision' must be 'allowed' or 'denied', got {record['decision']!r}"
        ) from None

    req = Request(
        _parse_entity(record["principal"], "principal"),
        action,
        _parse_entity(record["resource"], "resource"),
        make_context(context),
    )
    validate_request(req, schema)
    return req, decision


def parse_log(text: str, schema: Schema, source: str | None = None) -> AccessLog:
    """Parse a line-delimited JSON log; duplicate entries with the same label collapse."""
    log = AccessLog()
    where = source or "<log>"
    lines = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        lines += 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed log entry: {e.msg}", lineno, e.colno, source) from None
        try:
            req, decision = _parse_entry(record, schema)
            log.add(req, decision)
        except (LogError, ParseError, EntityError, RequestError) as e:
            message = e.message if isinstance(e, ParseError) else str(e)
            raise LogError(f"{where}:{lineno}: {message}") from None
    if lines != len(log):
        logger.debug("%s: collapsed %d duplicate entries", where, lines - len(log))
    return log


def _encode_context_value(value: Any) -> Any:
    if isinstance(value, EntityUid):
        return str(value)
    return value


def dump_log(log: AccessLog) -> str:
    """Serialize in the line format, ordered by request."""
    lines = []
    for req, decision in log.sorted_entries():
        record: dict[str, Any] = {
            "principal": str(req.principal),
            "action": req.action,
            "resource": str(req.resource),
        }
        if req.context:
            record["context"] = {k: _encode_context_value(v) for k, v in req.context}
        record["decision"] = decision.value
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


# --- analysis ---


def check_consistency(policy: Policy, log: AccessLog, store: EntityStore) -> ConsistencyReport:
    """Replay every log entry against the policy."""
    decide = compile_policy(policy)
    report = ConsistencyReport(checked=len(log))
    for req, logged in log.sorted_entries():
        actual = decide(req, store)
        if actual is not logged:
            report.violations.append(Violation(req, logged, actual))
    if report.violations:
        logger.debug("%d of %d log entries disagree with the policy",
                     len(report.violations), report.checked)
    return report


def permitted_log(log: AccessLog) -> frozenset[Request]:
    return frozenset(req for req, d in log.entries.items() if d is Decision.ALLOWED)


def log_slice(rule: Rule, log_plus: Iterable[Request], store: EntityStore) -> LogSlice:
    """Allowed log requests that `rule` permits on its own."""
    applies = compile_rule(rule)
    return LogSlice(rule.id, frozenset(req for req in log_plus if applies(req, store)))
