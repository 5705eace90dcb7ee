"""Serialize expressions, rules and policies back to policy text."""

from __future__ import annotations

import re

from policy_tighten.cedar.ast import (
    And,
    ActionConstraint,
    BinOp,
    EntityUid,
    Expr,
    GetAttr,
    Has,
    Is,
    Lit,
    Not,
    Or,
    Policy,
    Rule,
    ScopeConstraint,
    SetLit,
    Var,
    value_sort_key,
)
from policy_tighten.cedar.schema import ACTION_TYPE

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED = {"true", "false", "if", "then", "else", "in", "is", "has", "like"}

# Binding strength, loosest first
_PREC_OR = 1
_PREC_AND = 2
_PREC_REL = 3
_PREC_UNARY = 4
_PREC_MEMBER = 5
_PREC_PRIMARY = 6


def format_string(text: str) -> str:
    escaped = (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
        .replace("\0", "\\0")
    )
    return f'"{escaped}"'


def format_uid(uid: EntityUid) -> str:
    return f"{uid.type}::{format_string(uid.id)}"


def format_value(value: object) -> str:
    """Policy-syntax literal for a runtime value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return format_string(value)
    if isinstance(value, EntityUid):
        return format_uid(value)
    if isinstance(value, frozenset):
        return "[" + ", ".join(format_value(v) for v in sorted(value, key=value_sort_key)) + "]"
    raise TypeError(f"cannot format value {value!r}")


def _attr_suffix(attr: str) -> str:
    if _IDENT_RE.match(attr) and attr not in _RESERVED:
        return f".{attr}"
    return f"[{format_string(attr)}]"


def _attr_name(attr: str) -> str:
    if _IDENT_RE.match(attr) and attr not in _RESERVED:
        return attr
    return format_string(attr)


def _prec(e: Expr) -> int:
    if isinstance(e, Or):
        return _PREC_OR
    if isinstance(e, And):
        return _PREC_AND
    if isinstance(e, (BinOp, Has, Is)):
        return _PREC_REL
    if isinstance(e, Not):
        return _PREC_UNARY
    if isinstance(e, Lit) and isinstance(e.value, int) and not isinstance(e.value, bool) and e.value < 0:
        return _PREC_UNARY
    if isinstance(e, GetAttr):
        return _PREC_MEMBER
    return _PREC_PRIMARY


def _wrap(e: Expr, minimum: int) -> str:
    text = format_expr(e)
    return f"({text})" if _prec(e) < minimum else text


def format_expr(e: Expr) -> str:
    """Render with the fewest parentheses that preserve the tree shape."""
    if isinstance(e, Lit):
        return format_value(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, SetLit):
        return "[" + ", ".join(format_expr(i) for i in e.items) + "]"
    if isinstance(e, GetAttr):
        return _wrap(e.expr, _PREC_MEMBER) + _attr_suffix(e.attr)
    if isinstance(e, Has):
        return f"{_wrap(e.expr, _PREC_UNARY)} has {_attr_name(e.attr)}"
    if isinstance(e, Is):
        return f"{_wrap(e.expr, _PREC_UNARY)} is {e.type_name}"
    if isinstance(e, BinOp):
        return f"{_wrap(e.left, _PREC_UNARY)} {e.op} {_wrap(e.right, _PREC_UNARY)}"
    if isinstance(e, Not):
        return "!" + _wrap(e.expr, _PREC_UNARY)
    if isinstance(e, And):
        return f"{_wrap(e.left, _PREC_AND)} && {_wrap(e.right, _PREC_AND + 1)}"
    if isinstance(e, Or):
        return f"{_wrap(e.left, _PREC_OR)} || {_wrap(e.right, _PREC_OR + 1)}"
    raise TypeError(f"cannot format expression {e!r}")


def expr_key(e: Expr) -> str:
    """Canonical text used for ordering and de-duplication.

    Dataclass equality treats `Lit(True)` and `Lit(1)` as equal, so anything
    that dedupes expressions goes through the printed form instead.
    """
    return format_expr(e)


def _format_entity_scope(var: str, c: ScopeConstraint) -> str:
    if c.kind == "eq":
        return f"{var} == {format_uid(c.uid)}"
    if c.kind == "is":
        return f"{var} is {c.type_name}"
    if c.kind == "in":
        return f"{var} in {format_uid(c.uid)}"
    return var


def _format_action_scope(c: ActionConstraint) -> str:
    uids = [format_uid(EntityUid(ACTION_TYPE, n)) for n in c.names]
    if c.kind == "eq":
        return f"action == {uids[0]}"
    if c.kind == "in":
        if len(uids) == 1:
            return f"action in {uids[0]}"
        return "action in [" + ", ".join(uids) + "]"
    return "action"


def format_scope(rule: Rule) -> str:
    parts = [
        _format_entity_scope("principal", rule.principal),
        _format_action_scope(rule.action),
        _format_entity_scope("resource", rule.resource),
    ]
    return f"{rule.effect.value} ({', '.join(parts)})"


def format_rule(rule: Rule, with_id: bool = True) -> str:
    lines = []
    if with_id:
        lines.append(f"@id({format_string(rule.id)})")
    head = format_scope(rule)
    if rule.body is None:
        lines.append(head + ";")
    else:
        lines.append(head)
        lines.append(f"when {{ {format_expr(rule.body)} }};")
    return "\n".join(lines)


def format_policy(policy: Policy) -> str:
    return "\n\n".join(format_rule(r) for r in policy.rules) + ("\n" if policy.rules else "")
