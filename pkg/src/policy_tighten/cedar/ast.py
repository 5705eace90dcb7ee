"""Core data model: attribute types, values, requests, expressions and rules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, NamedTuple


# --- attribute types ---


@dataclass(frozen=True)
class AttrType:
    """Base for declared attribute types."""


@dataclass(frozen=True)
class BoolType(AttrType):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class LongType(AttrType):
    def __str__(self) -> str:
        return "Long"


@dataclass(frozen=True)
class StringType(AttrType):
    def __str__(self) -> str:
        return "String"


@dataclass(frozen=True)
class EntityType(AttrType):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SetType(AttrType):
    elem: AttrType

    def __str__(self) -> str:
        return f"Set<{self.elem}>"


BOOL = BoolType()
LONG = LongType()
STRING = StringType()


# --- values ---


class EntityUid(NamedTuple):
    type: str
    id: str

    def __str__(self) -> str:
        escaped = self.id.replace("\\", "\\\\").replace('"', '\\"')
        return f'{self.type}::"{escaped}"'


# An attribute value is one of: bool, int, str, EntityUid, frozenset of those.
AttrValue = Any

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def values_equal(a: AttrValue, b: AttrValue) -> bool:
    """Structural equality that never confuses `true` with `1`."""
    if type(a) is not type(b):
        return False
    return a == b


def value_type(value: AttrValue) -> AttrType | None:
    """Best-effort type of a runtime value (None for an empty set)."""
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return LONG
    if isinstance(value, str):
        return STRING
    if isinstance(value, EntityUid):
        return EntityType(value.type)
    if isinstance(value, frozenset):
        for item in value:
            inner = value_type(item)
            return SetType(inner) if inner is not None else None
        return None
    return None


def value_sort_key(value: AttrValue) -> tuple:
    """Total order over values of mixed types, used for deterministic output."""
    if isinstance(value, bool):
        return (0, int(value))
    if isinstance(value, int):
        return (1, value)
    if isinstance(value, str):
        return (2, value)
    if isinstance(value, EntityUid):
        return (3, value.type, value.id)
    if isinstance(value, frozenset):
        return (4, tuple(sorted(value_sort_key(v) for v in value)))
    return (5, repr(value))


# --- requests and decisions ---


class Decision(Enum):
    ALLOWED = "allowed"
    DENIED = "denied"


@dataclass(frozen=True, slots=True)
class Request:
    principal: EntityUid
    action: str
    resource: EntityUid
    context: tuple[tuple[str, AttrValue], ...] = ()

    def context_map(self) -> dict[str, AttrValue]:
        return dict(self.context)

    @property
    def action_uid(self) -> EntityUid:
        return EntityUid("Action", self.action)

    def __str__(self) -> str:
        text = f"({self.principal}, {self.action_uid}, {self.resource})"
        if self.context:
            inner = ", ".join(f"{k}: {v}" for k, v in self.context)
            text += f" context {{{inner}}}"
        return text


def make_context(values: dict[str, AttrValue] | None) -> tuple[tuple[str, AttrValue], ...]:
    """Canonical hashable context: items sorted by attribute name."""
    if not values:
        return ()
    return tuple(sorted(values.items()))


def request_sort_key(req: Request) -> tuple:
    """Deterministic base order: action, principal type/id, resource type/id."""
    return (
        req.action,
        req.principal.type,
        req.principal.id,
        req.resource.type,
        req.resource.id,
        tuple((k, value_sort_key(v)) for k, v in req.context),
    )


# --- expressions ---


VARIABLES = ("principal", "action", "resource", "context")
COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
BINARY_OPS = COMPARISON_OPS + ("in",)


@dataclass(frozen=True)
class Expr:
    """Base class of the expression AST."""


@dataclass(frozen=True)
class Lit(Expr):
    value: AttrValue


@dataclass(frozen=True)
class SetLit(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class GetAttr(Expr):
    expr: Expr
    attr: str


@dataclass(frozen=True)
class Has(Expr):
    expr: Expr
    attr: str


@dataclass(frozen=True)
class Is(Expr):
    expr: Expr
    type_name: str


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    expr: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


TRUE = Lit(True)


def conjoin(exprs: list[Expr] | tuple[Expr, ...]) -> Expr:
    """Left-associated conjunction; the empty conjunction is `true`."""
    if not exprs:
        return TRUE
    result = exprs[0]
    for e in exprs[1:]:
        result = And(result, e)
    return result


def flatten_and(e: Expr) -> list[Expr]:
    """Conjuncts of a (possibly nested) `&&` tree, left to right."""
    if isinstance(e, And):
        return flatten_and(e.left) + flatten_and(e.right)
    return [e]


def children(e: Expr) -> Iterator[Expr]:
    if isinstance(e, (GetAttr, Has, Is, Not)):
        yield e.expr
    elif isinstance(e, (BinOp, And, Or)):
        yield e.left
        yield e.right
    elif isinstance(e, SetLit):
        yield from e.items


def expr_size(e: Expr) -> int:
    """Node count."""
    return 1 + sum(expr_size(c) for c in children(e))


def variables_of(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    found: set[str] = set()
    for c in children(e):
        found |= variables_of(c)
    return found


# --- rules and policies ---


class Effect(Enum):
    PERMIT = "permit"
    FORBID = "forbid"


@dataclass(frozen=True)
class ScopeConstraint:
    """Constraint on `principal` or `resource` in a rule head."""

    kind: str = "any"  # "any", "eq", "is", "in"
    uid: EntityUid | None = None
    type_name: str | None = None


@dataclass(frozen=True)
class ActionConstraint:
    kind: str = "any"  # "any", "eq", "in"
    names: tuple[str, ...] = ()


ANY_SCOPE = ScopeConstraint()
ANY_ACTION = ActionConstraint()


class RuleScope(NamedTuple):
    principal: ScopeConstraint
    action: ActionConstraint
    resource: ScopeConstraint


@dataclass(frozen=True)
class Rule:
    id: str
    effect: Effect
    principal: ScopeConstraint = ANY_SCOPE
    action: ActionConstraint = ANY_ACTION
    resource: ScopeConstraint = ANY_SCOPE
    body: Expr | None = None

    @property
    def scope(self) -> RuleScope:
        return RuleScope(self.principal, self.action, self.resource)

    @property
    def is_permit(self) -> bool:
        return self.effect is Effect.PERMIT

    def with_body(self, body: Expr | None) -> "Rule":
        return replace(self, body=body)

    def conjoined(self, extra: Expr) -> "Rule":
        """Same rule with `extra` appended to the body as a conjunct."""
        if self.body is None:
            return replace(self, body=extra)
        return replace(self, body=And(self.body, extra))


@dataclass(frozen=True)
class Policy:
    rules: tuple[Rule, ...] = field(default_factory=tuple)

    def permits(self) -> list[Rule]:
        return [r for r in self.rules if r.effect is Effect.PERMIT]

    def forbids(self) -> list[Rule]:
        return [r for r in self.rules if r.effect is Effect.FORBID]

    def get(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def ids(self) -> list[str]:
        return [r.id for r in self.rules]

    def replacing(self, updated: dict[str, Rule]) -> "Policy":
        """Same rule order, with the rules named in `updated` swapped in."""
        return Policy(tuple(updated.get(r.id, r) for r in self.rules))
