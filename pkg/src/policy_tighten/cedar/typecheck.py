"""Schema-directed type checking with flow-sensitive narrowing.

A rule is checked once per request environment its scope admits, i.e. per
(principal type, action, resource type) triple. Inside one environment every
variable has exactly one type, so `x is T` is statically true or false and
`&&` / `||` skip the operand that can never be evaluated. `x has f` is
tracked as a fact that makes a later optional `x.f` in the same `&&` chain
(or in the consequent of `!(guards) || atom`) legal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from policy_tighten.cedar.ast import (
    BOOL,
    INT64_MAX,
    INT64_MIN,
    LONG,
    STRING,
    And,
    AttrType,
    BinOp,
    BoolType,
    EntityType,
    EntityUid,
    Expr,
    GetAttr,
    Has,
    Is,
    Lit,
    LongType,
    Not,
    Or,
    Rule,
    RuleScope,
    ScopeConstraint,
    SetLit,
    SetType,
    Var,
)
from policy_tighten.cedar.printer import format_expr
from policy_tighten.cedar.schema import ACTION_TYPE, AttrDecl, Schema
from policy_tighten.errors import TypeCheckError

ACTION_ENTITY = EntityType(ACTION_TYPE)


@dataclass(frozen=True, eq=False)
class RecordType(AttrType):
    """Type of `context` in one environment."""

    attrs: dict[str, AttrDecl] = field(default_factory=dict)

    def __str__(self) -> str:
        return "context"


class Environment(NamedTuple):
    principal: str
    action: str
    resource: str


@dataclass(frozen=True)
class _Typed:
    type: AttrType
    known: bool | None = None  # statically known boolean value


Facts = frozenset  # of (access-path tuple, attribute name)


def _scope_admits(c: ScopeConstraint, type_name: str, schema: Schema) -> bool:
    if c.kind == "eq":
        return c.uid.type == type_name
    if c.kind == "is":
        return c.type_name == type_name
    if c.kind == "in":
        return schema.may_descend(type_name, c.uid.type)
    return True


def scope_actions(scope: RuleScope, schema: Schema) -> list[str]:
    if scope.action.kind == "any":
        return schema.action_names()
    return sorted(n for n in set(scope.action.names) if n in schema.actions)


def request_environments(scope: RuleScope, schema: Schema) -> list[Environment]:
    """All (principal type, action, resource type) triples the scope admits."""
    envs: list[Environment] = []
    for action in scope_actions(scope, schema):
        decl = schema.actions[action]
        for p in sorted(decl.principal_types):
            if not _scope_admits(scope.principal, p, schema):
                continue
            for r in sorted(decl.resource_types):
                if _scope_admits(scope.resource, r, schema):
                    envs.append(Environment(p, action, r))
    return envs


def admissible_types(scope: RuleScope, schema: Schema) -> dict[str, frozenset[str]]:
    """Entity types each of `principal` / `resource` may take under the scope."""
    envs = request_environments(scope, schema)
    return {
        "principal": frozenset(e.principal for e in envs),
        "resource": frozenset(e.resource for e in envs),
    }


def check_scope(rule: Rule, schema: Schema) -> None:
    for var, c in (("principal", rule.principal), ("resource", rule.resource)):
        if c.kind == "is" and c.type_name not in schema.entity_types:
            raise TypeCheckError(f"{var} scope names unknown entity type '{c.type_name}'",
                                 rule_id=rule.id)
        if c.kind in ("eq", "in") and c.uid.type not in schema.entity_types:
            raise TypeCheckError(f"{var} scope references unknown entity type '{c.uid.type}'",
                                 rule_id=rule.id)
    for name in rule.action.names:
        if name not in schema.actions:
            raise TypeCheckError(f"action scope references unknown action '{name}'",
                                 rule_id=rule.id)


class _Checker:
    def __init__(self, schema: Schema, env: Environment | None,
                 annotations: dict[int, set[AttrType]] | None) -> None:
        self.schema = schema
        self.env = env
        self.annotations = annotations

    def fail(self, message: str, e: Expr) -> None:
        raise TypeCheckError(message, format_expr(e))

    def var_type(self, name: str, e: Expr) -> AttrType:
        if self.env is None:
            self.fail(f"no request admitted by the rule scope binds `{name}`", e)
        if name == "principal":
            return EntityType(self.env.principal)
        if name == "resource":
            return EntityType(self.env.resource)
        if name == "action":
            return ACTION_ENTITY
        return RecordType(self.schema.actions[self.env.action].context_attrs)

    def attrs_of(self, t: AttrType, e: Expr) -> dict[str, AttrDecl]:
        if isinstance(t, RecordType):
            return t.attrs
        if isinstance(t, EntityType):
            if t.name == ACTION_TYPE:
                return {}
            return self.schema.entity_types[t.name].attrs
        self.fail(f"attribute access on a value of type {t}", e)
        raise AssertionError("unreachable")

    def check(self, e: Expr, facts: Facts) -> _Typed:
        if isinstance(e, Lit):
            return _Typed(self.literal_type(e))
        if isinstance(e, Var):
            return _Typed(self.var_type(e.name, e))
        if isinstance(e, SetLit):
            if not e.items:
                self.fail("empty set literals are not supported", e)
            elems = [self.check(i, facts).type for i in e.items]
            first = elems[0]
            for t in elems[1:]:
                if t != first:
                    self.fail(f"set literal mixes {first} and {t}", e)
            if isinstance(first, SetType):
                self.fail("nested sets are not supported", e)
            return _Typed(SetType(first))
        if isinstance(e, GetAttr):
            return self.check_get_attr(e, facts)
        if isinstance(e, Has):
            base = self.check(e.expr, facts).type
            attrs = self.attrs_of(base, e)
            decl = attrs.get(e.attr)
            if decl is None:
                return _Typed(BOOL, False)
            if not decl.optional or (access_path(e.expr), e.attr) in facts:
                return _Typed(BOOL, True)
            return _Typed(BOOL)
        if isinstance(e, Is):
            base = self.check(e.expr, facts).type
            if not isinstance(base, EntityType):
                self.fail(f"`is` needs an entity operand, got {base}", e)
            if e.type_name not in self.schema.entity_types:
                self.fail(f"unknown entity type '{e.type_name}'", e)
            return _Typed(BOOL, base.name == e.type_name)
        if isinstance(e, BinOp):
            return self.check_binop(e, facts)
        if isinstance(e, Not):
            inner = self.expect_bool(e.expr, facts)
            return _Typed(BOOL, None if inner.known is None else not inner.known)
        if isinstance(e, And):
            left = self.expect_bool(e.left, facts)
            if left.known is False:
                return _Typed(BOOL, False)
            right = self.expect_bool(e.right, facts | narrowing_facts(e.left))
            if right.known is False:
                return _Typed(BOOL, False)
            if left.known and right.known:
                return _Typed(BOOL, True)
            return _Typed(BOOL)
        if isinstance(e, Or):
            left = self.expect_bool(e.left, facts)
            if left.known is True:
                return _Typed(BOOL, True)
            right_facts = facts
            if isinstance(e.left, Not):
                right_facts = facts | narrowing_facts(e.left.expr)
            right = self.expect_bool(e.right, right_facts)
            if right.known is True:
                return _Typed(BOOL, True)
            if left.known is False and right.known is False:
                return _Typed(BOOL, False)
            return _Typed(BOOL)
        self.fail(f"unsupported expression {type(e).__name__}", e)
        raise AssertionError("unreachable")

    def literal_type(self, e: Lit) -> AttrType:
        v = e.value
        if isinstance(v, bool):
            return BOOL
        if isinstance(v, int):
            if not INT64_MIN <= v <= INT64_MAX:
                self.fail("integer literal outside the signed 64-bit range", e)
            return LONG
        if isinstance(v, str):
            return STRING
        if isinstance(v, EntityUid):
            if v.type == ACTION_TYPE:
                if v.id not in self.schema.actions:
                    self.fail(f"unknown action '{v.id}'", e)
                return ACTION_ENTITY
            if v.type not in self.schema.entity_types:
                self.fail(f"unknown entity type '{v.type}'", e)
            return EntityType(v.type)
        self.fail(f"unsupported literal {v!r}", e)
        raise AssertionError("unreachable")

    def check_get_attr(self, e: GetAttr, facts: Facts) -> _Typed:
        base = self.check(e.expr, facts).type
        attrs = self.attrs_of(base, e)
        decl = attrs.get(e.attr)
        if decl is None:
            self.fail(f"{base} has no attribute '{e.attr}'", e)
        if decl.optional and (access_path(e.expr), e.attr) not in facts:
            self.fail(f"attribute '{e.attr}' is optional; guard it with `has`", e)
        if self.annotations is not None:
            self.annotations.setdefault(id(e), set()).add(decl.type)
        return _Typed(decl.type)

    def check_binop(self, e: BinOp, facts: Facts) -> _Typed:
        lt = self.check(e.left, facts).type
        rt = self.check(e.right, facts).type
        if e.op in ("==", "!="):
            if isinstance(lt, EntityType) and isinstance(rt, EntityType):
                if lt != rt:
                    return _Typed(BOOL, e.op == "!=")
                return _Typed(BOOL)
            if lt != rt:
                self.fail(f"cannot compare {lt} with {rt}", e)
            return _Typed(BOOL)
        if e.op in ("<", "<=", ">", ">="):
            if not (isinstance(lt, LongType) and isinstance(rt, LongType)):
                self.fail(f"`{e.op}` needs Long operands, got {lt} and {rt}", e)
            return _Typed(BOOL)
        if e.op == "in":
            return self.check_in(e, lt, rt)
        self.fail(f"unsupported operator '{e.op}'", e)
        raise AssertionError("unreachable")

    def check_in(self, e: BinOp, lt: AttrType, rt: AttrType) -> _Typed:
        if isinstance(lt, EntityType):
            target = rt.elem if isinstance(rt, SetType) else rt
            if not isinstance(target, EntityType):
                self.fail(f"`in` needs an entity or set of entities on the right, got {rt}", e)
            if lt.name == ACTION_TYPE or target.name == ACTION_TYPE:
                if lt.name != target.name:
                    return _Typed(BOOL, False)
                return _Typed(BOOL)
            if not self.schema.may_descend(lt.name, target.name):
                return _Typed(BOOL, False)
            return _Typed(BOOL)
        if isinstance(rt, SetType):
            if rt.elem != lt:
                self.fail(f"`in` compares {lt} with elements of {rt}", e)
            return _Typed(BOOL)
        self.fail(f"`in` needs an entity or set on the right, got {rt}", e)
        raise AssertionError("unreachable")

    def expect_bool(self, e: Expr, facts: Facts) -> _Typed:
        t = self.check(e, facts)
        if not isinstance(t.type, BoolType):
            self.fail(f"expected Bool, got {t.type}", e)
        return t


def access_path(e: Expr) -> tuple[str, ...] | None:
    """`principal.a.b` as ("principal", "a", "b"); None for anything else."""
    if isinstance(e, Var):
        return (e.name,)
    if isinstance(e, GetAttr):
        base = access_path(e.expr)
        return None if base is None else base + (e.attr,)
    return None


def narrowing_facts(e: Expr) -> Facts:
    """`has` facts that hold whenever `e` evaluates to true."""
    if isinstance(e, Has):
        path = access_path(e.expr)
        return frozenset() if path is None else frozenset({(path, e.attr)})
    if isinstance(e, And):
        return narrowing_facts(e.left) | narrowing_facts(e.right)
    return frozenset()


def type_check_env(e: Expr, env: Environment | None, schema: Schema,
                   annotations: dict[int, set[AttrType]] | None = None) -> AttrType:
    return _Checker(schema, env, annotations).check(e, frozenset()).type


def type_check(e: Expr, scope: RuleScope, schema: Schema,
               annotations: dict[int, set[AttrType]] | None = None) -> AttrType:
    """Type of `e` under every environment of `scope`; raises TypeCheckError.

    `annotations`, when given, collects the result types of every attribute
    access keyed by node identity.
    """
    envs = request_environments(scope, schema)
    result: AttrType | None = None
    for env in envs or [None]:
        t = type_check_env(e, env, schema, annotations)
        if result is None:
            result = t
        elif t != result:
            raise TypeCheckError(
                f"expression has type {result} for some requests and {t} for others",
                format_expr(e),
            )
    return result if result is not None else BOOL


def type_check_rule(rule: Rule, schema: Schema) -> None:
    check_scope(rule, schema)
    if rule.body is None:
        return
    try:
        t = type_check(rule.body, rule.scope, schema)
    except TypeCheckError as e:
        raise TypeCheckError(e.message, e.expr_text, rule.id) from None
    if not isinstance(t, BoolType):
        raise TypeCheckError(f"rule body must be Bool, got {t}", format_expr(rule.body), rule.id)
