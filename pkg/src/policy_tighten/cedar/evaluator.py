"""Request evaluation: expressions, rule application and decision composition."""

from __future__ import annotations

from typing import Callable

from policy_tighten.cedar.ast import (
    ActionConstraint,
    And,
    AttrValue,
    BinOp,
    Decision,
    EntityUid,
    Expr,
    GetAttr,
    Has,
    Is,
    Lit,
    Not,
    Or,
    Policy,
    Request,
    Rule,
    ScopeConstraint,
    SetLit,
    Var,
    values_equal,
)
from policy_tighten.cedar.entities import EntityStore, check_value
from policy_tighten.cedar.schema import Schema
from policy_tighten.errors import EntityError, EvalError, RequestError

Compiled = Callable[[Request, EntityStore], AttrValue]
RulePredicate = Callable[[Request, EntityStore], bool]


def _attr_of(value: AttrValue, attr: str, store: EntityStore) -> AttrValue:
    if isinstance(value, EntityUid):
        ent = store.get(value)
        if ent is None:
            raise EvalError(f"unknown entity {value}")
        if attr not in ent.attrs:
            raise EvalError(f"{value} has no attribute '{attr}'")
        return ent.attrs[attr]
    if isinstance(value, dict):
        if attr not in value:
            raise EvalError(f"context has no attribute '{attr}'")
        return value[attr]
    raise EvalError(f"attribute access on non-entity value {value!r}")


def _has_attr(value: AttrValue, attr: str, store: EntityStore) -> bool:
    if isinstance(value, EntityUid):
        ent = store.get(value)
        return ent is not None and attr in ent.attrs
    if isinstance(value, dict):
        return attr in value
    raise EvalError(f"`has` on non-entity value {value!r}")


def _in(left: AttrValue, right: AttrValue, store: EntityStore) -> bool:
    if isinstance(right, EntityUid):
        if not isinstance(left, EntityUid):
            raise EvalError(f"`in` needs an entity on the left, got {left!r}")
        return store.in_closure(left, right)
    if isinstance(right, frozenset):
        if isinstance(left, EntityUid):
            return any(
                isinstance(r, EntityUid) and store.in_closure(left, r) for r in right
            )
        return any(values_equal(left, r) for r in right)
    raise EvalError(f"`in` needs an entity or set on the right, got {right!r}")


def _as_bool(value: AttrValue) -> bool:
    if not isinstance(value, bool):
        raise EvalError(f"expected a Bool, got {value!r}")
    return value


def _as_int(value: AttrValue) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EvalError(f"expected a Long, got {value!r}")
    return value


_COMPARE: dict[str, Callable[[int, int], bool]] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compile_expr(e: Expr) -> Compiled:
    """Turn an expression into a closure over (request, store)."""
    if isinstance(e, Lit):
        value = e.value
        return lambda req, store: value
    if isinstance(e, Var):
        name = e.name
        if name == "principal":
            return lambda req, store: req.principal
        if name == "resource":
            return lambda req, store: req.resource
        if name == "action":
            return lambda req, store: req.action_uid
        return lambda req, store: req.context_map()
    if isinstance(e, SetLit):
        items = [compile_expr(i) for i in e.items]
        return lambda req, store: frozenset(f(req, store) for f in items)
    if isinstance(e, GetAttr):
        base = compile_expr(e.expr)
        attr = e.attr
        return lambda req, store: _attr_of(base(req, store), attr, store)
    if isinstance(e, Has):
        base = compile_expr(e.expr)
        attr = e.attr
        return lambda req, store: _has_attr(base(req, store), attr, store)
    if isinstance(e, Is):
        base = compile_expr(e.expr)
        type_name = e.type_name

        def is_type(req: Request, store: EntityStore) -> bool:
            v = base(req, store)
            if not isinstance(v, EntityUid):
                raise EvalError(f"`is` on non-entity value {v!r}")
            return v.type == type_name

        return is_type
    if isinstance(e, BinOp):
        left = compile_expr(e.left)
        right = compile_expr(e.right)
        if e.op == "==":
            return lambda req, store: values_equal(left(req, store), right(req, store))
        if e.op == "!=":
            return lambda req, store: not values_equal(left(req, store), right(req, store))
        if e.op == "in":
            return lambda req, store: _in(left(req, store), right(req, store), store)
        cmp = _COMPARE[e.op]
        return lambda req, store: cmp(_as_int(left(req, store)), _as_int(right(req, store)))
    if isinstance(e, Not):
        inner = compile_expr(e.expr)
        return lambda req, store: not _as_bool(inner(req, store))
    if isinstance(e, And):
        left = compile_expr(e.left)
        right = compile_expr(e.right)
        return lambda req, store: _as_bool(left(req, store)) and _as_bool(right(req, store))
    if isinstance(e, Or):
        left = compile_expr(e.left)
        right = compile_expr(e.right)
        return lambda req, store: _as_bool(left(req, store)) or _as_bool(right(req, store))
    raise TypeError(f"cannot compile expression {e!r}")


def eval_expr(e: Expr, req: Request, store: EntityStore) -> AttrValue:
    """Evaluate `e` on one request; raises EvalError on a missing attribute or entity."""
    return compile_expr(e)(req, store)


def _entity_scope_matches(c: ScopeConstraint, uid: EntityUid, store: EntityStore) -> bool:
    if c.kind == "eq":
        return uid == c.uid
    if c.kind == "is":
        return uid.type == c.type_name
    if c.kind == "in":
        return store.in_closure(uid, c.uid)
    return True


def _action_scope_matches(c: ActionConstraint, action: str) -> bool:
    return c.kind == "any" or action in c.names


def scope_matches(rule: Rule, req: Request, store: EntityStore) -> bool:
    return (
        _action_scope_matches(rule.action, req.action)
        and _entity_scope_matches(rule.principal, req.principal, store)
        and _entity_scope_matches(rule.resource, req.resource, store)
    )


def compile_rule(rule: Rule) -> RulePredicate:
    """Rule application as a predicate; evaluation errors mean "does not apply"."""
    body = compile_expr(rule.body) if rule.body is not None else None

    def applies(req: Request, store: EntityStore) -> bool:
        if not scope_matches(rule, req, store):
            return False
        if body is None:
            return True
        try:
            return body(req, store) is True
        except EvalError:
            return False

    return applies


def rule_applies(rule: Rule, req: Request, store: EntityStore) -> bool:
    return compile_rule(rule)(req, store)


def compile_policy(policy: Policy) -> Callable[[Request, EntityStore], Decision]:
    forbids = [compile_rule(r) for r in policy.forbids()]
    permits = [compile_rule(r) for r in policy.permits()]

    def decide(req: Request, store: EntityStore) -> Decision:
        if any(f(req, store) for f in forbids):
            return Decision.DENIED
        if any(p(req, store) for p in permits):
            return Decision.ALLOWED
        return Decision.DENIED

    return decide


def policy_eval(req: Request, policy: Policy, store: EntityStore) -> Decision:
    """Forbid overrides permit; no applicable permit means denied."""
    return compile_policy(policy)(req, store)


def validate_request(req: Request, schema: Schema) -> Request:
    """Check a request against the action's appliesTo and context declarations."""
    decl = schema.actions.get(req.action)
    if decl is None:
        raise RequestError(f"unknown action '{req.action}'")
    if req.principal.type not in decl.principal_types:
        raise RequestError(
            f"action '{req.action}' does not apply to principal type '{req.principal.type}'"
        )
    if req.resource.type not in decl.resource_types:
        raise RequestError(
            f"action '{req.action}' does not apply to resource type '{req.resource.type}'"
        )
    context = req.context_map()
    for name, attr in decl.context_attrs.items():
        if name not in context:
            if not attr.optional:
                raise RequestError(f"context is missing mandatory attribute '{name}'")
            continue
        try:
            check_value(context[name], attr.type, f"context attribute '{name}'")
        except EntityError as e:
            raise RequestError(str(e)) from None
    for name in context:
        if name not in decl.context_attrs:
            raise RequestError(f"context attribute '{name}' is not declared for '{req.action}'")
    return req
