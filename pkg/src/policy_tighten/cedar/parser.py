"""Recursive-descent parser for the supported policy subset."""

from __future__ import annotations

import logging

from policy_tighten.cedar.ast import (
    ANY_ACTION,
    ANY_SCOPE,
    COMPARISON_OPS,
    INT64_MAX,
    INT64_MIN,
    ActionConstraint,
    And,
    BinOp,
    Effect,
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
    VARIABLES,
)
from policy_tighten.cedar.lexer import Token, TokenStream
from policy_tighten.cedar.schema import ACTION_TYPE, Schema
from policy_tighten.cedar.typecheck import type_check_rule

logger = logging.getLogger(__name__)

_UNSUPPORTED_KEYWORDS = {
    "unless": "`unless` clauses are not supported",
    "like": "`like` patterns are not supported",
    "if": "`if-then-else` expressions are not supported",
}


class _PolicyParser:
    def __init__(self, text: str, source: str | None) -> None:
        self.ts = TokenStream(text, source)

    # --- rules ---

    def parse_rules(self) -> list[tuple[Token, str | None, Rule]]:
        rules = []
        while not self.ts.at_eof():
            rules.append(self._rule())
        return rules

    def _annotations(self) -> str | None:
        rule_id: str | None = None
        while self.ts.check("@"):
            at = self.ts.advance()
            name = self.ts.expect_kind("IDENT", "annotation name")
            if name.value != "id":
                self.ts.error(f"annotation '@{name.value}' is not supported (only @id)", name)
            self.ts.expect("(")
            value = self.ts.expect_kind("STRING", "rule id string")
            self.ts.expect(")")
            if rule_id is not None:
                self.ts.error("duplicate @id annotation", at)
            rule_id = value.value
        return rule_id

    def _rule(self) -> tuple[Token, str | None, Rule]:
        rule_id = self._annotations()
        start = self.ts.current
        if self.ts.accept("permit"):
            effect = Effect.PERMIT
        elif self.ts.accept("forbid"):
            effect = Effect.FORBID
        else:
            self.ts.error(f"expected 'permit' or 'forbid', found {start.describe()}")
        self.ts.expect("(")
        self.ts.expect("principal")
        principal = self._entity_scope()
        self.ts.expect(",")
        self.ts.expect("action")
        action = self._action_scope()
        self.ts.expect(",")
        self.ts.expect("resource")
        resource = self._entity_scope()
        self.ts.expect(")")

        conditions: list[Expr] = []
        while True:
            if self.ts.check("unless", "IDENT"):
                self.ts.error(_UNSUPPORTED_KEYWORDS["unless"])
            if not self.ts.accept("when"):
                break
            self.ts.expect("{")
            conditions.append(self._expr())
            self.ts.expect("}")
        self.ts.expect(";")

        body: Expr | None = None
        for cond in conditions:
            body = cond if body is None else And(body, cond)
        rule = Rule(rule_id or "", effect, principal, action, resource, body)
        return start, rule_id, rule

    def _entity_scope(self) -> ScopeConstraint:
        if self.ts.accept("=="):
            return ScopeConstraint("eq", uid=self._uid())
        if self.ts.accept("is"):
            type_name = self.ts.expect_kind("IDENT", "entity type").value
            if self.ts.check("in", "IDENT"):
                self.ts.error("`is ... in ...` scope constraints are not supported")
            return ScopeConstraint("is", type_name=type_name)
        if self.ts.accept("in"):
            if self.ts.check("["):
                self.ts.error("set-valued `in` is only supported for the action scope")
            return ScopeConstraint("in", uid=self._uid())
        return ANY_SCOPE

    def _action_scope(self) -> ActionConstraint:
        if self.ts.accept("=="):
            return ActionConstraint("eq", (self._action_uid(),))
        if self.ts.accept("in"):
            if self.ts.accept("["):
                names: list[str] = []
                if not self.ts.check("]"):
                    names.append(self._action_uid())
                    while self.ts.accept(","):
                        names.append(self._action_uid())
                self.ts.expect("]")
                return ActionConstraint("in", tuple(names))
            return ActionConstraint("in", (self._action_uid(),))
        return ANY_ACTION

    def _uid(self) -> EntityUid:
        tok = self.ts.expect_kind("IDENT", "entity type")
        self.ts.expect("::")
        if self.ts.current.kind == "IDENT":
            self.ts.error("namespaced entity types are not supported")
        eid = self.ts.expect_kind("STRING", "entity id string")
        return EntityUid(tok.value, eid.value)

    def _action_uid(self) -> str:
        tok = self.ts.current
        uid = self._uid()
        if uid.type != ACTION_TYPE:
            self.ts.error(f"expected an {ACTION_TYPE}::\"…\" reference, found {uid}", tok)
        return uid.id

    # --- expressions ---

    def _expr(self) -> Expr:
        if self.ts.check("if", "IDENT"):
            self.ts.error(_UNSUPPORTED_KEYWORDS["if"])
        return self._or()

    def _or(self) -> Expr:
        left = self._and()
        while self.ts.accept("||"):
            left = Or(left, self._and())
        return left

    def _and(self) -> Expr:
        left = self._relation()
        while self.ts.accept("&&"):
            left = And(left, self._relation())
        return left

    def _relation(self) -> Expr:
        left = self._unary()
        tok = self.ts.current
        if tok.kind == "PUNCT" and tok.value in COMPARISON_OPS:
            self.ts.advance()
            return BinOp(tok.value, left, self._unary())
        if self.ts.check("in", "IDENT"):
            self.ts.advance()
            return BinOp("in", left, self._unary())
        if self.ts.check("has", "IDENT"):
            self.ts.advance()
            attr = self.ts.current
            if attr.kind not in ("IDENT", "STRING"):
                self.ts.error(f"expected attribute name after 'has', found {attr.describe()}")
            self.ts.advance()
            return Has(left, attr.value)
        if self.ts.check("is", "IDENT"):
            self.ts.advance()
            type_name = self.ts.expect_kind("IDENT", "entity type").value
            if self.ts.check("in", "IDENT"):
                self.ts.error("`is ... in ...` expressions are not supported")
            return Is(left, type_name)
        if self.ts.check("like", "IDENT"):
            self.ts.error(_UNSUPPORTED_KEYWORDS["like"])
        return left

    def _unary(self) -> Expr:
        if self.ts.accept("!"):
            return Not(self._unary())
        if self.ts.check("-"):
            minus = self.ts.advance()
            if self.ts.current.kind != "INT":
                self.ts.error("arithmetic operators are not supported", minus)
            return self._int_literal(negative=True)
        return self._member()

    def _member(self) -> Expr:
        expr = self._primary()
        while True:
            if self.ts.accept("."):
                name = self.ts.expect_kind("IDENT", "attribute name")
                if self.ts.check("("):
                    self.ts.error(f"method calls (`.{name.value}(…)`) are not supported", name)
                expr = GetAttr(expr, name.value)
            elif self.ts.check("[") and self._is_index():
                self.ts.advance()
                name = self.ts.expect_kind("STRING", "attribute name string")
                self.ts.expect("]")
                expr = GetAttr(expr, name.value)
            else:
                return expr

    def _is_index(self) -> bool:
        return self.ts.peek(1).kind == "STRING" and self.ts.peek(2).value == "]"

    def _primary(self) -> Expr:
        tok = self.ts.current
        if tok.kind == "INT":
            return self._int_literal(negative=False)
        if tok.kind == "STRING":
            self.ts.advance()
            return Lit(tok.value)
        if tok.kind == "IDENT":
            if tok.value in ("true", "false"):
                self.ts.advance()
                return Lit(tok.value == "true")
            if tok.value in VARIABLES:
                self.ts.advance()
                return Var(tok.value)
            if tok.value in _UNSUPPORTED_KEYWORDS:
                self.ts.error(_UNSUPPORTED_KEYWORDS[tok.value])
            if self.ts.peek(1).value == "::":
                return Lit(self._uid())
            if self.ts.peek(1).value == "(":
                self.ts.error(f"function calls (`{tok.value}(…)`) are not supported")
            self.ts.error(f"unknown identifier '{tok.value}'")
        if self.ts.accept("("):
            inner = self._expr()
            self.ts.expect(")")
            return inner
        if self.ts.accept("["):
            items: list[Expr] = []
            if not self.ts.check("]"):
                items.append(self._expr())
                while self.ts.accept(","):
                    items.append(self._expr())
            self.ts.expect("]")
            return SetLit(tuple(items))
        if self.ts.check("{"):
            self.ts.error("record literals are not supported")
        self.ts.error(f"expected an expression, found {tok.describe()}")
        raise AssertionError("unreachable")

    def _int_literal(self, negative: bool) -> Lit:
        tok = self.ts.expect_kind("INT", "integer")
        value = -int(tok.value) if negative else int(tok.value)
        if not INT64_MIN <= value <= INT64_MAX:
            self.ts.error(f"integer literal {value} is outside the signed 64-bit range", tok)
        return Lit(value)


def parse_expr(text: str, source: str | None = None) -> Expr:
    """Parse a standalone expression (used by tests and the study specs)."""
    parser = _PolicyParser(text, source)
    expr = parser._expr()
    if not parser.ts.at_eof():
        parser.ts.error(f"unexpected {parser.ts.current.describe()} after expression")
    return expr


def parse_policy(text: str, schema: Schema | None = None, source: str | None = None) -> Policy:
    """Parse a policy document, assign ids and type-check every rule.

    Rules without an `@id("…")` annotation are named `policy0`, `policy1`, …
    by position. With `schema=None` only the syntax is checked.
    """
    parser = _PolicyParser(text, source)
    parsed = parser.parse_rules()

    rules: list[Rule] = []
    seen: set[str] = set()
    for position, (tok, explicit_id, rule) in enumerate(parsed):
        rule_id = explicit_id if explicit_id is not None else f"policy{position}"
        if rule_id in seen:
            parser.ts.error(f"duplicate rule id '{rule_id}'", tok)
        seen.add(rule_id)
        rules.append(Rule(rule_id, rule.effect, rule.principal, rule.action, rule.resource, rule.body))

    policy = Policy(tuple(rules))
    if schema is not None:
        for rule in policy.rules:
            type_check_rule(rule, schema)
    logger.debug("parsed %d rule(s) from %s", len(policy.rules), source or "<policy>")
    return policy
