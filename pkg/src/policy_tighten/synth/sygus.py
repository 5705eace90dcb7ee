"""SyGuS-IF export of a single-rule tightening problem.

Entities of every type share one datatype `E` whose constructor carries an
integer type code and an integer id code. Attribute access goes through
concrete getters returning an option sort, presence through `has_<f>`, and
the entity hierarchy through a concrete `in_closure` predicate. Every Cedar
subterm is encoded as a (defined, value) pair; a body contributes
`(and defined value)`, so a missing attribute makes the rule not apply.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from policy_tighten.cedar.ast import (
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
    Request,
    Rule,
    ScopeConstraint,
    SetLit,
    SetType,
    StringType,
    Var,
    request_sort_key,
)
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.printer import format_rule
from policy_tighten.cedar.schema import ACTION_TYPE, Schema
from policy_tighten.cedar.typecheck import scope_actions, type_check
from policy_tighten.errors import ExportError, TypeCheckError
from policy_tighten.synth.restrict_one import SynthesisProblem

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class EntityIntMapping:
    """Seeded bijection between entity uids and (type code, id code) pairs."""

    type_codes: dict[str, int] = field(default_factory=dict)
    id_codes: dict[EntityUid, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.id_codes)

    def code(self, uid: EntityUid) -> tuple[int, int]:
        try:
            return self.type_codes[uid.type], self.id_codes[uid]
        except KeyError:
            raise ExportError(f"entity {uid} is not covered by the integer mapping") from None

    def term(self, uid: EntityUid) -> str:
        t, i = self.code(uid)
        return f"(mk-entity {t} {i})"


def make_mapping(store: EntityStore, seed: int | str,
                 schema: Schema | None = None) -> EntityIntMapping:
    """Assign shuffled integer codes to every type and entity (actions included)."""
    uids = sorted(store.entities)
    type_names = {u.type for u in uids} | {ACTION_TYPE}
    if schema is not None:
        type_names |= set(schema.entity_types)
        uids += [EntityUid(ACTION_TYPE, a) for a in schema.action_names()]
    rng = random.Random(seed)
    types = sorted(type_names)
    type_perm = list(range(len(types)))
    rng.shuffle(type_perm)
    id_perm = list(range(len(uids)))
    rng.shuffle(id_perm)
    return EntityIntMapping(
        type_codes={t: type_perm[i] for i, t in enumerate(types)},
        id_codes={u: id_perm[i] for i, u in enumerate(uids)},
    )


def _sym(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def _string(text: str) -> str:
    out = []
    for ch in text:
        if ch == '"':
            out.append('""')
        elif 32 <= ord(ch) < 127:
            out.append(ch)
        else:
            out.append(f"\\u{{{ord(ch):x}}}")
    return '"' + "".join(out) + '"'


def _int(value: int) -> str:
    return str(value) if value >= 0 else f"(- {-value})"


def _and(*parts: str) -> str:
    kept = [p for p in parts if p != "true"]
    if "false" in kept:
        return "false"
    if not kept:
        return "true"
    if len(kept) == 1:
        return kept[0]
    return f"(and {' '.join(kept)})"


def _or(*parts: str) -> str:
    kept = [p for p in parts if p != "false"]
    if "true" in kept:
        return "true"
    if not kept:
        return "false"
    if len(kept) == 1:
        return kept[0]
    return f"(or {' '.join(kept)})"


def _sort_name(t: AttrType) -> str:
    if isinstance(t, BoolType):
        return "Bool"
    if isinstance(t, LongType):
        return "Int"
    if isinstance(t, StringType):
        return "String"
    if isinstance(t, EntityType):
        return "E"
    raise ExportError(f"no SMT sort for {t}")


def _type_tag(t: AttrType) -> str:
    if isinstance(t, SetType):
        return f"Set_{_type_tag(t.elem)}"
    return str(t)


class _Encoder:
    def __init__(self, prob: SynthesisProblem, mapping: EntityIntMapping) -> None:
        self.prob = prob
        self.schema = prob.schema
        self.store = prob.store
        self.mapping = mapping
        self.annotations: dict[int, set[AttrType]] = {}
        self.context_attrs = self._context_attrs()

    # --- declarations ---

    def _context_attrs(self) -> dict[str, AttrType]:
        attrs: dict[str, AttrType] = {}
        for action in scope_actions(self.prob.rule.scope, self.schema):
            for name, decl in self.schema.actions[action].context_attrs.items():
                if isinstance(decl.type, SetType):
                    continue
                if name in attrs and attrs[name] != decl.type:
                    raise ExportError(f"context attribute '{name}' has conflicting types")
                attrs[name] = decl.type
        return dict(sorted(attrs.items()))

    def attribute_pairs(self) -> list[tuple[str, AttrType]]:
        pairs: set[tuple[str, str]] = set()
        found: dict[tuple[str, str], AttrType] = {}
        for decl in self.schema.entity_types.values():
            for name, attr in decl.attrs.items():
                key = (name, _type_tag(attr.type))
                pairs.add(key)
                found[key] = attr.type
        return [(name, found[(name, tag)]) for name, tag in sorted(pairs)]

    def params(self) -> str:
        parts = ["(principal E)", "(action E)", "(resource E)"]
        for name, t in self.context_attrs.items():
            parts.append(f"({_sym('ctx_' + name)} Opt{_sort_name(t)})")
        return " ".join(parts)

    def args(self) -> str:
        names = ["principal", "action", "resource"]
        names += [_sym("ctx_" + n) for n in self.context_attrs]
        return " ".join(names)

    def declarations(self) -> list[str]:
        lines = [
            "(declare-datatype E ((mk-entity (etype Int) (eid Int))))",
        ]
        for sort in ("Bool", "Int", "String", "E"):
            lines.append(
                f"(declare-datatype Opt{sort} ((None{sort}) (Some{sort} (val{sort} {sort}))))"
            )
        entities = sorted(self.store.entities)
        for name, t in self.attribute_pairs():
            owners = [
                u for u in entities
                if name in self.store.entities[u].attrs
                and (decl := self.schema.attr(u.type, name)) is not None
                and _type_tag(decl.type) == _type_tag(t)
            ]
            if isinstance(t, SetType):
                lines.append(self._membership_fun(name, t, owners))
            else:
                lines.append(self._getter(name, t, owners))
        for name in sorted({n for n, _ in self.attribute_pairs()}):
            holders = [u for u in entities if name in self.store.entities[u].attrs]
            body = _or(*(f"(= e {self.mapping.term(u)})" for u in holders))
            lines.append(f"(define-fun {_sym('has_' + name)} ((e E)) Bool {body})")
        lines.append(self._closure_fun())
        return lines

    def _getter(self, name: str, t: AttrType, owners: list[EntityUid]) -> str:
        sort = _sort_name(t)
        term = f"None{sort}"
        for u in reversed(owners):
            value = self.value_term(self.store.entities[u].attrs[name])
            term = f"(ite (= e {self.mapping.term(u)}) (Some{sort} {value}) {term})"
        fn = _sym(f"get_{name}_{_type_tag(t)}")
        return f"(define-fun {fn} ((e E)) Opt{sort} {term})"

    def _membership_fun(self, name: str, t: SetType, owners: list[EntityUid]) -> str:
        elem_sort = _sort_name(t.elem)
        cases = []
        for u in owners:
            members = sorted(self.store.entities[u].attrs[name], key=repr)
            if isinstance(t.elem, EntityType):
                tests = [f"(in_closure x {self.mapping.term(m)})" for m in members]
            else:
                tests = [f"(= x {self.value_term(m)})" for m in members]
            cases.append(_and(f"(= o {self.mapping.term(u)})", _or(*tests)))
        fn = _sym(f"mem_{name}_{_type_tag(t)}")
        return f"(define-fun {fn} ((o E) (x {elem_sort})) Bool {_or(*cases)})"

    def _closure_fun(self) -> str:
        pairs = [
            f"(and (= a {self.mapping.term(d)}) (= b {self.mapping.term(anc)}))"
            for d, anc in self.store.closure_pairs()
            if d != anc
        ]
        return f"(define-fun in_closure ((a E) (b E)) Bool {_or('(= a b)', *pairs)})"

    # --- terms ---

    def value_term(self, value: object) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, int):
            return _int(value)
        if isinstance(value, str):
            return _string(value)
        if isinstance(value, EntityUid):
            return self.mapping.term(value)
        raise ExportError(f"cannot encode value {value!r} as a term")

    def attr_type(self, e: GetAttr) -> AttrType | None:
        """Result type of an access; None when no environment ever reaches it."""
        types = self.annotations.get(id(e))
        if not types:
            return None
        if len(types) > 1:
            raise ExportError(f"attribute '{e.attr}' has several types across requests")
        return next(iter(types))

    def encode(self, e: Expr) -> tuple[str, str]:
        """(defined, value) pair for a Cedar expression."""
        if isinstance(e, Lit):
            return "true", self.value_term(e.value)
        if isinstance(e, Var):
            if e.name == "context":
                raise ExportError("bare `context` cannot be encoded")
            return "true", e.name
        if isinstance(e, GetAttr):
            t = self.attr_type(e)
            if t is None:
                return "false", "false"
            if isinstance(t, SetType):
                raise ExportError(f"set-valued `{e.attr}` is only supported on the right of `in`")
            sort = _sort_name(t)
            if isinstance(e.expr, Var) and e.expr.name == "context":
                if e.attr not in self.context_attrs:
                    raise ExportError(f"context attribute '{e.attr}' cannot be encoded")
                param = _sym("ctx_" + e.attr)
                return f"((_ is Some{sort}) {param})", f"(val{sort} {param})"
            d, v = self.encode(e.expr)
            got = f"({_sym(f'get_{e.attr}_{_type_tag(t)}')} {v})"
            return _and(d, f"((_ is Some{sort}) {got})"), f"(val{sort} {got})"
        if isinstance(e, Has):
            if isinstance(e.expr, Var) and e.expr.name == "context":
                if e.attr not in self.context_attrs:
                    return "true", "false"
                sort = _sort_name(self.context_attrs[e.attr])
                return "true", f"((_ is Some{sort}) {_sym('ctx_' + e.attr)})"
            d, v = self.encode(e.expr)
            return d, f"({_sym('has_' + e.attr)} {v})"
        if isinstance(e, Is):
            d, v = self.encode(e.expr)
            code = self.mapping.type_codes.get(e.type_name)
            if code is None:
                return d, "false"
            return d, f"(= (etype {v}) {code})"
        if isinstance(e, BinOp):
            return self.encode_binop(e)
        if isinstance(e, Not):
            d, v = self.encode(e.expr)
            return d, f"(not {v})"
        if isinstance(e, And):
            dl, vl = self.encode(e.left)
            dr, vr = self.encode(e.right)
            return _and(dl, _or(f"(not {vl})", dr)), _and(vl, vr)
        if isinstance(e, Or):
            dl, vl = self.encode(e.left)
            dr, vr = self.encode(e.right)
            return _and(dl, _or(vl, dr)), _or(vl, vr)
        raise ExportError(f"unsupported expression {type(e).__name__}")

    def encode_binop(self, e: BinOp) -> tuple[str, str]:
        if e.op == "in":
            return self.encode_in(e)
        dl, vl = self.encode(e.left)
        dr, vr = self.encode(e.right)
        d = _and(dl, dr)
        if e.op == "==":
            return d, f"(= {vl} {vr})"
        if e.op == "!=":
            return d, f"(not (= {vl} {vr}))"
        return d, f"({e.op} {vl} {vr})"

    def encode_in(self, e: BinOp) -> tuple[str, str]:
        dl, vl = self.encode(e.left)
        right = e.right
        if isinstance(right, SetLit):
            tests = []
            defs = [dl]
            for item in right.items:
                di, vi = self.encode(item)
                defs.append(di)
                if isinstance(item, Lit) and not isinstance(item.value, EntityUid):
                    tests.append(f"(= {vl} {vi})")
                else:
                    tests.append(f"(in_closure {vl} {vi})")
            return _and(*defs), _or(*tests)
        if isinstance(right, GetAttr):
            t = self.attr_type(right)
            if t is None:
                return "false", "false"
            if isinstance(t, SetType):
                if isinstance(right.expr, Var) and right.expr.name == "context":
                    raise ExportError(f"set-valued context attribute '{right.attr}' cannot be encoded")
                do, vo = self.encode(right.expr)
                fn = _sym(f"mem_{right.attr}_{_type_tag(t)}")
                defined = _and(dl, do, f"({_sym('has_' + right.attr)} {vo})")
                return defined, f"({fn} {vo} {vl})"
        dr, vr = self.encode(right)
        return _and(dl, dr), f"(in_closure {vl} {vr})"

    def typed(self, e: Expr) -> Expr:
        try:
            type_check(e, self.prob.rule.scope, self.schema, self.annotations)
        except TypeCheckError as err:
            raise ExportError(f"cannot encode `{err.expr_text}`: {err.message}") from None
        return e

    def applies(self, e: Expr | None) -> str:
        if e is None:
            return "true"
        d, v = self.encode(self.typed(e))
        return _and(d, v)

    # --- scope and requests ---

    def entity_scope(self, var: str, c: ScopeConstraint) -> str:
        if c.kind == "eq":
            return f"(= {var} {self.mapping.term(c.uid)})"
        if c.kind == "is":
            code = self.mapping.type_codes.get(c.type_name)
            return "false" if code is None else f"(= (etype {var}) {code})"
        if c.kind == "in":
            return f"(in_closure {var} {self.mapping.term(c.uid)})"
        return "true"

    def scope_term(self, rule: Rule) -> str:
        action = "true"
        if rule.action.kind != "any":
            action = _or(*(
                f"(= action {self.mapping.term(EntityUid(ACTION_TYPE, n))})"
                for n in rule.action.names
            ))
        return _and(
            self.entity_scope("principal", rule.principal),
            action,
            self.entity_scope("resource", rule.resource),
        )

    def request_args(self, req: Request) -> str:
        parts = [
            self.mapping.term(req.principal),
            self.mapping.term(req.action_uid),
            self.mapping.term(req.resource),
        ]
        context = req.context_map()
        for name, t in self.context_attrs.items():
            sort = _sort_name(t)
            if name in context:
                parts.append(f"(Some{sort} {self.value_term(context[name])})")
            else:
                parts.append(f"None{sort}")
        return " ".join(parts)


def encode_sygus(prob: SynthesisProblem, mapping: EntityIntMapping) -> str:
    """Render the problem as a SyGuS-IF v2 document (no solver is invoked)."""
    if not prob.candidates:
        raise ExportError(f"rule {prob.rule.id} has no candidate conjuncts to offer the grammar")
    enc = _Encoder(prob, mapping)
    rule = prob.rule
    lines = [f"; tightening problem for rule {rule.id}"]
    lines += [f"; {line}" for line in format_rule(rule).splitlines()]
    lines.append("(set-logic ALL)")
    lines.append("")
    lines += enc.declarations()
    lines.append("")
    base = _and(enc.scope_term(rule), enc.applies(rule.body))
    lines.append(f"(define-fun base ({enc.params()}) Bool {base})")
    lines.append("")

    productions = [enc.applies(c.expr) for c in prob.candidates]
    lines.append(f"(synth-fun phi ({enc.params()}) Bool")
    lines.append("  ((Start Bool))")
    lines.append("  ((Start Bool (")
    for cand, term in zip(prob.candidates, productions):
        lines.append(f"    ; {cand.text}")
        lines.append(f"    {term}")
    lines.append("  ))))")
    lines.append("")

    for req in sorted(prob.slice, key=request_sort_key):
        args = enc.request_args(req)
        lines.append(f"(constraint (and (base {args}) (phi {args})))")
    if prob.targets:
        denials = [
            f"(not (and (base {a}) (phi {a})))"
            for a in (enc.request_args(t) for t in prob.targets)
        ]
        lines.append(f"(constraint {_or(*denials)})")
    lines.append("")
    lines.append("(check-synth)")
    return "\n".join(lines) + "\n"
