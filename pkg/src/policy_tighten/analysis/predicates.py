"""Candidate conjuncts: typed attribute chains, store constants and the atoms built from them.

Every candidate is a guarded atom. Guards are `x is T` for a root variable
that may take several types, and `path has f` for each optional step; they
are emitted in front of the atom (`g && atom`). When a guard list contains an
`is` test, the implication form `!(g) || atom` is emitted as well. Every
candidate is type-checked under the rule's scope before it is kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

from policy_tighten.cedar.ast import (
    BOOL,
    AttrType,
    AttrValue,
    BinOp,
    BoolType,
    EntityType,
    Expr,
    GetAttr,
    Has,
    Is,
    Lit,
    LongType,
    Not,
    Or,
    Rule,
    SetType,
    StringType,
    Var,
    conjoin,
    expr_size,
    value_sort_key,
)
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.printer import expr_key
from policy_tighten.cedar.schema import AttrDecl, Schema
from policy_tighten.cedar.typecheck import admissible_types, scope_actions, type_check
from policy_tighten.config import EnumConfig
from policy_tighten.errors import TypeCheckError

logger = logging.getLogger(__name__)

CONTEXT_ROOT = "context"


@dataclass(frozen=True)
class AttrChain:
    root: str
    path: tuple[str, ...]
    result_type: AttrType
    guards: tuple[Expr, ...]
    root_type: str | None  # None for `context`

    @property
    def expr(self) -> Expr:
        e: Expr = Var(self.root)
        for attr in self.path:
            e = GetAttr(e, attr)
        return e

    @property
    def text(self) -> str:
        return ".".join((self.root,) + self.path)


@dataclass(frozen=True)
class CandidatePredicate:
    expr: Expr
    kind: str
    size: int
    text: str

    @classmethod
    def build(cls, expr: Expr, kind: str) -> "CandidatePredicate":
        return cls(expr, kind, expr_size(expr), expr_key(expr))


# --- attribute chains ---


def _extend(schema: Schema, chain: AttrChain, depth: int,
            attrs: dict[str, AttrDecl]) -> Iterator[AttrChain]:
    for name in sorted(attrs):
        decl = attrs[name]
        guards = chain.guards
        if decl.optional:
            guards = guards + (Has(chain.expr, name),)
        step = AttrChain(chain.root, chain.path + (name,), decl.type, guards, chain.root_type)
        yield step
        if isinstance(decl.type, EntityType) and len(step.path) < depth:
            inner = schema.entity_types[decl.type.name].attrs
            yield from _extend(schema, step, depth, inner)


def enumerate_attr_chains(schema: Schema, root_types: set[str] | frozenset[str], depth: int,
                          root: str = "principal") -> list[AttrChain]:
    """Type-safe chains `root.a.b…` of at most `depth` steps, with their guards.

    The bare variable is included. A root with several admissible types gets
    an `is` guard on every chain that reads an attribute through it.
    """
    if depth < 1:
        raise ValueError("chain depth must be >= 1")
    chains: list[AttrChain] = []
    ambiguous = len(root_types) > 1
    for type_name in sorted(root_types):
        bare = AttrChain(root, (), EntityType(type_name), (), type_name)
        chains.append(bare)
        guards = (Is(Var(root), type_name),) if ambiguous else ()
        start = AttrChain(root, (), EntityType(type_name), guards, type_name)
        chains.extend(_extend(schema, start, depth, schema.entity_types[type_name].attrs))
    return chains


def enumerate_context_chains(schema: Schema, actions: list[str], depth: int) -> list[AttrChain]:
    """Chains rooted at `context`, for the attributes the given actions declare."""
    if not actions:
        return []
    names = sorted({n for a in actions for n in schema.actions[a].context_attrs})
    merged: dict[str, AttrDecl] = {}
    for name in names:
        decls = [schema.actions[a].context_attrs.get(name) for a in actions]
        present = [d for d in decls if d is not None]
        if len({d.type for d in present}) != 1:
            continue
        optional = len(present) < len(decls) or any(d.optional for d in present)
        merged[name] = AttrDecl(present[0].type, optional)
    start = AttrChain(CONTEXT_ROOT, (), BOOL, (), None)  # placeholder type, never emitted
    return list(_extend(schema, start, depth, merged))


# --- constants ---


def collect_constants(store: EntityStore, schema: Schema) -> dict[AttrType, list[AttrValue]]:
    """Values of each type that occur in the store, sorted; Bool always has both."""
    found: dict[AttrType, set] = {BOOL: {True, False}}

    def add(value: AttrValue) -> None:
        if isinstance(value, frozenset):
            for v in value:
                add(v)
            return
        if isinstance(value, bool):
            found.setdefault(BOOL, set()).add(value)
        elif isinstance(value, int):
            found.setdefault(LongType(), set()).add(value)
        elif isinstance(value, str):
            found.setdefault(StringType(), set()).add(value)
        else:
            found.setdefault(EntityType(value.type), set()).add(value)

    for ent in store:
        if ent.uid.type in schema.entity_types:
            add(ent.uid)
        for value in ent.attrs.values():
            add(value)
    return {t: sorted(vs, key=value_sort_key) for t, vs in found.items()}


# --- candidates ---


def _merge_guards(*lists: tuple[Expr, ...]) -> tuple[Expr, ...]:
    seen: set[str] = set()
    out: list[Expr] = []
    for guards in lists:
        for g in guards:
            k = expr_key(g)
            if k not in seen:
                seen.add(k)
                out.append(g)
    return tuple(out)


def _compatible(a: AttrChain, b: AttrChain) -> bool:
    """Chains on the same variable must assume the same root type."""
    return not (a.root == b.root and a.root_type != b.root_type)


def _is_entity(t: AttrType) -> bool:
    return isinstance(t, EntityType)


class _Builder:
    def __init__(self, cfg: EnumConfig) -> None:
        self.cfg = cfg
        self.out: list[tuple[tuple[Expr, ...], Expr, str]] = []

    def emit(self, guards: tuple[Expr, ...], atom: Expr, kind: str, negatable: bool) -> None:
        if kind in self.cfg.enabled_kinds:
            self.out.append((guards, atom, kind))
        if negatable and "negatedAtom" in self.cfg.enabled_kinds:
            self.out.append((guards, Not(atom), "negatedAtom"))

    def forms(self) -> Iterator[CandidatePredicate]:
        for guards, atom, kind in self.out:
            yield CandidatePredicate.build(conjoin(guards + (atom,)), kind)
            if any(isinstance(g, Is) for g in guards):
                yield CandidatePredicate.build(Or(Not(conjoin(guards)), atom), kind)


def enumerate_candidates(schema: Schema, store: EntityStore, rule: Rule,
                         cfg: EnumConfig | None = None) -> list[CandidatePredicate]:
    """Deduplicated, type-checked candidate conjuncts for `rule`, smallest first."""
    cfg = (cfg or EnumConfig()).validate()
    if not cfg.enabled_kinds:
        return []

    types = admissible_types(rule.scope, schema)
    chains: list[AttrChain] = []
    for root in ("principal", "resource"):
        chains.extend(enumerate_attr_chains(schema, types[root], cfg.chain_depth, root))
    chains.extend(enumerate_context_chains(
        schema, scope_actions(rule.scope, schema), cfg.chain_depth))
    constants = collect_constants(store, schema) if cfg.constants_from_store else {}

    b = _Builder(cfg)

    # `is` tests on variables that admit several types
    for root in ("principal", "resource"):
        if len(types[root]) > 1:
            for type_name in sorted(types[root]):
                b.emit((), Is(Var(root), type_name), "is", negatable=True)

    for c in chains:
        t = c.result_type
        # presence tests on optional attributes of the chain's type
        if _is_entity(t):
            for name, decl in sorted(schema.entity_types[t.name].attrs.items()):
                if decl.optional:
                    b.emit(c.guards, Has(c.expr, name), "has", negatable=True)
        if c.root == CONTEXT_ROOT and len(c.path) == 1 and c.guards:
            b.emit((), c.guards[-1], "has", negatable=True)
        if isinstance(t, BoolType) and c.path:
            b.emit(c.guards, c.expr, "constEquality", negatable=True)
        if not isinstance(t, (BoolType, SetType)):
            for k in constants.get(t, []):
                b.emit(c.guards, BinOp("==", c.expr, Lit(k)), "constEquality", negatable=False)
                b.emit(c.guards, BinOp("!=", c.expr, Lit(k)), "inequality", negatable=False)
        if isinstance(t, LongType):
            for k in constants.get(t, []):
                for op in ("<", "<=", ">", ">="):
                    b.emit(c.guards, BinOp(op, c.expr, Lit(k)), "intComparison", negatable=False)
        if _is_entity(t):
            for anc in sorted(schema.ancestor_types(t.name)):
                for k in constants.get(EntityType(anc), []):
                    b.emit(c.guards, BinOp("in", c.expr, Lit(k)), "hierarchyMembership",
                           negatable=True)

    ordered = sorted(chains, key=lambda ch: ch.text)
    for c1 in ordered:
        for c2 in ordered:
            if c1 is c2 or not _compatible(c1, c2):
                continue
            guards = _merge_guards(c1.guards, c2.guards)
            t1, t2 = c1.result_type, c2.result_type
            if c1.text < c2.text and t1 == t2 and not isinstance(t1, SetType):
                b.emit(guards, BinOp("==", c1.expr, c2.expr), "equality", negatable=False)
                b.emit(guards, BinOp("!=", c1.expr, c2.expr), "inequality", negatable=False)
                if isinstance(t1, LongType):
                    for op in ("<", "<=", ">", ">="):
                        b.emit(guards, BinOp(op, c1.expr, c2.expr), "intComparison",
                               negatable=False)
            if _is_entity(t1) and _is_entity(t2) and t2.name in schema.ancestor_types(t1.name):
                b.emit(guards, BinOp("in", c1.expr, c2.expr), "hierarchyMembership",
                       negatable=True)
            if isinstance(t2, SetType) and not isinstance(t1, SetType):
                elem = t2.elem
                if elem == t1 or (
                    _is_entity(t1) and _is_entity(elem)
                    and elem.name in schema.ancestor_types(t1.name)
                ):
                    b.emit(guards, BinOp("in", c1.expr, c2.expr), "setMembership",
                           negatable=True)

    seen: set[str] = set()
    kept: list[CandidatePredicate] = []
    for cand in b.forms():
        if cand.text in seen:
            continue
        seen.add(cand.text)
        try:
            type_check(cand.expr, rule.scope, schema)
        except TypeCheckError as e:
            logger.debug("dropping ill-typed candidate %s: %s", cand.text, e)
            continue
        kept.append(cand)

    kept.sort(key=lambda c: (c.size, c.text))
    if len(kept) > cfg.max_candidates:
        logger.warning(
            "rule %s: %d candidates exceed the cap of %d; keeping the smallest",
            rule.id, len(kept), cfg.max_candidates,
        )
        kept = kept[: cfg.max_candidates]
    logger.debug("rule %s: %d candidate conjuncts", rule.id, len(kept))
    return kept


def format_candidates(candidates: list[CandidatePredicate]) -> str:
    """One predicate per line, annotated with kind and size."""
    lines = [f"{c.text}  // {c.kind}, size {c.size}" for c in candidates]
    return "\n".join(lines) + ("\n" if lines else "")
