"""Naive reference implementations used to cross-check the package.

Nothing here imports the evaluator, the request universe or the tightening
code; the oracles walk the AST and the raw entity records directly.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from policy_tighten.cedar.ast import (
    And,
    BinOp,
    BoolType,
    Decision,
    EntityType,
    EntityUid,
    GetAttr,
    Has,
    Is,
    Lit,
    LongType,
    Not,
    Or,
    Policy,
    Request,
    Rule,
    SetLit,
    SetType,
    Var,
)
from policy_tighten.cedar.entities import Entity, EntityStore, validate_store
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.schema import Schema, parse_schema
from policy_tighten.logs.access_log import AccessLog

LIBRARY_SCHEMA = """
entity Group;
entity User in [Group] { level: Long, admin: Bool, team?: Group, name: String };
entity Doc in [Group] { owner: User, public: Bool, rank: Long, readers: Set<User> };

action view appliesTo { principal: User, resource: Doc, context: { urgent?: Bool } };
action edit appliesTo { principal: User, resource: Doc };
"""

_RULES = {
    "view-owner": (
        'permit (principal, action == Action::"view", resource)',
        ["resource.owner == principal", "resource.rank <= principal.level"],
    ),
    "view-reader": (
        'permit (principal, action == Action::"view", resource)',
        ["resource.public", "principal in resource.readers"],
    ),
    "edit-team": (
        'permit (principal, action == Action::"edit", resource)',
        ["principal has team && resource in principal.team", "principal.admin"],
    ),
}

_FORBID = """
@id("edit-locked")
forbid (principal, action == Action::"edit", resource)
when { resource.rank > 3 };
"""


class Undefined(Exception):
    pass


def descends(store: EntityStore, a: EntityUid, b: EntityUid) -> bool:
    seen = set()
    stack = [a]
    while stack:
        cur = stack.pop()
        if cur == b:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        ent = store.entities.get(cur)
        if ent is not None:
            stack.extend(ent.parents)
    return False


def naive_eval(e, req: Request, store: EntityStore):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name == "principal":
            return req.principal
        if e.name == "resource":
            return req.resource
        if e.name == "action":
            return EntityUid("Action", req.action)
        return dict(req.context)
    if isinstance(e, SetLit):
        return frozenset(naive_eval(i, req, store) for i in e.items)
    if isinstance(e, GetAttr):
        base = naive_eval(e.expr, req, store)
        if isinstance(base, dict):
            if e.attr not in base:
                raise Undefined(e.attr)
            return base[e.attr]
        ent = store.entities.get(base)
        if ent is None or e.attr not in ent.attrs:
            raise Undefined(e.attr)
        return ent.attrs[e.attr]
    if isinstance(e, Has):
        base = naive_eval(e.expr, req, store)
        if isinstance(base, dict):
            return e.attr in base
        ent = store.entities.get(base)
        return ent is not None and e.attr in ent.attrs
    if isinstance(e, Is):
        return naive_eval(e.expr, req, store).type == e.type_name
    if isinstance(e, BinOp):
        left = naive_eval(e.left, req, store)
        right = naive_eval(e.right, req, store)
        if e.op == "==":
            return type(left) is type(right) and left == right
        if e.op == "!=":
            return not (type(left) is type(right) and left == right)
        if e.op == "in":
            if isinstance(right, frozenset):
                if isinstance(left, EntityUid):
                    return any(descends(store, left, x) for x in right)
                return left in right
            return descends(store, left, right)
        return {
            "<": left < right,
            "<=": left <= right,
            ">": left > right,
            ">=": left >= right,
        }[e.op]
    if isinstance(e, Not):
        return not naive_eval(e.expr, req, store)
    if isinstance(e, And):
        return naive_eval(e.left, req, store) is True and naive_eval(e.right, req, store) is True
    if isinstance(e, Or):
        return naive_eval(e.left, req, store) is True or naive_eval(e.right, req, store) is True
    raise TypeError(e)


def _scope_ok(c, uid: EntityUid, store: EntityStore) -> bool:
    if c.kind == "eq":
        return uid == c.uid
    if c.kind == "is":
        return uid.type == c.type_name
    if c.kind == "in":
        return descends(store, uid, c.uid)
    return True


def naive_applies(rule: Rule, req: Request, store: EntityStore) -> bool:
    if rule.action.kind != "any" and req.action not in rule.action.names:
        return False
    if not _scope_ok(rule.principal, req.principal, store):
        return False
    if not _scope_ok(rule.resource, req.resource, store):
        return False
    if rule.body is None:
        return True
    try:
        return naive_eval(rule.body, req, store) is True
    except Undefined:
        return False


def naive_decision(policy: Policy, req: Request, store: EntityStore) -> Decision:
    if any(naive_applies(r, req, store) for r in policy.forbids()):
        return Decision.DENIED
    if any(naive_applies(r, req, store) for r in policy.permits()):
        return Decision.ALLOWED
    return Decision.DENIED


def naive_universe(schema: Schema, store: EntityStore) -> set[Request]:
    out = set()
    for name, decl in schema.actions.items():
        for p in store.entities:
            if p.type not in decl.principal_types:
                continue
            for r in store.entities:
                if r.type in decl.resource_types:
                    out.add(Request(p, name, r))
    return out


def naive_denotation(rule: Rule, schema: Schema, store: EntityStore) -> set[Request]:
    return {req for req in naive_universe(schema, store) if naive_applies(rule, req, store)}


def naive_policy_denotation(policy: Policy, schema: Schema, store: EntityStore) -> set[Request]:
    return {
        req for req in naive_universe(schema, store)
        if naive_decision(policy, req, store) is Decision.ALLOWED
    }


def naive_slice(rule: Rule, log: AccessLog, store: EntityStore) -> set[Request]:
    return {
        req for req, decision in log.entries.items()
        if decision is Decision.ALLOWED and naive_applies(rule, req, store)
    }


def naive_similarity(init: set[Request], star: set[Request], tight: set[Request],
                     allowed: set[Request]) -> tuple[float, float]:
    """(over-privilege remaining, intended privilege removed), straight from the definitions."""
    over = [req for req in init if req not in tight]
    kept = [req for req in over if req in star]
    unexercised = [req for req in tight if req not in allowed]
    removed = [req for req in unexercised if req not in star]
    return (
        len(kept) / len(over) if over else 0.0,
        len(removed) / len(unexercised) if unexercised else 0.0,
    )



def naive_depth1_candidates(schema: Schema, principal_type: str, resource_type: str,
                            action: str) -> set[str]:
    """Candidate atoms over depth-1 terms, written out grammar rule by grammar rule.

    Constants are left out, so this matches enumeration over an empty store.
    """
    terms = []
    for var, type_name in (("principal", principal_type), ("resource", resource_type)):
        terms.append((var, EntityType(type_name), ""))
        for attr, decl in schema.entity_types[type_name].attrs.items():
            guard = f"{var} has {attr} && " if decl.optional else ""
            terms.append((f"{var}.{attr}", decl.type, guard))
    for attr, decl in schema.actions[action].context_attrs.items():
        guard = f"context has {attr} && " if decl.optional else ""
        terms.append((f"context.{attr}", decl.type, guard))

    atoms = set()
    for name, t, guard in terms:
        if isinstance(t, EntityType):
            for attr, decl in schema.entity_types[t.name].attrs.items():
                if decl.optional:
                    atoms |= {f"{guard}{name} has {attr}", f"{guard}!({name} has {attr})"}
        if name.startswith("context.") and guard:
            has = guard.removesuffix(" && ")
            atoms |= {has, f"!({has})"}
        if isinstance(t, BoolType) and "." in name:
            atoms |= {f"{guard}{name}", f"{guard}!{name}"}

    for a, b in itertools.permutations(terms, 2):
        (na, ta, ga), (nb, tb, gb) = a, b
        guard = ga + (gb if gb != ga else "")
        if na < nb and ta == tb and not isinstance(ta, SetType):
            atoms |= {f"{guard}{na} == {nb}", f"{guard}{na} != {nb}"}
            if isinstance(ta, LongType):
                atoms |= {f"{guard}{na} {op} {nb}" for op in ("<", "<=", ">", ">=")}
        if isinstance(ta, EntityType) and isinstance(tb, EntityType) \
                and tb.name in schema.ancestor_types(ta.name):
            atoms |= {f"{guard}{na} in {nb}", f"{guard}!({na} in {nb})"}
        if isinstance(tb, SetType) and not isinstance(ta, SetType):
            elem = tb.elem
            if elem == ta or (isinstance(ta, EntityType) and isinstance(elem, EntityType)
                              and elem.name in schema.ancestor_types(ta.name)):
                atoms |= {f"{guard}{na} in {nb}", f"{guard}!({na} in {nb})"}
    return atoms

# --- random worlds ---


@dataclass
class World:
    schema: Schema
    store: EntityStore
    tight: Policy
    loose: Policy
    log: AccessLog


def _policy_text(bodies: dict[str, list[str]]) -> str:
    parts = []
    for rule_id, (head, _) in _RULES.items():
        conjuncts = bodies[rule_id]
        text = f'@id("{rule_id}")\n{head}'
        if conjuncts:
            text += "\nwhen { " + " && ".join(conjuncts) + " }"
        parts.append(text + ";")
    return "\n\n".join(parts) + "\n" + _FORBID


def random_store(rng: random.Random, schema: Schema) -> EntityStore:
    """At most 11 entities: 1-3 groups, 2-4 users, 2-4 docs."""
    groups = [EntityUid("Group", f"g{i}") for i in range(rng.randint(1, 3))]
    users = [EntityUid("User", f"u{i}") for i in range(rng.randint(2, 4))]
    docs = [EntityUid("Doc", f"d{i}") for i in range(rng.randint(2, 4))]
    entities = {g: Entity(g) for g in groups}
    for u in users:
        attrs = {
            "level": rng.randint(0, 3),
            "admin": rng.random() < 0.5,
            "name": rng.choice(["ann", "bob"]),
        }
        if rng.random() < 0.5:
            attrs["team"] = rng.choice(groups)
        parents = frozenset(rng.sample(groups, rng.randint(0, len(groups))))
        entities[u] = Entity(u, attrs, parents)
    for d in docs:
        attrs = {
            "owner": rng.choice(users),
            "public": rng.random() < 0.5,
            "rank": rng.randint(0, 5),
            "readers": frozenset(rng.sample(users, rng.randint(0, len(users)))),
        }
        parents = frozenset(rng.sample(groups, rng.randint(0, len(groups))))
        entities[d] = Entity(d, attrs, parents)
    return validate_store(EntityStore(entities), schema)


def random_world(seed: int) -> World:
    """A small store, a tight policy, a random weakening of it and a consistent log."""
    rng = random.Random(seed)
    schema = parse_schema(LIBRARY_SCHEMA)
    store = random_store(rng, schema)

    tight_bodies = {rule_id: list(conj) for rule_id, (_, conj) in _RULES.items()}
    loose_bodies = {}
    for rule_id, conjuncts in tight_bodies.items():
        keep = [c for c in conjuncts if rng.random() < 0.5]
        loose_bodies[rule_id] = keep
    tight = parse_policy(_policy_text(tight_bodies), schema)
    loose = parse_policy(_policy_text(loose_bodies), schema)

    density = rng.choice([0.3, 0.6, 1.0])
    log = AccessLog()
    for req in sorted(naive_universe(schema, store), key=str):
        if naive_decision(tight, req, store) is Decision.ALLOWED:
            if rng.random() < density:
                log.add(req, Decision.ALLOWED)
        elif naive_decision(loose, req, store) is Decision.DENIED:
            if rng.random() < 0.3:
                log.add(req, Decision.DENIED)
    return World(schema, store, tight, loose, log)
