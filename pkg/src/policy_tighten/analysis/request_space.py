"""The schema-valid request universe, rule denotations and over-privilege sets."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Iterable, Iterator

from policy_tighten.cedar.ast import Decision, Policy, Request, Rule, RuleScope, request_sort_key
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.evaluator import compile_policy, compile_rule
from policy_tighten.cedar.schema import Schema
from policy_tighten.cedar.typecheck import request_environments
from policy_tighten.config import DEFAULT_POP_CAP
from policy_tighten.errors import ResourceCapError
from policy_tighten.logs.access_log import LogSlice

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PopSet:
    """Requests the current rule iterate permits that its log slice never exercised."""

    rule_id: str
    requests: frozenset[Request] = frozenset()

    def __len__(self) -> int:
        return len(self.requests)

    def __bool__(self) -> bool:
        return bool(self.requests)

    def sorted(self) -> list[Request]:
        return sorted(self.requests, key=request_sort_key)


def _universe_plan(schema: Schema, store: EntityStore,
                   scope: RuleScope | None) -> list[tuple[str, list, list]]:
    """(action, principals, resources) blocks in request order."""
    if scope is None:
        envs = [
            (action, p, r)
            for action in schema.action_names()
            for p in sorted(schema.actions[action].principal_types)
            for r in sorted(schema.actions[action].resource_types)
        ]
    else:
        envs = [(e.action, e.principal, e.resource) for e in request_environments(scope, schema)]

    plan: list[tuple[str, list, list]] = []
    by_action_principal: dict[tuple[str, str], list[str]] = {}
    order: list[tuple[str, str]] = []
    for action, p, r in envs:
        key = (action, p)
        if key not in by_action_principal:
            by_action_principal[key] = []
            order.append(key)
        by_action_principal[key].append(r)

    for action, p in order:
        principals = _filter(store.uids_of_type(p), scope.principal if scope else None)
        resources: list = []
        for r in by_action_principal[(action, p)]:
            resources.extend(_filter(store.uids_of_type(r), scope.resource if scope else None))
        if principals and resources:
            plan.append((action, principals, resources))
    return plan


def _filter(uids: list, constraint) -> list:
    if constraint is not None and constraint.kind == "eq":
        return [u for u in uids if u == constraint.uid]
    return uids


def enumerate_requests(schema: Schema, store: EntityStore,
                       scope: RuleScope | None = None) -> Iterator[Request]:
    """Every schema-valid (principal, action, resource) with empty context, in request order.

    With a scope, blocks the scope can never match are skipped by type; the
    remaining requests still go through rule application downstream.
    """
    for action, principals, resources in _universe_plan(schema, store, scope):
        for principal in principals:
            for resource in resources:
                yield Request(principal, action, resource)


def universe_size(schema: Schema, store: EntityStore, scope: RuleScope | None = None) -> int:
    return sum(len(p) * len(r) for _, p, r in _universe_plan(schema, store, scope))


def denotation(rule: Rule, schema: Schema, store: EntityStore,
               cap: int | None = None) -> frozenset[Request]:
    """Universe requests the rule permits on its own (brute force)."""
    applies = compile_rule(rule)
    found: list[Request] = []
    for req in enumerate_requests(schema, store, rule.scope):
        if applies(req, store):
            found.append(req)
            if cap is not None and len(found) > cap:
                raise ResourceCapError(f"denotation of rule {rule.id}", cap, len(found))
    return frozenset(found)


def compute_pop(rule: Rule, log_slice: LogSlice, schema: Schema, store: EntityStore,
                cap: int = DEFAULT_POP_CAP) -> PopSet:
    """[[rule]] minus the slice of the original rule."""
    applies = compile_rule(rule)
    exercised = log_slice.requests
    pop: list[Request] = []
    for req in enumerate_requests(schema, store, rule.scope):
        if req in exercised or not applies(req, store):
            continue
        pop.append(req)
        if len(pop) > cap:
            raise ResourceCapError(f"POP of rule {rule.id}", cap, len(pop))
    return PopSet(rule.id, frozenset(pop))


def pick_targets(pop: PopSet | Iterable[Request], k: int, seed: int | str,
                 exclude: Iterable[Request] = ()) -> list[Request]:
    """Seeded draw of up to k distinct requests, preferring ones not in `exclude`."""
    requests = pop.requests if isinstance(pop, PopSet) else frozenset(pop)
    excluded = frozenset(exclude)
    ordered = sorted(requests, key=request_sort_key)
    fresh = [r for r in ordered if r not in excluded]
    stale = [r for r in ordered if r in excluded]
    rng = random.Random(seed)
    picked = rng.sample(fresh, min(k, len(fresh)))
    if len(picked) < k and stale:
        picked += rng.sample(stale, min(k - len(picked), len(stale)))
    return picked


def policy_denotation(policy: Policy, schema: Schema, store: EntityStore,
                      cap: int | None = None) -> frozenset[Request]:
    """Universe requests the whole policy allows."""
    decide = compile_policy(policy)
    found: list[Request] = []
    for req in enumerate_requests(schema, store):
        if decide(req, store) is Decision.ALLOWED:
            found.append(req)
            if cap is not None and len(found) > cap:
                raise ResourceCapError("policy denotation", cap, len(found))
    return frozenset(found)
