"""Semantic similarity between a tightened policy and its reference tight policy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from policy_tighten.analysis.request_space import denotation, policy_denotation
from policy_tighten.cedar.ast import Policy, Request, Rule
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.schema import Schema
from policy_tighten.config import DEFAULT_POP_CAP


@dataclass(frozen=True)
class SimilarityMetrics:
    """Both fractions are "lower is better"; an empty base set yields 0."""

    over_privilege_remaining: float
    intended_privilege_removed: float
    over_privileges: int = 0
    intended_unexercised: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "over_privilege_remaining": round(self.over_privilege_remaining, 6),
            "intended_privilege_removed": round(self.intended_privilege_removed, 6),
            "over_privileges": self.over_privileges,
            "intended_unexercised": self.intended_unexercised,
        }


@dataclass
class PolicyMetrics:
    policy: SimilarityMetrics
    rules: dict[str, SimilarityMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy.to_dict(),
            "rules": {rule_id: m.to_dict() for rule_id, m in self.rules.items()},
        }


def _ratio(part: int, whole: int) -> float:
    return 0.0 if whole == 0 else part / whole


def similarity(init: frozenset[Request], star: frozenset[Request], tight: frozenset[Request],
               log_plus: frozenset[Request]) -> SimilarityMetrics:
    """Metrics from already-computed denotations."""
    over = init - tight
    unexercised = tight - log_plus
    return SimilarityMetrics(
        over_privilege_remaining=_ratio(len(star & over), len(over)),
        intended_privilege_removed=_ratio(len(unexercised - star), len(unexercised)),
        over_privileges=len(over),
        intended_unexercised=len(unexercised),
    )


def rule_similarity(r_init: Rule, r_star: Rule, r_tight: Rule, schema: Schema,
                    store: EntityStore, log_plus: Iterable[Request],
                    cap: int = DEFAULT_POP_CAP) -> SimilarityMetrics:
    return similarity(
        denotation(r_init, schema, store, cap),
        denotation(r_star, schema, store, cap),
        denotation(r_tight, schema, store, cap),
        frozenset(log_plus),
    )


def semantic_similarity(p_init: Policy, p_star: Policy, p_tight: Policy, schema: Schema,
                        store: EntityStore, log_plus: Iterable[Request],
                        cap: int = DEFAULT_POP_CAP) -> PolicyMetrics:
    """Policy-wide metrics plus one entry per permit rule id present in all three."""
    log_plus = frozenset(log_plus)
    result = PolicyMetrics(similarity(
        policy_denotation(p_init, schema, store, cap),
        policy_denotation(p_star, schema, store, cap),
        policy_denotation(p_tight, schema, store, cap),
        log_plus,
    ))
    star_ids = set(p_star.ids())
    tight_ids = set(p_tight.ids())
    for rule in p_init.permits():
        if rule.id in star_ids and rule.id in tight_ids:
            result.rules[rule.id] = rule_similarity(
                rule, p_star.get(rule.id), p_tight.get(rule.id), schema, store, log_plus, cap,
            )
    return result


def exact_recovery(r_star: Rule, r_tight: Rule, schema: Schema, store: EntityStore,
                   cap: int = DEFAULT_POP_CAP) -> bool:
    """True when both rules permit exactly the same universe requests."""
    return denotation(r_star, schema, store, cap) == denotation(r_tight, schema, store, cap)
