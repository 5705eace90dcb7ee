"""Find one separating conjunct for a permit rule by first-match enumeration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from policy_tighten.analysis.predicates import CandidatePredicate
from policy_tighten.cedar.ast import Request, Rule
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.evaluator import Compiled, compile_expr
from policy_tighten.cedar.schema import Schema
from policy_tighten.errors import EvalError

logger = logging.getLogger(__name__)


@dataclass
class SynthesisProblem:
    rule: Rule
    slice: frozenset[Request]
    targets: list[Request]
    candidates: list[CandidatePredicate]
    store: EntityStore
    schema: Schema
    # compiled candidate bodies, shared across iterations of the same rule
    compiled: dict[str, Compiled] = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SynthesisResult:
    found: bool
    conjunct: CandidatePredicate | None = None
    new_rule: Rule | None = None
    denied_targets: tuple[Request, ...] = ()
    examined: int = 0

    @classmethod
    def failure(cls, examined: int) -> "SynthesisResult":
        return cls(False, examined=examined)


def holds(fn: Compiled, req: Request, store: EntityStore) -> bool:
    """True when `fn` evaluates to true on `req`; an evaluation error counts as false."""
    try:
        return fn(req, store) is True
    except EvalError:
        return False


def restrict_one(prob: SynthesisProblem) -> SynthesisResult:
    """Return the first candidate that keeps the whole slice and denies some target.

    Slice and targets are already permitted by the current rule, so the
    conjoined rule applies to one of them exactly when the candidate itself
    evaluates to true there; an evaluation error counts as false.
    """
    store = prob.store
    for examined, cand in enumerate(prob.candidates, start=1):
        fn = prob.compiled.get(cand.text)
        if fn is None:
            fn = compile_expr(cand.expr)
            prob.compiled[cand.text] = fn
        denied = tuple(t for t in prob.targets if not holds(fn, t, store))
        if not denied:
            continue
        if all(holds(fn, req, store) for req in prob.slice):
            logger.debug("rule %s: `%s` denies %d of %d target(s)",
                         prob.rule.id, cand.text, len(denied), len(prob.targets))
            return SynthesisResult(
                True,
                conjunct=cand,
                new_rule=prob.rule.conjoined(cand.expr),
                denied_targets=denied,
                examined=examined,
            )
    return SynthesisResult.failure(len(prob.candidates))
