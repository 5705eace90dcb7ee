"""Tighten every permit rule of a policy against an access log.

Each permit rule is handled on its own: its log slice is fixed from the
original rule, then single-conjunct searches are repeated against seeded
samples of its over-privilege set until that set is empty or the rule has
used up its failure budget. Forbid rules pass through untouched.
"""

from __future__ import annotations

import hashlib
import logging
import time

from policy_tighten.analysis.predicates import enumerate_candidates
from policy_tighten.analysis.request_space import PopSet, compute_pop, denotation, pick_targets
from policy_tighten.cedar.ast import Policy, Request, Rule
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.evaluator import Compiled
from policy_tighten.cedar.printer import expr_key
from policy_tighten.cedar.schema import Schema
from policy_tighten.cedar.typecheck import type_check_rule
from policy_tighten.config import TightenConfig
from policy_tighten.core.runner import run_tasks
from policy_tighten.errors import InconsistentLogError, TypeCheckError
from policy_tighten.logs.access_log import AccessLog, check_consistency, log_slice, permitted_log
from policy_tighten.synth.restrict_one import SynthesisProblem, holds, restrict_one
from policy_tighten.tighten.report import IterationRecord, RuleReport, Termination, TighteningReport
from policy_tighten.tighten.simplify import simplify_body

logger = logging.getLogger(__name__)


def rule_seed(seed: int, rule_id: str) -> int:
    """Per-rule seed; independent of rule order and of the execution mode."""
    digest = hashlib.sha256(f"{seed}\x00{rule_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _body_key(rule: Rule) -> str | None:
    return None if rule.body is None else expr_key(rule.body)


def _finalize(rule: Rule, schema: Schema, store: EntityStore, cap: int) -> tuple[Rule, bool]:
    """Simplified rule when it type-checks and decides exactly like `rule`."""
    candidate = rule.with_body(simplify_body(rule.body))
    if _body_key(candidate) == _body_key(rule):
        return rule, False
    try:
        type_check_rule(candidate, schema)
    except TypeCheckError as e:
        logger.warning("rule %s: simplified body rejected by the type checker: %s", rule.id, e)
        return rule, False
    if denotation(candidate, schema, store, cap) != denotation(rule, schema, store, cap):
        logger.warning("rule %s: simplified body changes decisions; keeping it as built", rule.id)
        return rule, False
    return candidate, True


def tighten_rule(rule: Rule, log_plus: frozenset[Request], schema: Schema,
                 store: EntityStore, cfg: TightenConfig) -> tuple[Rule, RuleReport]:
    """Tighten one permit rule; returns the last accepted iterate and its report."""
    start = time.perf_counter()
    slice_ = log_slice(rule, log_plus, store)
    candidates = enumerate_candidates(schema, store, rule, cfg.enum_config())
    report = RuleReport(rule.id, slice_size=len(slice_), candidates=len(candidates))
    base_seed = rule_seed(cfg.seed, rule.id)

    current = rule
    pop = compute_pop(current, slice_, schema, store, cfg.pop_cap)
    report.pop_initial = len(pop)
    compiled: dict[str, Compiled] = {}
    failed_targets: set[Request] = set()
    index = 0

    while True:
        if not pop:
            report.termination = Termination.POP_EMPTY
            break
        if report.failures >= cfg.max_failures:
            report.termination = Termination.FAILURE_BUDGET
            break
        index += 1
        targets = pick_targets(pop, cfg.targets_per_iteration, base_seed + index,
                               exclude=failed_targets)
        prob = SynthesisProblem(current, slice_.requests, targets, candidates,
                                store, schema, compiled)
        result = restrict_one(prob)
        record = IterationRecord(index, targets, result.found, examined=result.examined,
                                 pop_before=len(pop))

        if not result.found:
            report.failures += 1
            failed_targets.update(targets)
            record.pop_after = len(pop)
            logger.debug(
                "rule %s, iteration %d: no candidate keeps the slice and denies any of "
                "%d target(s) (failure %d of %d)",
                rule.id, index, len(targets), report.failures, cfg.max_failures,
            )
        else:
            conjunct = result.conjunct
            fn = compiled[conjunct.text]
            current = result.new_rule
            pop = PopSet(rule.id, frozenset(r for r in pop.requests if holds(fn, r, store)))
            record.conjunct = conjunct.text
            record.kind = conjunct.kind
            record.pop_after = len(pop)
            report.added.append(conjunct.text)
            logger.debug(
                "rule %s, iteration %d: added `%s` (%s); POP %d -> %d",
                rule.id, index, conjunct.text, conjunct.kind, record.pop_before, record.pop_after,
            )
        report.iterations.append(record)

    report.pop_final = len(pop)
    if report.added:
        current, report.simplified = _finalize(current, schema, store, cfg.pop_cap)
    report.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return current, report


def restrict(policy: Policy, log: AccessLog, schema: Schema, store: EntityStore,
             cfg: TightenConfig | None = None) -> tuple[Policy, TighteningReport]:
    """Tighten all permit rules; forbid rules and rule order are preserved."""
    cfg = (cfg or TightenConfig()).validate()
    start = time.perf_counter()

    consistency = check_consistency(policy, log, store)
    if not consistency.consistent:
        if not cfg.allow_inconsistent:
            raise InconsistentLogError(consistency.violations)
        logger.warning(
            "policy disagrees with %d of %d log entries; continuing as requested",
            len(consistency.violations), consistency.checked,
        )

    log_plus = permitted_log(log)
    permits = policy.permits()
    outcomes = run_tasks(
        tighten_rule,
        [(rule, log_plus, schema, store, cfg) for rule in permits],
        labels=[f"rule {rule.id}" for rule in permits],
        parallel=cfg.parallel,
    )

    report = TighteningReport(
        max_failures=cfg.max_failures,
        targets_per_iteration=cfg.targets_per_iteration,
        chain_depth=cfg.chain_depth,
        seed=cfg.seed,
        forbids=[r.id for r in policy.forbids()],
        log_entries=len(log),
        violations=len(consistency.violations),
    )
    updated: dict[str, Rule] = {}
    for new_rule, rule_report in outcomes:
        updated[new_rule.id] = new_rule
        report.rules.append(rule_report)
        logger.info(
            "rule %s: %s after %d iteration(s), %d conjunct(s) added, POP %d -> %d",
            rule_report.rule_id, rule_report.termination.value, len(rule_report.iterations),
            len(rule_report.added), rule_report.pop_initial, rule_report.pop_final,
        )
    report.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return policy.replacing(updated), report


def first_problem(rule: Rule, log_plus: frozenset[Request], schema: Schema,
                  store: EntityStore, cfg: TightenConfig | None = None) -> SynthesisProblem:
    """The synthesis problem `tighten_rule` poses in its first iteration."""
    cfg = (cfg or TightenConfig()).validate()
    slice_ = log_slice(rule, log_plus, store)
    pop = compute_pop(rule, slice_, schema, store, cfg.pop_cap)
    targets = pick_targets(pop, cfg.targets_per_iteration, rule_seed(cfg.seed, rule.id) + 1)
    candidates = enumerate_candidates(schema, store, rule, cfg.enum_config())
    return SynthesisProblem(rule, slice_.requests, targets, candidates, store, schema)
