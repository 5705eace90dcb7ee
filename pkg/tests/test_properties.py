"""Tightening properties over randomly weakened policies and generated logs."""

from __future__ import annotations

import random

import pytest

from policy_tighten.analysis.request_space import denotation, policy_denotation
from policy_tighten.cedar.ast import Policy
from policy_tighten.cedar.parser import parse_expr
from policy_tighten.config import TightenConfig
from policy_tighten.logs.access_log import check_consistency, log_slice, permitted_log
from policy_tighten.tighten.driver import restrict
from policy_tighten.tighten.report import Termination

from oracles import naive_denotation, naive_policy_denotation, random_world


def _config(seed: int) -> TightenConfig:
    rng = random.Random(seed * 7919)
    return TightenConfig(
        seed=seed,
        max_failures=rng.randint(1, 3),
        targets_per_iteration=rng.randint(1, 4),
    )


def check_world(seed: int) -> None:
    world = random_world(seed)
    cfg = _config(seed)
    new, report = restrict(world.loose, world.log, world.schema, world.store, cfg)
    log_plus = permitted_log(world.log)

    # forbids and rule order survive; the result still agrees with the log
    assert new.ids() == world.loose.ids()
    assert new.forbids() == world.loose.forbids()
    assert check_consistency(new, world.log, world.store).consistent

    # never more permissive than the input, rule by rule and as a whole
    assert naive_policy_denotation(new, world.schema, world.store) <= \
        naive_policy_denotation(world.loose, world.schema, world.store)

    for rule_report in report.rules:
        original = world.loose.get(rule_report.rule_id)
        final = new.get(rule_report.rule_id)
        slice_ = log_slice(original, log_plus, world.store).requests
        final_den = naive_denotation(final, world.schema, world.store)
        assert slice_ <= final_den
        assert final_den <= naive_denotation(original, world.schema, world.store)

        assert rule_report.failures <= cfg.max_failures
        if rule_report.termination is Termination.FAILURE_BUDGET:
            assert rule_report.failures == cfg.max_failures
        else:
            assert rule_report.pop_final == 0
        assert len(rule_report.iterations) <= rule_report.pop_initial + cfg.max_failures

        # each accepted conjunct shrinks the rule strictly
        current = original
        previous = denotation(current, world.schema, world.store)
        for it in rule_report.iterations:
            assert len(it.targets) <= cfg.targets_per_iteration
            if not it.found:
                assert it.pop_after == it.pop_before
                continue
            current = current.conjoined(parse_expr(it.conjunct))
            now = denotation(current, world.schema, world.store)
            assert now < previous
            assert it.pop_after < it.pop_before
            previous = now
        assert previous == final_den


@pytest.mark.parametrize("seed", range(250))
def test_random_worlds(seed):
    check_world(seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(250, 1000))
def test_random_worlds_extended(seed):
    check_world(seed)


@pytest.mark.parametrize("seed", range(0, 300, 7))
def test_result_does_not_depend_on_rule_order(seed):
    world = random_world(seed)
    cfg = _config(seed)
    reordered = Policy(tuple(reversed(world.loose.rules)))
    a, _ = restrict(world.loose, world.log, world.schema, world.store, cfg)
    b, _ = restrict(reordered, world.log, world.schema, world.store, cfg)
    for rule in a.rules:
        assert policy_denotation(Policy((rule,)), world.schema, world.store) == \
            policy_denotation(Policy((b.get(rule.id),)), world.schema, world.store)
