"""Single-conjunct search."""

from __future__ import annotations

import dataclasses

import pytest

from policy_tighten.analysis.request_space import denotation
from policy_tighten.cedar.evaluator import compile_expr
from policy_tighten.logs.access_log import permitted_log
from policy_tighten.synth.restrict_one import holds, restrict_one
from policy_tighten.tighten.driver import first_problem

GUARDED_AREA = "principal has pcMember && principal.pcMember == resource.area"


@pytest.fixture
def problem(demo_policy, demo_log, demo_schema, demo_store):
    return first_problem(demo_policy.get("pc-read"), permitted_log(demo_log),
                         demo_schema, demo_store)


def qualifies(cand, prob):
    fn = compile_expr(cand.expr)
    keeps_slice = all(holds(fn, r, prob.store) for r in prob.slice)
    denies_target = any(not holds(fn, t, prob.store) for t in prob.targets)
    return keeps_slice and denies_target


def test_demo_finds_area_equality(problem):
    result = restrict_one(problem)
    assert result.found
    assert result.conjunct.text == GUARDED_AREA
    assert set(result.denied_targets) == set(problem.targets)


def test_first_match_in_candidate_order(problem):
    result = restrict_one(problem)
    position = result.examined - 1
    assert problem.candidates[position] == result.conjunct
    assert not any(qualifies(c, problem) for c in problem.candidates[:position])


def test_new_rule_strictly_restricts(problem):
    result = restrict_one(problem)
    old = denotation(problem.rule, problem.schema, problem.store)
    new = denotation(result.new_rule, problem.schema, problem.store)
    assert new < old
    assert problem.slice <= new
    assert not new & set(result.denied_targets)


def test_failure_examines_every_candidate(problem):
    losing = [c for c in problem.candidates if not qualifies(c, problem)][:25]
    prob = dataclasses.replace(problem, candidates=losing, compiled={})
    result = restrict_one(prob)
    assert not result.found
    assert result.new_rule is None
    assert result.examined == len(losing)


def test_no_targets_means_failure(problem):
    prob = dataclasses.replace(problem, targets=[], compiled={})
    assert not restrict_one(prob).found


def test_compiled_cache_is_filled(problem):
    prob = dataclasses.replace(problem, compiled={})
    result = restrict_one(prob)
    assert len(prob.compiled) == result.examined
