"""Candidate conjunct enumeration."""

from __future__ import annotations

import pytest

from policy_tighten.analysis.predicates import (
    collect_constants,
    enumerate_attr_chains,
    enumerate_candidates,
    format_candidates,
)
from policy_tighten.cedar.ast import BOOL, EntityType, LongType
from policy_tighten.cedar.entities import EntityStore
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.schema import parse_schema
from policy_tighten.cedar.typecheck import type_check
from policy_tighten.config import ALL_KINDS, EnumConfig
from policy_tighten.errors import ConfigError

from oracles import naive_depth1_candidates

GUARDED_AREA = "principal has pcMember && principal.pcMember == resource.area"


@pytest.fixture
def pc_read(demo_policy):
    return demo_policy.get("pc-read")


def texts(candidates):
    return [c.text for c in candidates]


def test_demo_contains_guarded_area_equality(pc_read, demo_schema, demo_store):
    candidates = enumerate_candidates(demo_schema, demo_store, pc_read)
    assert GUARDED_AREA in texts(candidates)
    # optional access is never emitted unguarded
    assert "principal.pcMember == resource.area" not in texts(candidates)


def test_sorted_and_deduplicated(pc_read, demo_schema, demo_store):
    candidates = enumerate_candidates(demo_schema, demo_store, pc_read)
    keys = [(c.size, c.text) for c in candidates]
    assert keys == sorted(keys)
    assert len(set(texts(candidates))) == len(candidates)


def test_every_candidate_type_checks(pc_read, demo_schema, demo_store):
    for cand in enumerate_candidates(demo_schema, demo_store, pc_read):
        type_check(cand.expr, pc_read.scope, demo_schema)


def test_kinds_filter(pc_read, demo_schema, demo_store):
    cfg = EnumConfig(enabled_kinds=frozenset({"equality"}))
    candidates = enumerate_candidates(demo_schema, demo_store, pc_read, cfg)
    assert candidates
    assert {c.kind for c in candidates} == {"equality"}
    assert GUARDED_AREA in texts(candidates)


def test_no_kinds(pc_read, demo_schema, demo_store):
    cfg = EnumConfig(enabled_kinds=frozenset())
    assert enumerate_candidates(demo_schema, demo_store, pc_read, cfg) == []


def test_max_candidates_keeps_smallest(pc_read, demo_schema, demo_store):
    everything = enumerate_candidates(demo_schema, demo_store, pc_read)
    capped = enumerate_candidates(demo_schema, demo_store, pc_read, EnumConfig(max_candidates=5))
    assert capped == everything[:5]


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError, match="unknown candidate kind"):
        EnumConfig(enabled_kinds=frozenset({"regex"})).validate()
    assert "setMembership" in ALL_KINDS


def test_cyclic_schema_chains_are_bounded():
    schema = parse_schema("""
        entity Node { next?: Node, label: Long };
        action walk appliesTo { principal: Node, resource: Node };
    """)
    chains = enumerate_attr_chains(schema, {"Node"}, depth=3)
    paths = {c.path for c in chains}
    assert ("next", "next", "next") in paths
    assert ("next", "next", "next", "next") not in paths
    assert all(len(p) <= 3 for p in paths)
    deep = next(c for c in chains if c.path == ("next", "next", "label"))
    assert len(deep.guards) == 2
    with pytest.raises(ValueError):
        enumerate_attr_chains(schema, {"Node"}, depth=0)


def test_ambiguous_principal_gets_type_guards(classroom):
    rule = classroom.loose.get("course-view")

    candidates = enumerate_candidates(classroom.schema, EntityStore({}), rule)
    found = texts(candidates)
    assert "principal is Teacher" in found
    assert "principal is Student && principal has suspended && principal.suspended" in found
    assert "!(principal is Student && principal has suspended) || principal.suspended" in found


def test_reference_equality_between_chains(classroom):

    rule = classroom.loose.get("teacher-edit")
    found = texts(enumerate_candidates(classroom.schema, EntityStore({}), rule))
    assert "principal == resource.course.teacher" in found


def test_constants(demo_schema, demo_store):
    constants = collect_constants(demo_store, demo_schema)
    assert set(constants[BOOL]) == {False, True}
    assert len(constants[EntityType("Area")]) == 3
    assert LongType() not in constants


def test_format_candidates(pc_read, demo_schema, demo_store):
    text = format_candidates(enumerate_candidates(demo_schema, demo_store, pc_read,
                                                  EnumConfig(max_candidates=3)))
    assert text.count("\n") == 3
    assert "// " in text and "size " in text


def test_depth_one_has_no_nested_chains(demo_schema, demo_store):
    rule = parse_policy('permit (principal, action, resource);', demo_schema).rules[0]
    cfg = EnumConfig(chain_depth=1)
    for cand in enumerate_candidates(demo_schema, demo_store, rule, cfg):
        assert ".pcMember." not in cand.text and ".area." not in cand.text


def test_depth_one_count_matches_grammar(conference):
    rule = conference.loose.get("paper-read-pc")
    got = enumerate_candidates(conference.schema, EntityStore({}), rule,
                               EnumConfig(chain_depth=1))
    expected = naive_depth1_candidates(conference.schema, "User", "Paper", "Read")
    assert expected
    assert len(got) == len(expected)
