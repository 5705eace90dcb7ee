"""Per-rule structural diff."""

from __future__ import annotations

from policy_tighten.cedar.parser import parse_policy
from policy_tighten.diff.engine import diff_policies

OLD = """
@id("a") permit (principal, action, resource) when { principal has pcMember };
@id("b") permit (principal, action, resource);
@id("c") forbid (principal, action, resource) when { principal.isPCChair };
"""

NEW = """
@id("a") permit (principal, action, resource)
when { principal has pcMember && principal.pcMember == resource.area };
@id("b") permit (principal, action, resource);
@id("c") forbid (principal, action, resource) when { principal.isPCChair };
@id("d") permit (principal, action, resource) when { false };
"""


def test_changed_and_added(demo_schema):
    changes = diff_policies(parse_policy(OLD, demo_schema), parse_policy(NEW, demo_schema))
    assert [(c.rule_id, c.status) for c in changes] == [("a", "changed"), ("d", "added")]
    assert changes[0].added_conjuncts == ["principal.pcMember == resource.area"]
    assert changes[0].removed_conjuncts == []
    assert changes[0].to_dict()["effect"] == "permit"


def test_removed(demo_schema):
    changes = diff_policies(parse_policy(NEW, demo_schema), parse_policy(OLD, demo_schema))
    assert [(c.rule_id, c.status) for c in changes] == [("a", "changed"), ("d", "removed")]
    assert changes[0].removed_conjuncts == ["principal.pcMember == resource.area"]


def test_identical(demo_policy):
    assert diff_policies(demo_policy, demo_policy) == []
