"""Per-rule structural policy diff using deepdiff."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

from deepdiff import DeepDiff

from policy_tighten.cedar.ast import Policy, Rule, flatten_and
from policy_tighten.cedar.printer import expr_key, format_scope


@dataclass
class FieldChange:
    path: str
    old_value: Any
    new_value: Any
    change_type: str  # "value_changed", "item_added", "item_removed", "type_changed"


@dataclass
class ChangeRecord:
    rule_id: str
    effect: str
    status: Literal["added", "removed", "changed"]
    changes: list[FieldChange] = field(default_factory=list)

    @property
    def added_conjuncts(self) -> list[str]:
        return [
            c.new_value for c in self.changes
            if c.change_type == "item_added" and c.path.startswith("conjuncts")
        ]

    @property
    def removed_conjuncts(self) -> list[str]:
        return [
            c.old_value for c in self.changes
            if c.change_type == "item_removed" and c.path.startswith("conjuncts")
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "effect": self.effect,
            "status": self.status,
            "added_conjuncts": self.added_conjuncts,
            "removed_conjuncts": self.removed_conjuncts,
            "changes": [
                {
                    "path": c.path,
                    "type": c.change_type,
                    "old": c.old_value,
                    "new": c.new_value,
                }
                for c in self.changes
            ],
        }


def rule_body(rule: Rule) -> dict[str, Any]:
    """Comparable view of a rule: scope text plus printed top-level conjuncts."""
    conjuncts = [] if rule.body is None else [expr_key(c) for c in flatten_and(rule.body)]
    return {
        "effect": rule.effect.value,
        "scope": format_scope(rule),
        "conjuncts": conjuncts,
    }


def compute_diff(old: Rule | None, new: Rule | None) -> ChangeRecord | None:
    """Compute diff for a single rule pair.

    Returns None for unchanged rules. Conjuncts are compared as a multiset.
    """
    if old is None and new is None:
        return None

    if old is None:
        assert new is not None
        return ChangeRecord(rule_id=new.id, effect=new.effect.value, status="added")

    if new is None:
        return ChangeRecord(rule_id=old.id, effect=old.effect.value, status="removed")

    dd = DeepDiff(rule_body(old), rule_body(new), ignore_order=True, verbose_level=2)
    changes = _extract_changes(dd)
    if not changes:
        return None

    return ChangeRecord(
        rule_id=old.id,
        effect=old.effect.value,
        status="changed",
        changes=changes,
    )


def _extract_changes(dd: DeepDiff) -> list[FieldChange]:
    """Convert DeepDiff output to FieldChange list."""
    changes: list[FieldChange] = []

    for path, detail in dd.get("values_changed", {}).items():
        changes.append(FieldChange(
            path=_deepdiff_path_to_dot(path),
            old_value=detail.get("old_value"),
            new_value=detail.get("new_value"),
            change_type="value_changed",
        ))

    for path, detail in dd.get("type_changes", {}).items():
        changes.append(FieldChange(
            path=_deepdiff_path_to_dot(path),
            old_value=detail.get("old_value"),
            new_value=detail.get("new_value"),
            change_type="type_changed",
        ))

    for path, value in dd.get("iterable_item_added", {}).items():
        changes.append(FieldChange(
            path=_deepdiff_path_to_dot(path),
            old_value=None,
            new_value=value,
            change_type="item_added",
        ))

    for path, value in dd.get("iterable_item_removed", {}).items():
        changes.append(FieldChange(
            path=_deepdiff_path_to_dot(path),
            old_value=value,
            new_value=None,
            change_type="item_removed",
        ))

    changes.sort(key=lambda c: (c.change_type, c.path))
    return changes


def _deepdiff_path_to_dot(path: str) -> str:
    """Convert DeepDiff path like root['conjuncts'][1] to conjuncts[1]."""
    path = path.replace("root", "", 1)
    result = ""
    i = 0
    while i < len(path):
        if path[i] == "[":
            end = path.index("]", i)
            inner = path[i + 1 : end]
            if inner.startswith("'") or inner.startswith('"'):
                key = inner.strip("'\"")
                if result:
                    result += "."
                result += key
            else:
                result += f"[{inner}]"
            i = end + 1
        else:
            i += 1
    return result


def diff_policies(old: Policy, new: Policy) -> list[ChangeRecord]:
    """Diff rules matched by id, in the old policy's order, then rules only in `new`."""
    new_by_id = {r.id: r for r in new.rules}
    old_ids = set(old.ids())
    results: list[ChangeRecord] = []
    for rule in old.rules:
        record = compute_diff(rule, new_by_id.get(rule.id))
        if record is not None:
            results.append(record)
    for rule in new.rules:
        if rule.id not in old_ids:
            record = compute_diff(None, rule)
            if record is not None:
                results.append(record)
    return results
