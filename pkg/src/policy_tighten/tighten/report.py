"""Data classes for tightening results."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from policy_tighten.cedar.ast import Request


class Termination(str, Enum):
    POP_EMPTY = "popEmpty"
    FAILURE_BUDGET = "failureBudget"


@dataclass
class IterationRecord:
    """One call of the single-conjunct search for a rule."""

    index: int
    targets: list[Request]
    found: bool
    conjunct: str | None = None
    kind: str | None = None
    examined: int = 0
    pop_before: int = 0
    pop_after: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "targets": [str(t) for t in self.targets],
            "outcome": "found" if self.found else "failure",
            "conjunct": self.conjunct,
            "kind": self.kind,
            "examined": self.examined,
            "pop_before": self.pop_before,
            "pop_after": self.pop_after,
        }


@dataclass
class RuleReport:
    rule_id: str
    slice_size: int = 0
    candidates: int = 0
    pop_initial: int = 0
    pop_final: int = 0
    termination: Termination = Termination.POP_EMPTY
    failures: int = 0
    iterations: list[IterationRecord] = field(default_factory=list)
    added: list[str] = field(default_factory=list)
    simplified: bool = False
    wall_time_ms: float = 0.0

    @property
    def accepted(self) -> int:
        return sum(1 for it in self.iterations if it.found)

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        result: dict[str, Any] = {
            "rule_id": self.rule_id,
            "slice_size": self.slice_size,
            "candidates": self.candidates,
            "pop_initial": self.pop_initial,
            "pop_final": self.pop_final,
            "termination": self.termination.value,
            "failures": self.failures,
            "accepted": self.accepted,
            "added_conjuncts": list(self.added),
            "simplified": self.simplified,
            "iterations": [it.to_dict() for it in self.iterations],
        }
        if timing:
            result["wall_time_ms"] = round(self.wall_time_ms, 3)
        return result


@dataclass
class TighteningReport:
    """Top-level container for a tightening run."""

    max_failures: int
    targets_per_iteration: int
    chain_depth: int
    seed: int
    rules: list[RuleReport] = field(default_factory=list)
    forbids: list[str] = field(default_factory=list)
    log_entries: int = 0
    violations: int = 0
    wall_time_ms: float = 0.0

    def rule(self, rule_id: str) -> RuleReport:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    @property
    def tightened(self) -> list[RuleReport]:
        return [r for r in self.rules if r.added]

    @property
    def total_iterations(self) -> int:
        return sum(len(r.iterations) for r in self.rules)

    @property
    def total_failures(self) -> int:
        return sum(r.failures for r in self.rules)

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        """Serialize for JSON output; `timing=False` gives byte-reproducible reports."""
        result: dict[str, Any] = {
            "config": {
                "max_failures": self.max_failures,
                "targets_per_iteration": self.targets_per_iteration,
                "chain_depth": self.chain_depth,
                "seed": self.seed,
            },
            "summary": {
                "permit_rules": len(self.rules),
                "tightened_rules": len(self.tightened),
                "forbid_rules": len(self.forbids),
                "iterations": self.total_iterations,
                "failures": self.total_failures,
                "log_entries": self.log_entries,
                "inconsistent_entries": self.violations,
            },
            "rules": [r.to_dict(timing) for r in self.rules],
        }
        if timing:
            result["summary"]["wall_time_ms"] = round(self.wall_time_ms, 3)
        return result
