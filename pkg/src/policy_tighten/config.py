"""Defaults, tunables and the configuration records built from CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, field

from policy_tighten.errors import ConfigError

# Tightening loop
DEFAULT_MAX_FAILURES = 2
DEFAULT_TARGETS_PER_ITERATION = 3

# Candidate enumeration
DEFAULT_CHAIN_DEPTH = 2
DEFAULT_MAX_CANDIDATES = 50_000

# Materialized request sets (POP, denotations) abort beyond this many requests
DEFAULT_POP_CAP = 1_000_000

DEFAULT_SEED = 0

# Worker count override for parallel mode; never affects results
WORKERS_ENV_VAR = "POLICY_TIGHTEN_WORKERS"

ALL_KINDS: frozenset[str] = frozenset({
    "equality",
    "inequality",
    "constEquality",
    "has",
    "is",
    "negatedAtom",
    "intComparison",
    "hierarchyMembership",
    "setMembership",
})

# Study table columns, in output order
STUDY_COLUMNS = (
    "seed",
    "size",
    "density",
    "rule_id",
    "exactRecovery",
    "overPrivRemaining",
    "intendedRemoved",
    "medianTimeMs",
)


def parse_kinds(text: str | None) -> frozenset[str]:
    """Parse a comma-separated `--kinds` value; empty or None means all kinds."""
    if text is None or text.strip().lower() in ("", "all"):
        return ALL_KINDS
    if text.strip().lower() == "none":
        return frozenset()
    kinds = frozenset(k.strip() for k in text.split(",") if k.strip())
    unknown = kinds - ALL_KINDS
    if unknown:
        raise ConfigError(
            f"unknown candidate kind(s): {', '.join(sorted(unknown))} "
            f"(known: {', '.join(sorted(ALL_KINDS))})"
        )
    return kinds


@dataclass(frozen=True)
class EnumConfig:
    chain_depth: int = DEFAULT_CHAIN_DEPTH
    constants_from_store: bool = True
    enabled_kinds: frozenset[str] = field(default=ALL_KINDS)
    max_candidates: int = DEFAULT_MAX_CANDIDATES

    def validate(self) -> "EnumConfig":
        if self.chain_depth < 1:
            raise ConfigError(f"chain depth must be >= 1, got {self.chain_depth}")
        if self.max_candidates < 1:
            raise ConfigError(f"max candidates must be >= 1, got {self.max_candidates}")
        unknown = set(self.enabled_kinds) - ALL_KINDS
        if unknown:
            raise ConfigError(f"unknown candidate kind(s): {', '.join(sorted(unknown))}")
        return self


@dataclass(frozen=True)
class TightenConfig:
    max_failures: int = DEFAULT_MAX_FAILURES
    targets_per_iteration: int = DEFAULT_TARGETS_PER_ITERATION
    chain_depth: int = DEFAULT_CHAIN_DEPTH
    seed: int = DEFAULT_SEED
    pop_cap: int = DEFAULT_POP_CAP
    enabled_kinds: frozenset[str] = field(default=ALL_KINDS)
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    parallel: bool = False
    allow_inconsistent: bool = False

    def validate(self) -> "TightenConfig":
        if self.max_failures < 1:
            raise ConfigError(f"max failures must be >= 1, got {self.max_failures}")
        if self.targets_per_iteration < 1:
            raise ConfigError(
                f"targets per iteration must be >= 1, got {self.targets_per_iteration}"
            )
        if self.pop_cap < 1:
            raise ConfigError(f"pop cap must be >= 1, got {self.pop_cap}")
        self.enum_config().validate()
        return self

    def enum_config(self) -> EnumConfig:
        return EnumConfig(
            chain_depth=self.chain_depth,
            enabled_kinds=self.enabled_kinds,
            max_candidates=self.max_candidates,
        )
