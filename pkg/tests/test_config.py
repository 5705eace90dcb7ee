"""Configuration records and flag parsing."""

from __future__ import annotations

import pytest

from policy_tighten.config import ALL_KINDS, EnumConfig, TightenConfig, parse_kinds
from policy_tighten.errors import ConfigError


def test_defaults():
    cfg = TightenConfig().validate()
    assert cfg.max_failures == 2
    assert cfg.targets_per_iteration == 3
    assert cfg.enum_config() == EnumConfig()


@pytest.mark.parametrize("field, value", [
    ("max_failures", 0),
    ("targets_per_iteration", 0),
    ("pop_cap", 0),
    ("chain_depth", 0),
    ("max_candidates", 0),
])
def test_rejects_out_of_range(field, value):
    with pytest.raises(ConfigError):
        TightenConfig(**{field: value}).validate()


@pytest.mark.parametrize("text, expected", [
    (None, ALL_KINDS),
    ("", ALL_KINDS),
    ("all", ALL_KINDS),
    ("none", frozenset()),
    ("equality, has", frozenset({"equality", "has"})),
])
def test_parse_kinds(text, expected):
    assert parse_kinds(text) == expected


def test_parse_kinds_unknown():
    with pytest.raises(ConfigError, match="known: "):
        parse_kinds("equality,regex")
