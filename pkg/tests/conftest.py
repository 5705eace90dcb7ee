"""Shared fixtures: the motivating example inputs and the shipped studies."""

from __future__ import annotations

from pathlib import Path

import pytest

from policy_tighten.cedar.entities import parse_entities
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.schema import parse_schema
from policy_tighten.evaluation.spec import load_study
from policy_tighten.logs.access_log import parse_log

from oracles import LIBRARY_SCHEMA

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "demo" / "motivating"


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture(scope="session")
def demo_schema():
    return parse_schema((DEMO_DIR / "schema.cedarschema").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def demo_policy(demo_schema):
    return parse_policy((DEMO_DIR / "policy.cedar").read_text(encoding="utf-8"), demo_schema)


@pytest.fixture(scope="session")
def demo_store(demo_schema):
    return parse_entities((DEMO_DIR / "entities.yaml").read_text(encoding="utf-8"), demo_schema)


@pytest.fixture(scope="session")
def demo_log(demo_schema):
    return parse_log((DEMO_DIR / "log.jsonl").read_text(encoding="utf-8"), demo_schema)


@pytest.fixture(scope="session")
def library_schema():
    return parse_schema(LIBRARY_SCHEMA, "library.cedarschema")


@pytest.fixture(scope="session")
def classroom():
    return load_study("classroom")


@pytest.fixture(scope="session")
def conference():
    return load_study("conference")
