"""Study specifications: schema, tight and loosened policies, and generator shape.

A study file is YAML. `schema`, `tight_policy` and `loose_policy` hold
Cedar text; `populations` describes how many entities of each kind exist at
a given size and how their attributes and parents are drawn.

    populations:
      - name: papers
        type: Paper
        count: {base: 0, per_size: 5}
        attrs:
          area: {kind: ref, population: areas}
          authors: {kind: set, population: authors, min: 1, max: 3}
          decided: {kind: bool, p: 0.5}
        parents: []

Attribute generator kinds: `const` (value), `bool` (p), `int` (min, max),
`choice` (values), `ref` (population), `set` (population, min, max). Any
generator may carry `present` (probability, optional attributes only).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from policy_tighten.cedar.ast import (
    EntityType,
    Expr,
    Or,
    Policy,
    Rule,
    SetType,
    flatten_and,
)
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.printer import expr_key, format_scope
from policy_tighten.cedar.schema import Schema, parse_schema
from policy_tighten.errors import ConfigError

logger = logging.getLogger(__name__)

GENERATOR_KINDS = ("const", "bool", "int", "choice", "ref", "set")
DEFAULT_DENIED_RATE = 0.05


@dataclass(frozen=True)
class AttrGen:
    kind: str
    value: Any = None
    p: float = 0.5
    low: int = 0
    high: int = 0
    values: tuple[Any, ...] = ()
    population: str | None = None
    present: float = 1.0


@dataclass(frozen=True)
class ParentGen:
    population: str
    low: int = 1
    high: int = 1


@dataclass(frozen=True)
class Population:
    name: str
    type: str
    prefix: str
    base: int = 0
    per_size: float = 0.0
    attrs: dict[str, AttrGen] = field(default_factory=dict)
    parents: tuple[ParentGen, ...] = ()

    def count_at(self, size: int) -> int:
        return self.base + int(self.per_size * size)

    def birth_size(self, index: int) -> int:
        """Smallest size >= 1 at which entity `index` exists."""
        size = 1
        while self.count_at(size) <= index:
            if self.per_size <= 0:
                raise ConfigError(f"population '{self.name}' never reaches index {index}")
            size += 1
        return size


@dataclass
class StudySpec:
    name: str
    schema: Schema
    schema_text: str
    tight: Policy
    tight_text: str
    loose: Policy
    loose_text: str
    populations: list[Population]
    denied_rate: float = DEFAULT_DENIED_RATE
    description: str = ""

    @property
    def loosened(self) -> list[str]:
        """Ids of rules whose loose body differs from the tight one."""
        return [
            rule.id for rule in self.loose.rules
            if _body_key(rule) != _body_key(self.tight.get(rule.id))
        ]

    def population(self, name: str) -> Population:
        for p in self.populations:
            if p.name == name:
                return p
        raise KeyError(name)


def _body_key(rule: Rule) -> str | None:
    return None if rule.body is None else expr_key(rule.body)


def is_weakening(loose: Expr | None, tight: Expr | None) -> bool:
    """Syntactic check that `loose` only drops conjuncts from `tight`."""
    if loose is None:
        return True
    if tight is None:
        return False
    if expr_key(loose) == expr_key(tight):
        return True
    if isinstance(loose, Or) and isinstance(tight, Or):
        return is_weakening(loose.left, tight.left) and is_weakening(loose.right, tight.right)
    tight_parts = flatten_and(tight)
    if len(tight_parts) < 2:
        return False
    return all(
        any(is_weakening(part, t) for t in tight_parts)
        for part in flatten_and(loose)
    )


# --- parsing ---


def _require(data: dict, key: str, where: str) -> Any:
    if key not in data:
        raise ConfigError(f"{where}: missing '{key}'")
    return data[key]


def _parse_gen(raw: Any, where: str) -> AttrGen:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: generator must be a mapping")
    kind = _require(raw, "kind", where)
    if kind not in GENERATOR_KINDS:
        raise ConfigError(f"{where}: unknown generator kind '{kind}'")
    present = float(raw.get("present", 1.0))
    if not 0.0 <= present <= 1.0:
        raise ConfigError(f"{where}: 'present' must lie in [0, 1]")
    if kind == "const":
        return AttrGen(kind, value=_require(raw, "value", where), present=present)
    if kind == "bool":
        return AttrGen(kind, p=float(raw.get("p", 0.5)), present=present)
    if kind == "int":
        low, high = int(_require(raw, "min", where)), int(_require(raw, "max", where))
        if low > high:
            raise ConfigError(f"{where}: min exceeds max")
        return AttrGen(kind, low=low, high=high, present=present)
    if kind == "choice":
        values = tuple(_require(raw, "values", where))
        if not values:
            raise ConfigError(f"{where}: 'values' must not be empty")
        return AttrGen(kind, values=values, present=present)
    population = str(_require(raw, "population", where))
    if kind == "ref":
        return AttrGen(kind, population=population, present=present)
    low, high = int(raw.get("min", 0)), int(raw.get("max", 1))
    if low < 0 or low > high:
        raise ConfigError(f"{where}: set sizes must satisfy 0 <= min <= max")
    return AttrGen(kind, population=population, low=low, high=high, present=present)


def _parse_population(raw: Any, index: int) -> Population:
    where = f"populations[{index}]"
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: must be a mapping")
    name = str(_require(raw, "name", where))
    count = raw.get("count") or {}
    if not isinstance(count, dict):
        raise ConfigError(f"{where}: 'count' must be a mapping with base/per_size")
    attrs = {
        str(attr): _parse_gen(gen, f"{where}.attrs.{attr}")
        for attr, gen in (raw.get("attrs") or {}).items()
    }
    parents = []
    for j, p in enumerate(raw.get("parents") or []):
        pw = f"{where}.parents[{j}]"
        if not isinstance(p, dict):
            raise ConfigError(f"{pw}: must be a mapping")
        low, high = int(p.get("min", 1)), int(p.get("max", p.get("min", 1)))
        if low < 0 or low > high:
            raise ConfigError(f"{pw}: parent counts must satisfy 0 <= min <= max")
        parents.append(ParentGen(str(_require(p, "population", pw)), low, high))
    pop = Population(
        name=name,
        type=str(_require(raw, "type", where)),
        prefix=str(raw.get("prefix", name)),
        base=int(count.get("base", 0)),
        per_size=float(count.get("per_size", 0)),
        attrs=attrs,
        parents=tuple(parents),
    )
    if pop.base < 0 or pop.per_size < 0:
        raise ConfigError(f"{where}: counts must be non-negative")
    return pop


def _check_populations(spec: StudySpec) -> None:
    names = [p.name for p in spec.populations]
    if len(set(names)) != len(names):
        raise ConfigError(f"study '{spec.name}': duplicate population names")
    by_name = {p.name: p for p in spec.populations}
    for pop in spec.populations:
        decl = spec.schema.entity_types.get(pop.type)
        if decl is None:
            raise ConfigError(f"population '{pop.name}': unknown entity type '{pop.type}'")
        for attr, attr_decl in decl.attrs.items():
            gen = pop.attrs.get(attr)
            if gen is None:
                if not attr_decl.optional:
                    raise ConfigError(
                        f"population '{pop.name}': no generator for required attribute '{attr}'"
                    )
                continue
            if gen.present < 1.0 and not attr_decl.optional:
                raise ConfigError(
                    f"population '{pop.name}': attribute '{attr}' is required but 'present' < 1"
                )
            if gen.kind in ("ref", "set"):
                target = by_name.get(gen.population or "")
                if target is None:
                    raise ConfigError(
                        f"population '{pop.name}': attribute '{attr}' references unknown "
                        f"population '{gen.population}'"
                    )
                want = attr_decl.type.elem if isinstance(attr_decl.type, SetType) else attr_decl.type
                if not isinstance(want, EntityType) or want.name != target.type:
                    raise ConfigError(
                        f"population '{pop.name}': attribute '{attr}' expects {attr_decl.type}, "
                        f"population '{target.name}' holds {target.type}"
                    )
        for attr in pop.attrs:
            if attr not in decl.attrs:
                raise ConfigError(f"population '{pop.name}': '{pop.type}' has no attribute '{attr}'")
        for parent in pop.parents:
            target = by_name.get(parent.population)
            if target is None:
                raise ConfigError(
                    f"population '{pop.name}': unknown parent population '{parent.population}'"
                )
            if target.type not in decl.parents:
                raise ConfigError(
                    f"population '{pop.name}': '{pop.type}' cannot have '{target.type}' parents"
                )


def _check_policies(spec: StudySpec) -> None:
    if spec.tight.ids() != spec.loose.ids():
        raise ConfigError(f"study '{spec.name}': tight and loose policies must list the same rules")
    for loose in spec.loose.rules:
        tight = spec.tight.get(loose.id)
        if loose.effect is not tight.effect or format_scope(loose) != format_scope(tight):
            raise ConfigError(f"study '{spec.name}': rule {loose.id} changes effect or scope")
        if not is_weakening(loose.body, tight.body):
            raise ConfigError(
                f"study '{spec.name}': rule {loose.id} is not a weakening of its tight version"
            )
    if not spec.loosened:
        logger.warning("study '%s' loosens no rule", spec.name)


def parse_study(text: str, source: str | None = None) -> StudySpec:
    """Parse and validate a study document."""
    where = source or "<study>"
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{where}: invalid YAML: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: study must be a mapping")
    schema_text = str(_require(data, "schema", where))
    tight_text = str(_require(data, "tight_policy", where))
    loose_text = str(_require(data, "loose_policy", where))
    schema = parse_schema(schema_text, f"{where}#schema")
    spec = StudySpec(
        name=str(data.get("name", Path(where).stem)),
        schema=schema,
        schema_text=schema_text,
        tight=parse_policy(tight_text, schema, f"{where}#tight_policy"),
        tight_text=tight_text,
        loose=parse_policy(loose_text, schema, f"{where}#loose_policy"),
        loose_text=loose_text,
        populations=[
            _parse_population(p, i) for i, p in enumerate(_require(data, "populations", where))
        ],
        denied_rate=float(data.get("denied_rate", DEFAULT_DENIED_RATE)),
        description=str(data.get("description", "")).strip(),
    )
    if not 0.0 <= spec.denied_rate <= 1.0:
        raise ConfigError(f"{where}: 'denied_rate' must lie in [0, 1]")
    _check_populations(spec)
    _check_policies(spec)
    return spec


def shipped_studies() -> list[str]:
    root = resources.files("policy_tighten.studies")
    return sorted(
        entry.name[: -len(".yaml")]
        for entry in root.iterdir()
        if entry.name.endswith(".yaml")
    )


def load_study(name_or_path: str) -> StudySpec:
    """Load a shipped study by name, or a study file by path."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.is_file():
            raise ConfigError(f"study file not found: {name_or_path}")
        return parse_study(path.read_text(encoding="utf-8"), str(path))
    entry = resources.files("policy_tighten.studies") / f"{name_or_path}.yaml"
    if not entry.is_file():
        raise ConfigError(
            f"unknown study '{name_or_path}' (shipped: {', '.join(shipped_studies())})"
        )
    return parse_study(entry.read_text(encoding="utf-8"), f"{name_or_path}.yaml")
