"""Entity store: concrete entities, schema validation and the ancestor closure."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterator

import networkx as nx
import yaml

from policy_tighten.cedar.ast import (
    INT64_MAX,
    INT64_MIN,
    AttrType,
    AttrValue,
    BoolType,
    EntityType,
    EntityUid,
    LongType,
    SetType,
    StringType,
    value_sort_key,
)
from policy_tighten.cedar.schema import Schema
from policy_tighten.errors import EntityError, ParseError

_UID_RE = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)::"((?:[^"\\]|\\.)*)"\s*$')


def parse_uid(text: str) -> EntityUid:
    """Parse `Type::"id"` into an EntityUid."""
    m = _UID_RE.match(text)
    if not m:
        raise ParseError(f'malformed entity reference {text!r} (expected Type::"id")')
    raw = m.group(2).replace('\\"', '"').replace("\\\\", "\\")
    return EntityUid(m.group(1), raw)


@dataclass(frozen=True)
class Entity:
    uid: EntityUid
    attrs: dict[str, AttrValue] = field(default_factory=dict)
    parents: frozenset[EntityUid] = frozenset()


class EntityStore:
    """Entities keyed by uid, with the reflexive-transitive ancestor relation.

    Treated as immutable once built; the closure and the interned integer
    ids are computed eagerly in the constructor.
    """

    def __init__(self, entities: dict[EntityUid, Entity] | None = None) -> None:
        self.entities: dict[EntityUid, Entity] = dict(entities or {})
        self.ancestors: dict[EntityUid, frozenset[EntityUid]] = _ancestor_closure(self.entities)
        self.index: dict[EntityUid, int] = {
            uid: i for i, uid in enumerate(sorted(self.entities))
        }
        by_type: dict[str, list[EntityUid]] = {}
        for uid in sorted(self.entities):
            by_type.setdefault(uid.type, []).append(uid)
        self._by_type = by_type

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, uid: object) -> bool:
        return uid in self.entities

    def __iter__(self) -> Iterator[Entity]:
        for uid in sorted(self.entities):
            yield self.entities[uid]

    def get(self, uid: EntityUid) -> Entity | None:
        return self.entities.get(uid)

    def uids_of_type(self, type_name: str) -> list[EntityUid]:
        return self._by_type.get(type_name, [])

    def types(self) -> list[str]:
        return sorted(self._by_type)

    def in_closure(self, descendant: EntityUid, ancestor: EntityUid) -> bool:
        ancestors = self.ancestors.get(descendant)
        if ancestors is None:
            return descendant == ancestor
        return ancestor in ancestors

    def closure_pairs(self) -> Iterator[tuple[EntityUid, EntityUid]]:
        for uid in sorted(self.ancestors):
            for anc in sorted(self.ancestors[uid]):
                yield uid, anc

    def subset_of(self, other: "EntityStore") -> bool:
        """Every entity here appears, identically, in `other`."""
        return all(other.entities.get(uid) == ent for uid, ent in self.entities.items())


def _ancestor_closure(entities: dict[EntityUid, Entity]) -> dict[EntityUid, frozenset[EntityUid]]:
    graph = nx.DiGraph()
    graph.add_nodes_from(entities)
    for ent in entities.values():
        for parent in ent.parents:
            graph.add_edge(ent.uid, parent)
    return {
        uid: frozenset(nx.descendants(graph, uid)) | {uid}
        for uid in entities
    }


# --- validation ---


def check_value(value: Any, attr_type: AttrType, where: str) -> AttrValue:
    """Decode a document value against its declared type."""
    if isinstance(attr_type, BoolType):
        if not isinstance(value, bool):
            raise EntityError(f"{where}: expected Bool, got {value!r}")
        return value
    if isinstance(attr_type, LongType):
        if isinstance(value, bool) or not isinstance(value, int):
            raise EntityError(f"{where}: expected Long, got {value!r}")
        if not INT64_MIN <= value <= INT64_MAX:
            raise EntityError(f"{where}: {value} is outside the signed 64-bit range")
        return value
    if isinstance(attr_type, StringType):
        if not isinstance(value, str):
            raise EntityError(f"{where}: expected String, got {value!r}")
        return value
    if isinstance(attr_type, EntityType):
        uid = _decode_ref(value, attr_type.name, where)
        if uid.type != attr_type.name:
            raise EntityError(f"{where}: expected entity of type {attr_type.name}, got {uid}")
        return uid
    if isinstance(attr_type, SetType):
        if isinstance(value, frozenset):
            items = list(value)
        elif isinstance(value, (list, tuple)):
            items = list(value)
        else:
            raise EntityError(f"{where}: expected {attr_type}, got {value!r}")
        return frozenset(check_value(v, attr_type.elem, where) for v in items)
    raise EntityError(f"{where}: unsupported attribute type {attr_type}")


def _decode_ref(value: Any, default_type: str | None, where: str) -> EntityUid:
    if isinstance(value, EntityUid):
        return value
    if isinstance(value, dict):
        if set(value) != {"type", "id"}:
            raise EntityError(f"{where}: entity reference needs exactly 'type' and 'id', got {value!r}")
        return EntityUid(str(value["type"]), str(value["id"]))
    if isinstance(value, str):
        if "::" in value:
            try:
                return parse_uid(value)
            except ParseError as e:
                raise EntityError(f"{where}: {e.message}") from None
        if default_type is not None:
            return EntityUid(default_type, value)
    raise EntityError(f"{where}: malformed entity reference {value!r}")


def validate_store(store: EntityStore, schema: Schema) -> EntityStore:
    """Check every entity against its schema type; raises EntityError."""
    for ent in store:
        decl = schema.entity_types.get(ent.uid.type)
        if decl is None:
            raise EntityError(f"entity {ent.uid}: unknown entity type '{ent.uid.type}'")
        for name, attr in decl.attrs.items():
            if name not in ent.attrs:
                if not attr.optional:
                    raise EntityError(f"entity {ent.uid}: missing mandatory attribute '{name}'")
                continue
            check_value(ent.attrs[name], attr.type, f"entity {ent.uid}, attribute '{name}'")
        for name, value in ent.attrs.items():
            if name not in decl.attrs:
                raise EntityError(f"entity {ent.uid}: attribute '{name}' is not declared")
            for ref in _refs_in(value):
                if ref not in store:
                    raise EntityError(
                        f"entity {ent.uid}, attribute '{name}': dangling reference to {ref}"
                    )
        for parent in ent.parents:
            if parent.type not in decl.parents:
                raise EntityError(
                    f"entity {ent.uid}: parent {parent} has a type not allowed by the schema"
                )
            if parent not in store:
                raise EntityError(f"entity {ent.uid}: dangling parent reference to {parent}")
    return store


def _refs_in(value: AttrValue) -> Iterator[EntityUid]:
    if isinstance(value, EntityUid):
        yield value
    elif isinstance(value, frozenset):
        for v in value:
            yield from _refs_in(v)


# --- document I/O ---


def parse_entities(text: str, schema: Schema, source: str | None = None) -> EntityStore:
    """Parse an entity document (YAML or JSON list of records) and validate it."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        raise ParseError(f"malformed entity document: {e}", line, column, source) from None
    if data is None:
        data = []
    if isinstance(data, dict) and "entities" in data:
        data = data["entities"]
    if not isinstance(data, list):
        raise ParseError("entity document must be a list of entity records", source=source)

    entities: dict[EntityUid, Entity] = {}
    for i, record in enumerate(data):
        where = f"{source or '<entities>'}: record {i + 1}"
        if not isinstance(record, dict) or "uid" not in record:
            raise EntityError(f"{where}: expected a mapping with a 'uid' field")
        unknown = set(record) - {"uid", "attrs", "parents"}
        if unknown:
            raise EntityError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")
        uid = _decode_ref(record["uid"], None, where)
        decl = schema.entity_types.get(uid.type)
        if decl is None:
            raise EntityError(f"{where}: unknown entity type '{uid.type}'")
        if uid in entities:
            raise EntityError(f"{where}: duplicate entity {uid}")
        raw_attrs = record.get("attrs") or {}
        if not isinstance(raw_attrs, dict):
            raise EntityError(f"{where}: 'attrs' must be a mapping")
        attrs: dict[str, AttrValue] = {}
        for name, value in raw_attrs.items():
            attr = decl.attrs.get(name)
            if attr is None:
                raise EntityError(f"entity {uid}: attribute '{name}' is not declared")
            attrs[name] = check_value(value, attr.type, f"entity {uid}, attribute '{name}'")
        raw_parents = record.get("parents") or []
        if not isinstance(raw_parents, list):
            raise EntityError(f"{where}: 'parents' must be a list")
        parents = frozenset(_decode_ref(p, None, f"entity {uid}, parents") for p in raw_parents)
        entities[uid] = Entity(uid, attrs, parents)

    return validate_store(EntityStore(entities), schema)


def encode_value(value: AttrValue) -> Any:
    """Document form of a value (entity refs as {type, id}, sets as sorted lists)."""
    if isinstance(value, EntityUid):
        return {"type": value.type, "id": value.id}
    if isinstance(value, frozenset):
        return [encode_value(v) for v in sorted(value, key=value_sort_key)]
    return value


def dump_entities(store: EntityStore) -> str:
    """Serialize a store in the entity document format."""
    records = []
    for ent in store:
        records.append({
            "uid": {"type": ent.uid.type, "id": ent.uid.id},
            "attrs": {k: encode_value(ent.attrs[k]) for k in sorted(ent.attrs)},
            "parents": [
                {"type": p.type, "id": p.id} for p in sorted(ent.parents)
            ],
        })
    return yaml.safe_dump(records, sort_keys=False, default_flow_style=None)
