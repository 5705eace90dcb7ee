"""Schema model and the parser for the `entity` / `action` declaration grammar."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from policy_tighten.cedar.ast import (
    BOOL,
    LONG,
    STRING,
    AttrType,
    EntityType,
    SetType,
)
from policy_tighten.cedar.lexer import Token, TokenStream
from policy_tighten.errors import SchemaError

ACTION_TYPE = "Action"

_SCALAR_NAMES: dict[str, AttrType] = {
    "Bool": BOOL,
    "Boolean": BOOL,
    "Long": LONG,
    "Int": LONG,
    "String": STRING,
}


@dataclass(frozen=True)
class AttrDecl:
    type: AttrType
    optional: bool = False


@dataclass(frozen=True)
class EntityTypeDecl:
    name: str
    attrs: dict[str, AttrDecl] = field(default_factory=dict)
    parents: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ActionDecl:
    name: str
    principal_types: frozenset[str] = frozenset()
    resource_types: frozenset[str] = frozenset()
    context_attrs: dict[str, AttrDecl] = field(default_factory=dict)


@dataclass
class Schema:
    entity_types: dict[str, EntityTypeDecl] = field(default_factory=dict)
    actions: dict[str, ActionDecl] = field(default_factory=dict)

    def attr(self, type_name: str, attr: str) -> AttrDecl | None:
        decl = self.entity_types.get(type_name)
        if decl is None:
            return None
        return decl.attrs.get(attr)

    def action_names(self) -> list[str]:
        return sorted(self.actions)

    @cached_property
    def _ancestor_types(self) -> dict[str, frozenset[str]]:
        closure: dict[str, frozenset[str]] = {}
        for name in self.entity_types:
            seen: set[str] = set()
            stack = list(self.entity_types[name].parents)
            while stack:
                t = stack.pop()
                if t in seen:
                    continue
                seen.add(t)
                decl = self.entity_types.get(t)
                if decl is not None:
                    stack.extend(decl.parents)
            closure[name] = frozenset(seen)
        return closure

    def ancestor_types(self, type_name: str) -> frozenset[str]:
        """Types that can appear strictly above `type_name` in the hierarchy."""
        return self._ancestor_types.get(type_name, frozenset())

    def may_descend(self, child_type: str, ancestor_type: str) -> bool:
        """True if an entity of `child_type` can be `in` one of `ancestor_type`."""
        return child_type == ancestor_type or ancestor_type in self.ancestor_types(child_type)

    def validate(self) -> "Schema":
        for decl in self.entity_types.values():
            for parent in decl.parents:
                if parent not in self.entity_types:
                    raise SchemaError(
                        f"entity type '{decl.name}' declares unknown parent type '{parent}'"
                    )
            for attr_name, attr in decl.attrs.items():
                self._check_type(attr.type, f"attribute '{decl.name}.{attr_name}'")
        for action in self.actions.values():
            for t in action.principal_types | action.resource_types:
                if t not in self.entity_types:
                    raise SchemaError(f"action '{action.name}' applies to unknown type '{t}'")
            for attr_name, attr in action.context_attrs.items():
                self._check_type(attr.type, f"context attribute '{action.name}.{attr_name}'")
        return self

    def _check_type(self, t: AttrType, where: str) -> None:
        if isinstance(t, SetType):
            self._check_type(t.elem, where)
        elif isinstance(t, EntityType) and t.name not in self.entity_types:
            raise SchemaError(f"{where} references unknown entity type '{t.name}'")


class _SchemaParser:
    def __init__(self, text: str, source: str | None) -> None:
        self.ts = TokenStream(text, source)
        self.schema = Schema()

    def parse(self) -> Schema:
        while not self.ts.at_eof():
            if self.ts.check("entity", "IDENT"):
                self._entity()
            elif self.ts.check("action", "IDENT"):
                self._action()
            else:
                self.ts.error(f"expected 'entity' or 'action', found {self.ts.current.describe()}")
        return self.schema

    def _names(self, what: str) -> list[tuple[Token, str]]:
        names = [(self.ts.current, self.ts.expect_name(what))]
        while self.ts.accept(","):
            names.append((self.ts.current, self.ts.expect_name(what)))
        return names

    def _type_list(self) -> frozenset[str]:
        if self.ts.accept("["):
            names: list[str] = []
            if not self.ts.check("]"):
                names.append(self.ts.expect_name("entity type"))
                while self.ts.accept(","):
                    if self.ts.check("]"):
                        break
                    names.append(self.ts.expect_name("entity type"))
            self.ts.expect("]")
            return frozenset(names)
        return frozenset([self.ts.expect_name("entity type")])

    def _entity(self) -> None:
        self.ts.expect("entity")
        names = self._names("entity type name")
        parents: frozenset[str] = frozenset()
        if self.ts.accept("in"):
            parents = self._type_list()
        attrs: dict[str, AttrDecl] = {}
        self.ts.accept("=")
        if self.ts.check("{"):
            attrs = self._record(allow_sets=True)
        self.ts.expect(";")
        for tok, name in names:
            if name == ACTION_TYPE:
                self.ts.error(f"'{ACTION_TYPE}' is reserved for actions", tok)
            if name in self.schema.entity_types:
                self.ts.error(f"duplicate entity type '{name}'", tok)
            self.schema.entity_types[name] = EntityTypeDecl(name, dict(attrs), parents)

    def _record(self, allow_sets: bool) -> dict[str, AttrDecl]:
        self.ts.expect("{")
        attrs: dict[str, AttrDecl] = {}
        while not self.ts.check("}"):
            tok = self.ts.current
            name = self.ts.expect_name("attribute name")
            optional = self.ts.accept("?")
            self.ts.expect(":")
            attr_type = self._type(allow_sets)
            if name in attrs:
                self.ts.error(f"duplicate attribute '{name}'", tok)
            attrs[name] = AttrDecl(attr_type, optional)
            if not self.ts.accept(","):
                break
        self.ts.expect("}")
        return attrs

    def _type(self, allow_sets: bool) -> AttrType:
        tok = self.ts.current
        if self.ts.check("{"):
            self.ts.error("record-typed attributes are not supported")
        name = self.ts.expect_name("type")
        if name == "Set" and self.ts.check("<"):
            if not allow_sets:
                self.ts.error("set-typed context attributes are not supported", tok)
            self.ts.expect("<")
            elem = self._type(allow_sets)
            if isinstance(elem, SetType):
                self.ts.error("nested sets are not supported", tok)
            self.ts.expect(">")
            return SetType(elem)
        if name in _SCALAR_NAMES:
            return _SCALAR_NAMES[name]
        return EntityType(name)

    def _action(self) -> None:
        self.ts.expect("action")
        names = self._names("action name")
        if self.ts.check("in", "IDENT"):
            self.ts.error("action groups in the schema are not supported")
        principals: frozenset[str] = frozenset()
        resources: frozenset[str] = frozenset()
        context: dict[str, AttrDecl] = {}
        if self.ts.accept("appliesTo"):
            self.ts.expect("{")
            seen: set[str] = set()
            while not self.ts.check("}"):
                tok = self.ts.current
                key = self.ts.expect_name("'principal', 'resource' or 'context'")
                if key in seen:
                    self.ts.error(f"duplicate '{key}' in appliesTo", tok)
                seen.add(key)
                self.ts.expect(":")
                if key == "principal":
                    principals = self._type_list()
                elif key == "resource":
                    resources = self._type_list()
                elif key == "context":
                    context = self._record(allow_sets=False)
                else:
                    self.ts.error(f"unexpected '{key}' in appliesTo", tok)
                if not self.ts.accept(","):
                    break
            self.ts.expect("}")
        self.ts.expect(";")
        for tok, name in names:
            if name in self.schema.actions:
                self.ts.error(f"duplicate action '{name}'", tok)
            self.schema.actions[name] = ActionDecl(name, principals, resources, dict(context))


def parse_schema(text: str, source: str | None = None) -> Schema:
    """Parse and validate a schema document."""
    return _SchemaParser(text, source).parse().validate()
