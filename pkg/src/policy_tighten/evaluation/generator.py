"""Seeded dataset families: nested entity stores and access logs indexed by size.

Every entity is a pure function of (seed, population, index): its attribute
values and parents are drawn from a generator seeded by those three, and
references only point at entities that already exist at the size where the
entity first appears. A smaller member is therefore contained in every larger
one. Log entries use per-request hash coins, so the same request gets the
same verdict in every member that contains it.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from policy_tighten.analysis.request_space import enumerate_requests
from policy_tighten.cedar.ast import Decision, EntityUid
from policy_tighten.cedar.entities import Entity, EntityStore, dump_entities, validate_store
from policy_tighten.cedar.evaluator import compile_policy
from policy_tighten.errors import ConfigError, InfeasibleDensityError
from policy_tighten.evaluation.spec import AttrGen, Population, StudySpec
from policy_tighten.logs.access_log import AccessLog, dump_log

logger = logging.getLogger(__name__)


@dataclass
class FamilyMember:
    size: int
    store: EntityStore
    log: AccessLog
    intended: int = 0  # requests the tight policy allows on this store

    @property
    def allowed(self) -> int:
        return self.log.count(Decision.ALLOWED)

    @property
    def denied(self) -> int:
        return self.log.count(Decision.DENIED)


@dataclass
class DatasetFamily:
    study: str
    seed: int
    density: int
    members: list[FamilyMember] = field(default_factory=list)

    def member(self, size: int) -> FamilyMember:
        for m in self.members:
            if m.size == size:
                return m
        raise KeyError(size)


def coin(seed: int, *parts: object) -> float:
    """Uniform value in [0, 1) derived from the seed and `parts` only."""
    text = "\x00".join(str(p) for p in (seed, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _uid(pop: Population, index: int) -> EntityUid:
    return EntityUid(pop.type, f"{pop.prefix}{index}")


class _StoreBuilder:
    def __init__(self, spec: StudySpec, seed: int) -> None:
        self.spec = spec
        self.seed = seed
        self.by_name = {p.name: p for p in spec.populations}

    def pool(self, population: str, size: int) -> list[EntityUid]:
        pop = self.by_name[population]
        return [_uid(pop, j) for j in range(pop.count_at(size))]

    def draw(self, gen: AttrGen, rng: random.Random, birth: int, where: str) -> Any:
        if gen.kind == "const":
            return gen.value
        if gen.kind == "bool":
            return rng.random() < gen.p
        if gen.kind == "int":
            return rng.randint(gen.low, gen.high)
        if gen.kind == "choice":
            return rng.choice(list(gen.values))
        pool = self.pool(gen.population or "", birth)
        if gen.kind == "ref":
            if not pool:
                raise ConfigError(f"{where}: population '{gen.population}' is empty at size {birth}")
            return rng.choice(pool)
        k = rng.randint(gen.low, gen.high)
        return frozenset(rng.sample(pool, min(k, len(pool))))

    def entity(self, pop: Population, index: int) -> Entity:
        uid = _uid(pop, index)
        birth = pop.birth_size(index)
        decl = self.spec.schema.entity_types[pop.type]
        attrs: dict[str, Any] = {}
        for name in sorted(pop.attrs):
            gen = pop.attrs[name]
            rng = random.Random(f"{self.seed}/{pop.name}/{index}/{name}")
            if gen.present < 1.0 and rng.random() >= gen.present:
                continue
            if gen.kind == "ref" and not self.pool(gen.population or "", birth) \
                    and decl.attrs[name].optional:
                continue
            attrs[name] = self.draw(gen, rng, birth, f"{uid}.{name}")
        parents: set[EntityUid] = set()
        for j, parent in enumerate(pop.parents):
            rng = random.Random(f"{self.seed}/{pop.name}/{index}/parents/{j}")
            pool = self.pool(parent.population, birth)
            k = rng.randint(parent.low, parent.high)
            parents.update(rng.sample(pool, min(k, len(pool))))
        return Entity(uid, attrs, frozenset(parents))

    def build(self, size: int) -> EntityStore:
        entities: dict[EntityUid, Entity] = {}
        for pop in self.spec.populations:
            for index in range(pop.count_at(size)):
                ent = self.entity(pop, index)
                if ent.uid in entities:
                    raise ConfigError(f"populations produce the entity {ent.uid} twice")
                entities[ent.uid] = ent
        return validate_store(EntityStore(entities), self.spec.schema)


def build_store(spec: StudySpec, seed: int, size: int) -> EntityStore:
    return _StoreBuilder(spec, seed).build(size)


def build_log(spec: StudySpec, seed: int, store: EntityStore,
              density: int) -> tuple[AccessLog, int]:
    """Log over the request universe and the number of intended privileges.

    Allowed entries: requests the tight policy allows, each kept with
    probability density/100. Denied entries: requests the loose policy
    denies, each kept with the study's denied rate.
    """
    tight = compile_policy(spec.tight)
    loose = compile_policy(spec.loose)
    threshold = density / 100.0
    log = AccessLog()
    intended = 0
    for req in enumerate_requests(spec.schema, store):
        if tight(req, store) is Decision.ALLOWED:
            intended += 1
            if coin(seed, "allow", req) < threshold:
                log.add(req, Decision.ALLOWED)
        elif loose(req, store) is Decision.DENIED:
            if coin(seed, "deny", req) < spec.denied_rate:
                log.add(req, Decision.DENIED)
    return log, intended


def generate_family(spec: StudySpec, seed: int, sizes: list[int],
                    density: int) -> DatasetFamily:
    """One member per size; members nest by construction."""
    if not 0 <= density <= 100:
        raise ConfigError(f"density must lie in [0, 100], got {density}")
    if not sizes or any(s < 1 for s in sizes) or list(sizes) != sorted(set(sizes)):
        raise ConfigError(f"sizes must be distinct, positive and ascending, got {sizes}")

    builder = _StoreBuilder(spec, seed)
    family = DatasetFamily(spec.name, seed, density)
    for size in sizes:
        store = builder.build(size)
        log, intended = build_log(spec, seed, store, density)
        if density > 0 and intended == 0:
            raise InfeasibleDensityError(
                f"study '{spec.name}', seed {seed}, size {size}: the tight policy allows "
                f"no request, so a {density}% log density cannot be met"
            )
        logger.debug("study %s seed %d size %d: %d entities, %d allowed / %d denied entries",
                     spec.name, seed, size, len(store), log.count(Decision.ALLOWED),
                     log.count(Decision.DENIED))
        family.members.append(FamilyMember(size, store, log, intended))
    return family


def member_meta(family: DatasetFamily, member: FamilyMember) -> dict[str, Any]:
    return {
        "study": family.study,
        "seed": family.seed,
        "size": member.size,
        "density": family.density,
        "entities": len(member.store),
        "intended_privileges": member.intended,
        "allowed_entries": member.allowed,
        "denied_entries": member.denied,
    }


def write_member(family: DatasetFamily, member: FamilyMember, outdir: Path) -> Path:
    """Write entities.yaml, log.jsonl and meta.yaml into outdir/size-<n>."""
    target = Path(outdir) / f"size-{member.size}"
    target.mkdir(parents=True, exist_ok=True)
    (target / "entities.yaml").write_text(dump_entities(member.store), encoding="utf-8")
    (target / "log.jsonl").write_text(dump_log(member.log), encoding="utf-8")
    (target / "meta.yaml").write_text(
        yaml.safe_dump(member_meta(family, member), sort_keys=False), encoding="utf-8"
    )
    return target


def write_family(spec: StudySpec, family: DatasetFamily, outdir: Path) -> list[Path]:
    """Write the study's schema and both policies, then every member."""
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "schema.cedarschema").write_text(spec.schema_text, encoding="utf-8")
    (root / "policy-tight.cedar").write_text(spec.tight_text, encoding="utf-8")
    (root / "policy-init.cedar").write_text(spec.loose_text, encoding="utf-8")
    return [write_member(family, m, root) for m in family.members]
