"""Relational networks: opaque entities connected by typed, directed relations.

A network is the matcher's sole input shape: a fixed entity list plus a set
of (source index, destination index, relation type) triples. Networks are
immutable after construction and every operation here is a pure function,
so values can be shared freely across threads.

Relation types live in a TypeRegistry assigning dense integer ids to short
labels ("attack", "rewrite"). Two networks are comparable only when their
registries carry the same labels in the same order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


class NetworkError(ValueError):
    """Malformed network, assignment, weight table, or interchange record."""


@dataclass(frozen=True)
class RelationType:
    """A relation type; ids are dense positions within one registry."""

    id: int
    label: str


class TypeRegistry:
    """Ordered, duplicate-free table of relation type labels.

    Ids are list positions, so a registry is fully determined by its label
    order; equality compares label tuples, which is what "two networks share
    a registry" means throughout this package.
    """

    __slots__ = ("_labels", "_ids")

    def __init__(self, labels: Iterable[str]) -> None:
        labels = tuple(labels)
        seen = set()
        for label in labels:
            if not label or label in seen:
                raise NetworkError(f"empty or duplicate relation type label: {label!r}")
            seen.add(label)
        self._labels = labels
        self._ids = {label: i for i, label in enumerate(labels)}

    @property
    def labels(self) -> tuple:
        return self._labels

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[RelationType]:
        for i, label in enumerate(self._labels):
            yield RelationType(i, label)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypeRegistry) and self._labels == other._labels

    def __hash__(self) -> int:
        return hash(self._labels)

    def __repr__(self) -> str:
        return f"TypeRegistry({list(self._labels)!r})"

    def id_of(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise NetworkError(f"unknown relation type label: {label!r}") from None

    def label_of(self, type_id: int) -> str:
        if not 0 <= type_id < len(self._labels):
            raise NetworkError(f"unknown relation type id: {type_id!r}")
        return self._labels[type_id]

    def resolve(self, type_ref: Union[int, str, RelationType]) -> int:
        """Normalize an id, a label, or a RelationType to the dense id."""
        if isinstance(type_ref, RelationType):
            if self.label_of(type_ref.id) != type_ref.label:
                raise NetworkError(f"relation type {type_ref!r} not in registry")
            return type_ref.id
        if isinstance(type_ref, str):
            return self.id_of(type_ref)
        if isinstance(type_ref, int) and not isinstance(type_ref, bool):
            self.label_of(type_ref)
            return type_ref
        raise NetworkError(f"unknown relation type id: {type_ref!r}")


@dataclass(frozen=True)
class Entity:
    """An opaque node. The kind tag is extractor metadata; scoring never reads it."""

    label: str
    kind: Optional[str] = None


EntityLike = Union[Entity, str, Sequence, Mapping]


def _as_entity(descriptor: EntityLike) -> Entity:
    if isinstance(descriptor, Entity):
        return descriptor
    if isinstance(descriptor, str):
        return Entity(descriptor)
    if isinstance(descriptor, Mapping):
        return Entity(descriptor["label"], descriptor.get("kind"))
    if isinstance(descriptor, Sequence) and 1 <= len(descriptor) <= 2:
        return Entity(*descriptor)
    raise NetworkError(f"bad entity descriptor: {descriptor!r}")


class RelationalNetwork:
    """Entities plus a deduplicated set of typed directed relations.

    Relations are kept both as a sorted tuple (deterministic iteration) and
    as a frozenset (membership tests). Self-loops are permitted. Instances
    are immutable by convention; nothing in this package mutates one.
    """

    __slots__ = ("entities", "relations", "relation_set", "registry")

    def __init__(
        self,
        entities: Sequence[Entity],
        relations: Iterable[tuple],
        registry: TypeRegistry,
    ) -> None:
        self.entities = tuple(entities)
        n = len(self.entities)
        k = len(registry)
        dedup = set()
        for triple in relations:
            if len(triple) != 3:
                raise NetworkError(f"relation triple must have 3 fields: {triple!r}")
            src, dst, type_id = triple
            if not (0 <= src < n and 0 <= dst < n):
                raise NetworkError(f"relation index out of range: {triple!r}")
            if not (0 <= type_id < k):
                raise NetworkError(f"unknown relation type in triple: {triple!r}")
            dedup.add((src, dst, type_id))
        self.relations = tuple(sorted(dedup))
        self.relation_set = frozenset(dedup)
        self.registry = registry

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def label_index(self) -> dict:
        """Map entity label -> index; labels must be unique to use this."""
        index: dict = {}
        for i, entity in enumerate(self.entities):
            if entity.label in index:
                raise NetworkError(f"duplicate entity label: {entity.label!r}")
            index[entity.label] = i
        return index

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RelationalNetwork)
            and self.entities == other.entities
            and self.relation_set == other.relation_set
            and self.registry == other.registry
        )

    def __hash__(self) -> int:
        return hash((self.entities, self.relation_set, self.registry))

    def __repr__(self) -> str:
        return (
            f"RelationalNetwork({self.n_entities} entities, "
            f"{len(self.relations)} relations, {len(self.registry)} types)"
        )


def build_network(
    entities: Iterable[EntityLike],
    relations: Iterable[Sequence],
    registry: TypeRegistry,
) -> RelationalNetwork:
    """Construct a network from loose descriptors.

    Entities may be Entity values, bare labels, (label, kind) pairs, or
    {"label", "kind"} mappings. Each relation is a (src, dst, type) triple
    whose type may be an id, a label, or a RelationType. Duplicate triples
    collapse; out-of-range indices and unknown types raise NetworkError.
    """
    ents = [_as_entity(d) for d in entities]
    triples = []
    for rel in relations:
        if len(rel) != 3:
            raise NetworkError(f"relation triple must have 3 fields: {rel!r}")
        src, dst, type_ref = rel
        try:
            type_id = registry.resolve(type_ref)
        except NetworkError:
            raise NetworkError(f"unknown relation type in triple: {rel!r}") from None
        triples.append((src, dst, type_id))
    return RelationalNetwork(ents, triples, registry)


class Assignment:
    """Partial injective correspondence from source to target entity indices."""

    __slots__ = ("pairs", "_map")

    def __init__(self, pairs: Iterable[Sequence]) -> None:
        normalized = sorted({(int(s), int(t)) for s, t in pairs})
        sources = [s for s, _ in normalized]
        targets = [t for _, t in normalized]
        if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
            raise NetworkError(f"assignment is not injective: {normalized!r}")
        if any(s < 0 or t < 0 for s, t in normalized):
            raise NetworkError(f"negative index in assignment: {normalized!r}")
        self.pairs = tuple(normalized)
        self._map = dict(normalized)

    @property
    def mapping(self) -> dict:
        return dict(self._map)

    def get(self, source: int) -> Optional[int]:
        return self._map.get(source)

    def inverse(self) -> "Assignment":
        return Assignment((t, s) for s, t in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.pairs)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Assignment) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        return f"Assignment({list(self.pairs)!r})"


@dataclass(frozen=True)
class MatchScore:
    """Raw and size-normalized score of one assignment."""

    raw: float
    normalized: float
    n_source: int
    n_target: int

    @staticmethod
    def of(raw: float, n_source: int, n_target: int) -> "MatchScore":
        return MatchScore(raw, normalize_score(raw, n_source, n_target), n_source, n_target)


@dataclass(frozen=True)
class RelationProfile:
    """Per-type (out-degree, in-degree) fingerprint of one entity.

    Zero rows are dropped, and rows are sorted by type id, so two profiles
    compare equal exactly when the underlying degree counts agree.
    """

    counts: tuple  # ((type_id, out_degree, in_degree), ...)

    def degree(self, type_id: int) -> tuple:
        for t, out_deg, in_deg in self.counts:
            if t == type_id:
                return (out_deg, in_deg)
        return (0, 0)


def resolve_weights(registry: TypeRegistry, weights=None) -> tuple:
    """Normalize a weight spec to a per-type-id tuple of positive floats.

    Accepts None (unit weights), a mapping keyed by type label or id, or a
    full-length sequence. Types missing from a mapping default to 1.0.
    """
    resolved = [1.0] * len(registry)
    if weights is None:
        return tuple(resolved)
    if isinstance(weights, Mapping):
        for key, value in weights.items():
            resolved[registry.resolve(key)] = float(value)
    else:
        values = [float(v) for v in weights]
        if len(values) != len(registry):
            raise NetworkError(
                f"weight sequence has {len(values)} entries for {len(registry)} types"
            )
        resolved = values
    for type_id, value in enumerate(resolved):
        if not value > 0 or not math.isfinite(value):
            raise NetworkError(
                f"weight for type {registry.label_of(type_id)!r} must be a positive real"
            )
    return tuple(resolved)


def _check_assignment(a: RelationalNetwork, b: RelationalNetwork, asg: Assignment) -> None:
    for src, dst in asg.pairs:
        if src >= a.n_entities or dst >= b.n_entities:
            raise NetworkError(f"assignment pair out of range: {(src, dst)!r}")


def relational_score(
    a: RelationalNetwork,
    b: RelationalNetwork,
    assignment: Assignment,
    weights=None,
) -> float:
    """Weighted count of a's relations preserved by the assignment.

    A triple (i, j, r) of `a` counts when both endpoints are assigned and
    (asg(i), asg(j), r) is a relation of `b`. With unit weights this is the
    number of preserved relations.
    """
    if a.registry != b.registry:
        raise NetworkError("registry mismatch between networks")
    _check_assignment(a, b, assignment)
    per_type = resolve_weights(a.registry, weights)
    amap = assignment._map
    target_relations = b.relation_set
    score = 0.0
    for src, dst, type_id in a.relations:
        mapped_src = amap.get(src)
        if mapped_src is None:
            continue
        mapped_dst = amap.get(dst)
        if mapped_dst is None:
            continue
        if (mapped_src, mapped_dst, type_id) in target_relations:
            score += per_type[type_id]
    return score


def normalize_score(raw: float, n_source: int, n_target: int) -> float:
    """Divide by sqrt(n_source * n_target) to remove network-size bias."""
    if n_source < 1 or n_target < 1:
        raise NetworkError("empty network")
    return raw / math.sqrt(n_source * n_target)


def relation_profile(network: RelationalNetwork, index: int) -> RelationProfile:
    """Exact per-type out/in degree counts of one entity."""
    if not 0 <= index < network.n_entities:
        raise NetworkError(f"entity index out of range: {index}")
    out_deg: dict = {}
    in_deg: dict = {}
    for src, dst, type_id in network.relations:
        if src == index:
            out_deg[type_id] = out_deg.get(type_id, 0) + 1
        if dst == index:
            in_deg[type_id] = in_deg.get(type_id, 0) + 1
    rows = tuple(
        (t, out_deg.get(t, 0), in_deg.get(t, 0))
        for t in sorted(out_deg.keys() | in_deg.keys())
    )
    return RelationProfile(rows)


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def signature_hash(profile: RelationProfile) -> int:
    """Stable 64-bit fingerprint of a profile (FNV-1a over sorted rows).

    Each (type_id, out, in) row feeds three 8-byte little-endian words into
    the hash. Zero rows never appear in a profile, so the all-zero profile
    hashes to the FNV-1a offset basis 0xCBF29CE484222325 by construction.
    """
    h = _FNV_OFFSET
    for row in profile.counts:
        for value in row:
            for byte in int(value).to_bytes(8, "little"):
                h ^= byte
                h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def network_to_record(net_id: str, network: RelationalNetwork) -> dict:
    entities = []
    for entity in network.entities:
        item: dict = {"label": entity.label}
        if entity.kind is not None:
            item["kind"] = entity.kind
        entities.append(item)
    return {
        "id": net_id,
        "entities": entities,
        "relations": [
            [src, dst, network.registry.label_of(type_id)]
            for src, dst, type_id in network.relations
        ],
        "types": list(network.registry.labels),
    }


def network_from_record(record: Mapping) -> tuple:
    """Decode one interchange record to (id, network)."""
    if not isinstance(record, Mapping):
        raise NetworkError("record is not a JSON object")
    try:
        net_id = record["id"]
        raw_entities = record["entities"]
        raw_relations = record["relations"]
        labels = record["types"]
    except KeyError as exc:
        raise NetworkError(f"network record missing field {exc}") from None
    registry = TypeRegistry(labels)
    return net_id, build_network(raw_entities, raw_relations, registry)


def write_networks(path, items: Iterable[tuple]) -> None:
    """Write (id, network) pairs as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as handle:
        for net_id, network in items:
            handle.write(json.dumps(network_to_record(net_id, network), ensure_ascii=False))
            handle.write("\n")


def read_networks(path) -> list:
    """Read a line-delimited network file; lines starting with '#' are skipped."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise NetworkError(f"{path}:{lineno}: bad JSON: {exc}") from None
            try:
                out.append(network_from_record(record))
            except (NetworkError, TypeError, ValueError) as exc:
                raise NetworkError(f"{path}:{lineno}: {exc}") from None
    return out
