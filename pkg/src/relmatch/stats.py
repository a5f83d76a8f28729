"""Area/schema aggregation, z-scores, transfer candidates, pair ranking.

The pipeline: corpus entries aggregate into per-area schema counts
(exclusions are tallied, never silently dropped), counts become
frequencies and per-schema z-scores over a fixed area universe with
implicit zeros, and candidate/pair selection applies inclusive
z-thresholds with editorial area exclusions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

from relmatch.leanstates import (
    Shortcut,
    TacticSchema,
    Unparseable,
    derive_area,
    parse_schema,
    schema_key,
)

TALLY_BUCKETS = (
    "included",
    "missing_source",
    "unparseable",
    "shortcut",
    "non_area_path",
)


class StatsError(ValueError):
    """Inputs that violate a documented statistics precondition."""


@dataclass(frozen=True)
class AreaStats:
    """Per-area tactic totals and per-(area, schema) counts."""

    area_totals: Mapping[str, int]
    counts: Mapping[str, Mapping[str, int]]
    schemas: Mapping[str, TacticSchema]
    tallies: Mapping[str, int]
    corpus_size: int

    @property
    def areas(self) -> Tuple[str, ...]:
        return tuple(sorted(self.area_totals))

    @property
    def keys(self) -> Tuple[str, ...]:
        return tuple(sorted(self.schemas))

    def count(self, area: str, key: str) -> int:
        return self.counts.get(area, {}).get(key, 0)

    def frequency(self, area: str, key: str) -> float:
        total = self.area_totals.get(area, 0)
        return self.count(area, key) / total if total else 0.0


def aggregate(entries) -> AreaStats:
    """Count (area, schema) increments with one exclusion bucket per entry.

    Precedence: an entry with no source_file tallies as missing_source
    even if its tactic would also be unparseable; then unparseable, then
    shortcut, then underivable area. The five tallies always sum to the
    corpus size.
    """
    area_totals: dict = {}
    counts: dict = {}
    schemas: dict = {}
    tallies = {bucket: 0 for bucket in TALLY_BUCKETS}
    for entry in entries:
        if entry.source_file is None:
            tallies["missing_source"] += 1
            continue
        parsed = parse_schema(entry.tactic)
        if isinstance(parsed, Unparseable):
            tallies["unparseable"] += 1
            continue
        if isinstance(parsed, Shortcut):
            tallies["shortcut"] += 1
            continue
        try:
            area = derive_area(entry.source_file)
        except ValueError:
            tallies["non_area_path"] += 1
            continue
        tallies["included"] += 1
        key = schema_key(parsed)
        schemas.setdefault(key, parsed)
        area_totals[area] = area_totals.get(area, 0) + 1
        counts.setdefault(area, {})
        counts[area][key] = counts[area].get(key, 0) + 1
    return AreaStats(
        area_totals=area_totals,
        counts=counts,
        schemas=schemas,
        tallies=tallies,
        corpus_size=sum(tallies.values()),
    )


@dataclass(frozen=True)
class ZTable:
    """Per-(area, schema) z-scores over a fixed area universe."""

    universe: Tuple[str, ...]
    keys: Tuple[str, ...]
    z: Mapping[Tuple[str, str], float]
    mean: Mapping[str, float]
    std: Mapping[str, float]
    areas_present: Mapping[str, int]
    counts: Mapping[Tuple[str, str], int]
    degenerate: frozenset


def zscore_table(stats: AreaStats, area_universe: Optional[Sequence[str]] = None) -> ZTable:
    """Frequencies over the universe (implicit zeros) to population z-scores.

    Every area observed in the stats must appear in the universe. A schema
    with identical frequency everywhere has no spread; its z-scores are 0
    and it is flagged degenerate.
    """
    observed = stats.areas
    universe = tuple(area_universe) if area_universe is not None else observed
    if not universe:
        raise StatsError("area universe is empty")
    if len(set(universe)) != len(universe):
        raise StatsError("area universe has duplicates")
    missing = [area for area in observed if area not in universe]
    if missing:
        raise StatsError(f"universe missing observed area: {missing[0]!r}")

    keys = stats.keys
    z: dict = {}
    mean: dict = {}
    std: dict = {}
    areas_present: dict = {}
    counts: dict = {}
    degenerate = set()
    n = len(universe)
    for key in keys:
        freqs = [stats.frequency(area, key) for area in universe]
        for area, freq in zip(universe, freqs):
            counts[(area, key)] = stats.count(area, key)
        areas_present[key] = sum(1 for f in freqs if f > 0.0)
        mu = math.fsum(freqs) / n
        mean[key] = mu
        if len(set(freqs)) == 1:
            std[key] = 0.0
            degenerate.add(key)
            for area in universe:
                z[(area, key)] = 0.0
            continue
        sigma = math.sqrt(math.fsum((f - mu) ** 2 for f in freqs) / n)
        std[key] = sigma
        for area, freq in zip(universe, freqs):
            z[(area, key)] = (freq - mu) / sigma
    return ZTable(
        universe=universe,
        keys=keys,
        z=z,
        mean=mean,
        std=std,
        areas_present=areas_present,
        counts=counts,
        degenerate=frozenset(degenerate),
    )


@dataclass(frozen=True)
class CandidateFilters:
    z_source_min: float = 2.0
    z_target_max: float = -1.0
    min_areas_present: int = 3
    excluded_sources: Tuple[str, ...] = ("Mathlib.CategoryTheory",)
    excluded_targets: Tuple[str, ...] = (
        "Mathlib.Tactic",
        "Mathlib.Control",
        "Mathlib.Logic",
    )


@dataclass(frozen=True)
class TransferCandidate:
    key: str
    source: str
    target: str
    z_source: float
    z_target: Optional[float]  # None marks a schema absent from the target
    gap: float
    source_count: int


def _check_areas(ztable: ZTable, source: str, target: str, filters: CandidateFilters) -> None:
    if source == target:
        raise StatsError(f"source and target are the same area: {source!r}")
    for area in (source, target):
        if area not in ztable.universe:
            known = ", ".join(sorted(ztable.universe))
            raise StatsError(f"area not in universe: {area!r} (universe: {known})")
    if source in filters.excluded_sources:
        raise StatsError(f"source-area exclusion rule forbids {source!r}")
    if target in filters.excluded_targets:
        raise StatsError(f"target-area exclusion rule forbids {target!r}")


def transfer_candidates(
    ztable: ZTable,
    source: str,
    target: str,
    filters: CandidateFilters = CandidateFilters(),
) -> list:
    """Schemas over-represented in the source and depleted or absent in the
    target, both thresholds inclusive.

    Shortcut strings never reach the z-table (aggregation tallies them
    out), so every key here is a genuine schema. Returned candidates are
    sorted by descending gap, then key.
    """
    _check_areas(ztable, source, target, filters)
    out = []
    for key in ztable.keys:
        if ztable.areas_present.get(key, 0) < filters.min_areas_present:
            continue
        z_s = ztable.z[(source, key)]
        z_t = ztable.z[(target, key)]
        if z_s < filters.z_source_min:
            continue
        absent = ztable.counts.get((target, key), 0) == 0
        if not absent and z_t > filters.z_target_max:
            continue
        out.append(
            TransferCandidate(
                key=key,
                source=source,
                target=target,
                z_source=z_s,
                z_target=None if absent else z_t,
                gap=z_s - z_t,
                source_count=ztable.counts.get((source, key), 0),
            )
        )
    out.sort(key=lambda c: (-c.gap, c.key))
    return out


@dataclass(frozen=True)
class PairScore:
    source: str
    target: str
    potential: float
    contributors: Tuple[str, ...] = ()


def potential_of(candidates: Sequence[TransferCandidate]) -> PairScore:
    """Top-10 gaps (descending, key-ascending ties) weighted by log(1+count)."""
    if not candidates:
        raise StatsError("no candidates")
    ranked = sorted(candidates, key=lambda c: (-c.gap, c.key))[:10]
    value = math.fsum(c.gap * math.log1p(c.source_count) for c in ranked)
    return PairScore(
        source=ranked[0].source,
        target=ranked[0].target,
        potential=value,
        contributors=tuple(c.key for c in ranked),
    )


def pair_potential(ztable: ZTable, filters: CandidateFilters = CandidateFilters()) -> list:
    """Rank every admissible (source, target) pair by its potential."""
    pairs = []
    for source in ztable.universe:
        if source in filters.excluded_sources:
            continue
        for target in ztable.universe:
            if target == source or target in filters.excluded_targets:
                continue
            candidates = transfer_candidates(ztable, source, target, filters)
            if candidates:
                score = potential_of(candidates)
            else:
                score = PairScore(source, target, 0.0)
            pairs.append(score)
    pairs.sort(key=lambda p: (-p.potential, p.source, p.target))
    return pairs


def ztable_rows(ztable: ZTable) -> list:
    """Tab-separated z-table report lines, header first, implicit zeros kept."""
    rows = ["area\tschema\tcount\tfreq\tz"]
    for area in ztable.universe:
        total = sum(
            ztable.counts.get((area, key), 0) for key in ztable.keys
        )
        for key in ztable.keys:
            count = ztable.counts.get((area, key), 0)
            freq = count / total if total else 0.0
            rows.append(
                f"{area}\t{key}\t{count}\t{freq:.6f}\t{ztable.z[(area, key)]:.6f}"
            )
    return rows


def candidate_rows(candidates: Sequence[TransferCandidate]) -> list:
    rows = ["schema\tsource\ttarget\tz_source\tz_target\tgap\tsource_count"]
    for c in candidates:
        z_t = "ABSENT" if c.z_target is None else f"{c.z_target:.6f}"
        rows.append(
            f"{c.key}\t{c.source}\t{c.target}\t{c.z_source:.6f}\t{z_t}"
            f"\t{c.gap:.6f}\t{c.source_count}"
        )
    return rows


def pair_rows(pairs: Sequence[PairScore]) -> list:
    rows = ["source\ttarget\tpotential\tcontributors"]
    for p in pairs:
        rows.append(
            f"{p.source}\t{p.target}\t{p.potential:.6f}\t{';'.join(p.contributors)}"
        )
    return rows
