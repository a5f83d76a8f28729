"""Command-line pipeline driver.

Subcommands cover the full pipeline: corpus census (`schemas`), z-score
tables (`zscores`), transfer mining (`candidates`, `pairs`), analogy
matching (`match`), the chess key-mapping battery (`battery`), and
why-report templates (`whyreport`).

Reports are delimited text files whose first line is a `# generated`
timestamp comment; rerunning a command with identical inputs and seed
reproduces every report byte-for-byte apart from that line. Each report
command also renders a companion PNG unless --no-plot is given.

Exit codes: 0 success, 2 usage errors, 3 data or file errors, 4 battery
key-mapping miss.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import shlex
import subprocess
import sys
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Tuple

from relmatch import figures
from relmatch.chess import load_battery, run_battery
from relmatch.leanstates import (
    ParseError,
    corpus_entry_from_record,
    extract_proof_relations,
    read_corpus,
)
from relmatch.matcher import MatchConfig, batch_match, write_results
from relmatch.relnet import NetworkError, read_networks, relational_score
from relmatch.stats import (
    TALLY_BUCKETS,
    CandidateFilters,
    aggregate,
    candidate_rows,
    pair_potential,
    pair_rows,
    transfer_candidates,
    zscore_table,
    ztable_rows,
)

_CORPUS_COMMANDS = ("schemas", "zscores", "candidates", "pairs")

WHYREPORT_SECTIONS = (
    "what-the-source-tactic-does",
    "does-an-analog-exist",
    "attempts",
    "failure-diagnosis",
)

_SECTION_PLACEHOLDER = "(to be filled in)"


class CliError(ValueError):
    """Bad config file contents or an unsafe output request."""


def _parse_list(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_format(text: str) -> str:
    lowered = text.strip().lower()
    if lowered not in ("tsv", "csv"):
        raise ValueError(f"expected 'tsv' or 'csv', got {text!r}")
    return lowered


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline settings: defaults, then config file, then flags."""

    corpus: Optional[Path] = None
    out_dir: Path = Path(".")
    universe: Optional[Tuple[str, ...]] = None
    excluded_sources: Tuple[str, ...] = CandidateFilters().excluded_sources
    excluded_targets: Tuple[str, ...] = CandidateFilters().excluded_targets
    restarts: int = 32
    max_iters_per_restart: int = 1000
    seed: int = 0
    top_k: int = 5
    report_format: str = "tsv"
    plots: bool = True

    def filters(self) -> CandidateFilters:
        return CandidateFilters(
            excluded_sources=self.excluded_sources,
            excluded_targets=self.excluded_targets,
        )

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            restarts=self.restarts,
            max_iters_per_restart=self.max_iters_per_restart,
            seed=self.seed,
            top_k=self.top_k,
        )


# config-file key -> (PipelineConfig field, value parser)
_CONFIG_KEYS = {
    "corpus": ("corpus", Path),
    "out_dir": ("out_dir", Path),
    "universe": ("universe", _parse_list),
    "excluded_sources": ("excluded_sources", _parse_list),
    "excluded_targets": ("excluded_targets", _parse_list),
    "restarts": ("restarts", int),
    "max_iters_per_restart": ("max_iters_per_restart", int),
    "seed": ("seed", int),
    "top_k": ("top_k", int),
    "format": ("report_format", _parse_format),
    "plots": ("plots", _parse_bool),
}


def load_config(path) -> dict:
    """Parse a flat key=value settings file; unknown keys are rejected."""
    settings: dict = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, _, value = text.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise CliError(f"{path}:{lineno}: unknown key {key!r}")
            field_name, parse = _CONFIG_KEYS[key]
            try:
                settings[field_name] = parse(value)
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return settings


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge config-file settings and flags; resolve paths up front."""
    settings: dict = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        settings.update(load_config(config_path))
    if getattr(args, "corpus", None) is not None:
        settings["corpus"] = Path(args.corpus)
    if getattr(args, "out_dir", None) is not None:
        settings["out_dir"] = Path(args.out_dir)
    if getattr(args, "seed", None) is not None:
        settings["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        settings["restarts"] = args.restarts
    if getattr(args, "top_k", None) is not None:
        settings["top_k"] = args.top_k
    if getattr(args, "no_plot", False):
        settings["plots"] = False
    cfg = replace(PipelineConfig(), **settings)
    corpus = cfg.corpus.resolve() if cfg.corpus is not None else None
    return replace(cfg, corpus=corpus, out_dir=cfg.out_dir.resolve())


def _timestamp_line() -> str:
    return "# generated " + datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_report(cfg: PipelineConfig, stem: str, rows: Sequence[str]) -> Path:
    """Write rows under a timestamp header, honoring the format selector."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"{stem}.{cfg.report_format}"
    if cfg.report_format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for row in rows:
            writer.writerow(row.split("\t"))
        rendered = buffer.getvalue().splitlines()
    else:
        rendered = list(rows)
    path.write_text("\n".join([_timestamp_line()] + rendered) + "\n", encoding="utf-8")
    return path


def _read_corpus_lenient(path) -> tuple:
    """Read corpus records, collecting per-line problems instead of raising."""
    entries, problems = [], []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                problems.append(f"{path}:{lineno}: bad JSON: {exc}")
                continue
            try:
                entries.append(corpus_entry_from_record(record))
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"{path}:{lineno}: {exc}")
    return entries, problems


def _ingest_corpus(cfg: PipelineConfig) -> list:
    entries, problems = _read_corpus_lenient(cfg.corpus)
    for problem in problems:
        print(f"warning: {problem}", file=sys.stderr)
    if not entries:
        raise ParseError(f"{cfg.corpus}: no valid entries")
    return entries


def cmd_schemas(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    stats = aggregate(_ingest_corpus(cfg))
    census = []
    for key in stats.keys:
        total = sum(stats.count(area, key) for area in stats.areas)
        present = sum(1 for area in stats.areas if stats.count(area, key))
        census.append((key, total, present))
    census.sort(key=lambda row: (-row[1], row[0]))
    rows = ["schema\tcount\tareas_present"]
    rows += [f"{key}\t{count}\t{present}" for key, count, present in census]
    rows += [f"# tally {bucket} {stats.tallies[bucket]}" for bucket in TALLY_BUCKETS]
    path = _write_report(cfg, "schemas", rows)
    if cfg.plots:
        figures.render_census(census, cfg.out_dir / "schemas.png")
    print(
        f"wrote {path} ({len(census)} schemas from "
        f"{stats.tallies['included']} of {stats.corpus_size} entries)"
    )
    return 0


def cmd_zscores(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    stats = aggregate(_ingest_corpus(cfg))
    table = zscore_table(stats, cfg.universe)
    path = _write_report(cfg, "zscores", ztable_rows(table))
    if cfg.plots:
        figures.render_ztable(table, cfg.out_dir / "zscores.png")
    print(f"wrote {path} ({len(table.universe)} areas x {len(table.keys)} schemas)")
    return 0


def cmd_candidates(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    stats = aggregate(_ingest_corpus(cfg))
    table = zscore_table(stats, cfg.universe)
    found = transfer_candidates(table, args.source, args.target, cfg.filters())
    path = _write_report(cfg, "candidates", candidate_rows(found))
    if cfg.plots:
        figures.render_candidate_gaps(
            found,
            cfg.out_dir / "candidates.png",
            title=f"transfer candidates {args.source} > {args.target}",
        )
    print(f"wrote {path} ({len(found)} candidates {args.source} -> {args.target})")
    return 0


def cmd_pairs(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    stats = aggregate(_ingest_corpus(cfg))
    table = zscore_table(stats, cfg.universe)
    scores = pair_potential(table, cfg.filters())
    path = _write_report(cfg, "pairs", pair_rows(scores))
    if cfg.plots:
        figures.render_pair_potentials(scores, cfg.out_dir / "pairs.png")
    print(f"wrote {path} ({len(scores)} area pairs)")
    return 0


def _load_networks_auto(path) -> list:
    """Load (id, network) pairs from either interchange format.

    The first record decides: entity/relation fields mean a network file,
    a tactic field means a corpus file whose proof states get extracted.
    """
    first = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise NetworkError(f"{path}:{lineno}: bad JSON: {exc}") from None
            first = (lineno, record)
            break
    if first is None:
        raise NetworkError(f"{path}: no records")
    lineno, record = first
    if not isinstance(record, dict):
        raise NetworkError(f"{path}:{lineno}: record is not a JSON object")
    if "entities" in record and "relations" in record:
        pairs = [(str(net_id), network) for net_id, network in read_networks(path)]
    elif "tactic" in record:
        pairs = []
        skipped = 0
        for entry in read_corpus(path):
            if entry.state is None:
                skipped += 1
                continue
            pairs.append((entry.id, extract_proof_relations(entry.state)))
        if skipped:
            print(
                f"warning: {path}: skipped {skipped} entries without proof states",
                file=sys.stderr,
            )
        if not pairs:
            raise NetworkError(f"{path}: no proof states to extract")
    else:
        raise NetworkError(
            f"{path}:{lineno}: unrecognized record (expected network or corpus fields)"
        )
    seen = set()
    for net_id, _ in pairs:
        if net_id in seen:
            raise NetworkError(f"{path}: duplicate record id {net_id!r}")
        seen.add(net_id)
    return pairs


def _revalidate(queries, targets, results, config: MatchConfig) -> None:
    """Recompute every reported raw score; a mismatch is an internal bug."""
    query_nets = dict(queries)
    target_nets = dict(targets)
    for result in results:
        source = query_nets[result.query_id]
        for candidate_id, match_result in result.ranking:
            check = relational_score(
                source, target_nets[candidate_id], match_result.assignment, config.weights
            )
            if abs(check - match_result.score.raw) > 1e-9:
                raise RuntimeError(
                    f"score re-validation failed for {result.query_id} -> "
                    f"{candidate_id}: reported {match_result.score.raw}, got {check}"
                )


def cmd_match(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    started = time.perf_counter()
    queries = _load_networks_auto(args.queries)
    targets = _load_networks_auto(args.targets)
    config = cfg.match_config()
    results = batch_match(queries, targets, config)
    _revalidate(queries, targets, results, config)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "matches.jsonl"
    write_results(path, results, header=_timestamp_line())
    if cfg.plots:
        figures.render_rankings(results, cfg.out_dir / "matches.png")
    elapsed = time.perf_counter() - started
    print(
        f"matched {len(queries)} queries against {len(targets)} candidates "
        f"in {elapsed:.2f}s -> {path}"
    )
    return 0


def cmd_battery(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    cases = load_battery(args.file)
    report = run_battery(cases, cfg.match_config())
    rows = ["case\thits\ttotal\traw\tnormalized\tmissed\terror"]
    for case in report.cases:
        missed = ";".join(o.label for o in case.outcomes if not o.hit)
        rows.append(
            f"{case.name}\t{case.hits}\t{case.total}\t{case.raw_score:.6f}\t"
            f"{case.normalized_score:.6f}\t{missed}\t{case.error or ''}"
        )
    _write_report(cfg, "battery", rows)
    if cfg.plots:
        figures.render_battery(report, cfg.out_dir / "battery.png")
    for case in report.cases:
        missed = [o.label for o in case.outcomes if not o.hit]
        notes = ""
        if missed:
            notes += " missed " + ", ".join(missed)
        if case.error:
            notes += f" ({case.error})"
        print(f"{case.name}: {case.hits}/{case.total}{notes}")
    print(f"total {report.total_hits}/{report.total_keys}")
    return 0 if report.all_satisfied else 4


@dataclass(frozen=True)
class WhyReportTemplate:
    """Skeleton documenting one transfer attempt, closed or not."""

    schema: str
    source_id: str
    target_id: str
    sections: Tuple[Tuple[str, str], ...] = tuple(
        (header, _SECTION_PLACEHOLDER) for header in WHYREPORT_SECTIONS
    )

    def __post_init__(self) -> None:
        headers = tuple(header for header, _ in self.sections)
        missing = [header for header in WHYREPORT_SECTIONS if header not in headers]
        if missing:
            raise ValueError(f"missing section headers: {missing}")

    def render(self) -> list:
        lines = [
            "# why-report",
            "",
            f"- schema: {self.schema}",
            f"- source: {self.source_id}",
            f"- target: {self.target_id}",
            "",
        ]
        for header, text in self.sections:
            lines += [f"## {header}", "", text, ""]
        return lines


def _slugify(text: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-.")
    return slug or "report"


def cmd_whyreport(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    template = WhyReportTemplate(args.schema, args.source_id, args.target_id)
    slug = _slugify(f"{args.schema}-{args.source_id}-{args.target_id}")
    path = cfg.out_dir / f"why-{slug}.md"
    if path.exists() and not args.force:
        raise CliError(f"{path}: already exists (pass --force to overwrite)")
    lines = [_timestamp_line()] + template.render()
    if args.verify_cmd:
        status = subprocess.run(shlex.split(args.verify_cmd), check=False).returncode
        lines += [
            "## verification",
            "",
            f"- command: {args.verify_cmd}",
            f"- exit-status: {status}",
            "",
        ]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return 0


def _add_shared(parser: argparse.ArgumentParser, suppress: bool = False) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument(
        "--corpus", metavar="FILE", default=default,
        help="line-delimited corpus of tactic records",
    )
    parser.add_argument(
        "--out-dir", metavar="DIR", default=default,
        help="directory for reports and figures (default: current directory)",
    )
    parser.add_argument(
        "--config", metavar="FILE", default=default,
        help="flat key=value settings file; flags take precedence",
    )
    parser.add_argument(
        "--seed", type=int, metavar="N", default=default,
        help="base seed for the matcher's restarts (default 0)",
    )
    parser.add_argument(
        "--no-plot", action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="skip the companion PNG figures",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relmatch",
        description="Relational analogy matching and cross-area tactic transfer mining.",
    )
    _add_shared(parser)
    shared = argparse.ArgumentParser(add_help=False)
    _add_shared(shared, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(
        "schemas", parents=[shared],
        help="schema census and exclusion tallies from a corpus",
    )
    p.set_defaults(func=cmd_schemas)

    p = sub.add_parser(
        "zscores", parents=[shared],
        help="per-(area, schema) z-score table",
    )
    p.set_defaults(func=cmd_zscores)

    p = sub.add_parser(
        "candidates", parents=[shared],
        help="transfer candidates for one source/target area pair",
    )
    p.add_argument("--source", required=True, metavar="AREA")
    p.add_argument("--target", required=True, metavar="AREA")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser(
        "pairs", parents=[shared],
        help="rank all admissible area pairs by transfer potential",
    )
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser(
        "match", parents=[shared],
        help="rank target networks against each query network",
    )
    p.add_argument("--queries", required=True, metavar="FILE",
                   help="network or corpus file of query records")
    p.add_argument("--targets", required=True, metavar="FILE",
                   help="network or corpus file of candidate records")
    p.add_argument("--top-k", type=int, default=None, metavar="K",
                   help="ranking length per query (default 5)")
    p.add_argument("--restarts", type=int, default=None, metavar="R",
                   help="search restarts per pair (default 32)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser(
        "battery", parents=[shared],
        help="run the chess key-mapping battery",
    )
    p.add_argument("--file", default=None, metavar="FILE",
                   help="battery case file (default: the shipped battery)")
    p.set_defaults(func=cmd_battery)

    p = sub.add_parser(
        "whyreport", parents=[shared],
        help="emit a why-report template for one transfer attempt",
    )
    p.add_argument("--schema", required=True, metavar="KEY",
                   help="schema key of the tactic under transfer")
    p.add_argument("--source-id", required=True, metavar="ID",
                   help="corpus id of the source proof state")
    p.add_argument("--target-id", required=True, metavar="ID",
                   help="corpus id of the target proof state")
    p.add_argument("--verify-cmd", default=None, metavar="CMD",
                   help="external check to run; its exit status is recorded")
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing why-report")
    p.set_defaults(func=cmd_whyreport)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "top_k", None) is not None and args.top_k < 1:
        parser.error("--top-k must be at least 1")
    if getattr(args, "restarts", None) is not None and args.restarts < 1:
        parser.error("--restarts must be at least 1")
    if args.command == "candidates" and args.source == args.target:
        parser.error("--source and --target must name different areas")
    try:
        cfg = resolve_config(args)
        if args.command in _CORPUS_COMMANDS and cfg.corpus is None:
            parser.error(f"'{args.command}' needs a corpus (--corpus or a config entry)")
        return args.func(args, cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
