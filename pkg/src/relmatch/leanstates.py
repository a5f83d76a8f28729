"""Tactic-string schemas, source areas, and proof-state networks.

Everything here is text-level: tactic strings are classified by a
Unicode-aware tokenizer (subscript digits and Greek letters are ordinary
identifier characters), proof states follow a small line grammar, and
the relational network over a state's hypotheses and goals is built from
deterministic syntactic rules. No elaboration or type checking happens.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

from relmatch.relnet import Entity, RelationalNetwork, TypeRegistry, build_network

PROOF_TYPES = (
    "rewrite",
    "fit/apply",
    "head-match",
    "structure",
    "equality",
    "reflexive",
    "witness",
    "bidirectional",
    "kernel/simp",
    "decidable",
    "lemma-needed",
    "reserved-11",
    "reserved-12",
    "reserved-13",
)
PROOF_REGISTRY = TypeRegistry(PROOF_TYPES)

# Identifier: letter or underscore (any script), then word characters
# (subscript digits included), apostrophes, and namespace dots, with
# optional ! or ? suffixes as Lean tactic names use them.
_IDENT_RE = re.compile(r"[^\W\d][\w'.]*[!?]*")

_OPEN = "([{⟨"
_CLOSE = ")]}⟩"


class ParseError(ValueError):
    """Text that does not fit the documented grammar."""


@dataclass(frozen=True)
class TacticSchema:
    head: str
    arity: int
    has_with: bool
    uses_lemma: bool

    def __post_init__(self) -> None:
        if not self.head or any(c.isspace() or c in _OPEN + _CLOSE for c in self.head):
            raise ParseError(f"bad schema head: {self.head!r}")
        if self.arity < 0:
            raise ParseError("negative arity")


@dataclass(frozen=True)
class Shortcut:
    """A bare identifier that is not a known tactic head."""

    identifier: str


@dataclass(frozen=True)
class Unparseable:
    """Text that does not start with an identifier token."""

    text: str


def schema_key(schema: TacticSchema) -> str:
    """Stable one-line form "head|arity|with|lemma" used to key tallies."""
    return (
        f"{schema.head}|{schema.arity}|"
        f"{int(schema.has_with)}|{int(schema.uses_lemma)}"
    )


@lru_cache(maxsize=None)
def _data_lines(name: str) -> frozenset:
    from importlib.resources import files

    text = files("relmatch").joinpath(f"data/{name}").read_text(encoding="utf-8")
    return frozenset(
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def known_tactic_heads() -> frozenset:
    return _data_lines("known_tactic_heads.txt")


def simp_normal_heads() -> frozenset:
    return _data_lines("simp_normal_heads.txt")


def decidable_heads() -> frozenset:
    return _data_lines("decidable_heads.txt")


def _scan_units(text: str):
    """Whitespace-split at bracket depth zero, treating "..." as opaque.

    Returns the unit list plus whether a [...] group opens at top level
    anywhere in the text.
    """
    units = []
    buf = []
    depth = 0
    in_string = False
    top_bracket = False
    for ch in text:
        if in_string:
            buf.append(ch)
            if ch == '"':
                in_string = False
        elif ch == '"':
            buf.append(ch)
            in_string = True
        elif ch in _OPEN:
            if ch == "[" and depth == 0:
                top_bracket = True
            depth += 1
            buf.append(ch)
        elif ch in _CLOSE:
            depth = max(depth - 1, 0)
            buf.append(ch)
        elif ch.isspace() and depth == 0:
            if buf:
                units.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if buf:
        units.append("".join(buf))
    return units, top_bracket


def parse_schema(tactic: str):
    """Classify a tactic string as TacticSchema, Shortcut, or Unparseable.

    The head is the first maximal identifier token. Arity counts the
    whitespace-separated top-level groups after the head, where any
    bracketed group is one unit and everything from a top-level "with"
    on contributes nothing. A string that is a single identifier outside
    the known-head list is a Shortcut; a string that does not begin with
    an identifier is Unparseable.
    """
    text = tactic.strip()
    head_match = _IDENT_RE.match(text)
    if head_match is None:
        return Unparseable(text)
    if head_match.group(0) == text and text not in known_tactic_heads():
        return Shortcut(text)
    units, top_bracket = _scan_units(text)
    tail = units[1:]
    if "with" in tail:
        tail = tail[: tail.index("with")]
    return TacticSchema(
        head=head_match.group(0),
        arity=len(tail),
        has_with="with" in units[1:],
        uses_lemma=top_bracket,
    )


def derive_area(source_file: str) -> str:
    """First two path components joined by ".", e.g. "Mathlib.Probability".

    Each component is truncated at its first "." so the result always has
    exactly two dotted parts even for paths like "Mathlib/Foo.lean".
    """
    components = [part for part in source_file.split("/") if part]
    if len(components) < 2:
        raise ParseError(f"non-area path: {source_file!r}")
    first, second = components[0].split(".")[0], components[1].split(".")[0]
    if not first or not second:
        raise ParseError(f"non-area path: {source_file!r}")
    return f"{first}.{second}"


@dataclass(frozen=True)
class ProofState:
    """Named hypotheses and at least one goal, all as raw type text."""

    hypotheses: Tuple[Tuple[str, str], ...] = ()
    goals: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.goals:
            raise ParseError("proof state has no goal")
        seen = set()
        for name, _ in self.hypotheses:
            if name in seen:
                raise ParseError(f"duplicate hypothesis name: {name!r}")
            seen.add(name)


def parse_proof_state(text: str) -> ProofState:
    """Parse "name : type" lines followed by one or more "⊢ goal" lines."""
    hypotheses = []
    goals = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("⊢"):
            goals.append(line[1:].strip())
        elif goals:
            raise ParseError(f"hypothesis line after goals: {line!r}")
        elif " : " in line:
            name, type_text = line.split(" : ", 1)
            hypotheses.append((name.strip(), type_text.strip()))
        else:
            raise ParseError(f"expected 'name : type' or '⊢ goal': {line!r}")
    return ProofState(tuple(hypotheses), tuple(goals))


def serialize_proof_state(state: ProofState) -> str:
    lines = [f"{name} : {type_text}" for name, type_text in state.hypotheses]
    lines.extend(f"⊢ {goal}" for goal in state.goals)
    return "\n".join(lines)


def _first_identifier(text: str) -> Optional[str]:
    found = _IDENT_RE.search(text)
    return found.group(0) if found else None


def _split_binary(text: str, operator: str) -> Optional[Tuple[str, str]]:
    """Split "l OP r" at the unique top-level occurrence of the operator."""
    needle = f" {operator} "
    depth = 0
    positions = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth = max(depth - 1, 0)
        elif depth == 0 and text.startswith(needle, i):
            positions.append(i)
            i += len(needle)
            continue
        i += 1
    if len(positions) != 1:
        return None
    left = text[: positions[0]].strip()
    right = text[positions[0] + len(needle):].strip()
    if not left or not right:
        return None
    return left, right


def _tokens(text: str) -> Tuple[str, ...]:
    return tuple(re.findall(r"[^\W\d][\w'.]*[!?]*|\S", text))


def _contains_run(haystack: Tuple[str, ...], needle: Tuple[str, ...]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    return any(
        haystack[i : i + len(needle)] == needle
        for i in range(len(haystack) - len(needle) + 1)
    )


def _skeleton(text: str) -> Tuple[str, ...]:
    """Top-level sequence of binder/arrow tokens ∀ / → / ∃."""
    out = []
    depth = 0
    for ch in text:
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth = max(depth - 1, 0)
        elif depth == 0 and ch in "∀→∃":
            out.append(ch)
    return tuple(out)


def _goal_body(goal: str) -> str:
    """Text after the binder of an ∃-goal (after its first top-level comma)."""
    depth = 0
    for i, ch in enumerate(goal):
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth = max(depth - 1, 0)
        elif ch == "," and depth == 0:
            return goal[i + 1 :].strip()
    return goal.lstrip("∃").strip()


def extract_proof_relations(state: ProofState) -> RelationalNetwork:
    """Relational network over a state's hypotheses and goals.

    Entities are the hypotheses (labeled by name) followed by the goals
    (labeled ⊢0, ⊢1, ...). Relations come from the syntactic rule table;
    only named registry types are ever emitted, the reserved slots stay
    empty.
    """
    n_hyps = len(state.hypotheses)
    entities = [Entity(name, "hyp") for name, _ in state.hypotheses]
    entities.extend(Entity(f"⊢{k}", "goal") for k in range(len(state.goals)))
    texts = [type_text for _, type_text in state.hypotheses] + list(state.goals)
    goal_indices = range(n_hyps, n_hyps + len(state.goals))

    relations = set()
    equality_sides = {}
    for i, text in enumerate(texts):
        sides = _split_binary(text, "=")
        if sides is not None:
            equality_sides[i] = sides
            relations.add((i, i, "equality"))
            if _tokens(sides[0]) == _tokens(sides[1]):
                relations.add((i, i, "reflexive"))
        if _split_binary(text, "↔") is not None:
            relations.add((i, i, "bidirectional"))

    for g in goal_indices:
        goal_text = texts[g]
        goal_tokens = _tokens(goal_text)
        goal_head = _first_identifier(goal_text)
        if goal_head in simp_normal_heads():
            relations.add((g, g, "kernel/simp"))
        if goal_head in decidable_heads():
            relations.add((g, g, "decidable"))
        for h in range(n_hyps):
            hyp_text = texts[h]
            if hyp_text == goal_text:
                relations.add((h, g, "fit/apply"))
            hyp_head = _first_identifier(hyp_text)
            if hyp_head is not None and hyp_head == goal_head:
                relations.add((h, g, "head-match"))
            if h in equality_sides and any(
                _contains_run(goal_tokens, _tokens(side))
                for side in equality_sides[h]
            ):
                relations.add((h, g, "rewrite"))
            if goal_text.startswith("∃") and hyp_text in _goal_body(goal_text):
                relations.add((h, g, "witness"))

    skeletons = [_skeleton(text) for text in texts]
    for i in range(len(texts)):
        for j in range(i + 1, len(texts)):
            if skeletons[i] and skeletons[i] == skeletons[j]:
                relations.add((i, j, "structure"))
                relations.add((j, i, "structure"))

    for g in goal_indices:
        supported = any(
            (h, g, kind) in relations
            for h in range(n_hyps)
            for kind in ("fit/apply", "rewrite", "head-match")
        )
        if not supported:
            relations.add((g, g, "lemma-needed"))

    return build_network(entities, sorted(relations), PROOF_REGISTRY)


@dataclass(frozen=True)
class CorpusEntry:
    """One observed tactic occurrence, with optional provenance and state."""

    id: str
    tactic: str
    source_file: Optional[str] = None
    state: Optional[ProofState] = None


def _decode_state(raw) -> ProofState:
    if not isinstance(raw, dict):
        raise ParseError("state must be an object with hyps/goals arrays")
    hyps = raw.get("hyps", [])
    goals = raw.get("goals", [])
    if not isinstance(hyps, list) or not isinstance(goals, list):
        raise ParseError("state hyps and goals must be arrays")
    pairs = []
    for hyp in hyps:
        if (
            not isinstance(hyp, (list, tuple))
            or len(hyp) != 2
            or not all(isinstance(part, str) for part in hyp)
        ):
            raise ParseError("each state hyp must be a [name, type] string pair")
        pairs.append((hyp[0], hyp[1]))
    if not all(isinstance(goal, str) for goal in goals):
        raise ParseError("each state goal must be a string")
    return ProofState(tuple(pairs), tuple(goals))


def corpus_entry_from_record(record) -> CorpusEntry:
    """Decode one interchange record (a parsed JSON object) to an entry."""
    if not isinstance(record, dict):
        raise ParseError("record is not a JSON object")
    if "id" not in record:
        raise ParseError("record is missing the id field")
    if not isinstance(record.get("tactic"), str):
        raise ParseError("tactic must be a string")
    source_file = record.get("source_file")
    if source_file is not None and not isinstance(source_file, str):
        raise ParseError("source_file must be a string")
    state = None
    if record.get("state") is not None:
        state = _decode_state(record["state"])
    return CorpusEntry(
        id=str(record["id"]),
        tactic=record["tactic"],
        source_file=source_file,
        state=state,
    )


def read_corpus(path) -> list:
    """Read line-delimited corpus entries; '#' lines are skipped."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: bad JSON: {exc}") from None
            try:
                out.append(corpus_entry_from_record(record))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return out


def write_corpus(path, entries: Sequence[CorpusEntry]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            record: dict = {"id": entry.id, "tactic": entry.tactic}
            if entry.source_file is not None:
                record["source_file"] = entry.source_file
            if entry.state is not None:
                record["state"] = {
                    "hyps": [list(pair) for pair in entry.state.hypotheses],
                    "goals": list(entry.state.goals),
                }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
