"""Chess position parsing and relation extraction.

A position becomes a relational network whose entities are the pieces (in
board scan order, top rank first) and whose relations are attack, defense,
blocking, confinement, and pinning. All geometry is static: no castling,
no en passant, and the side to move never changes what is extracted.

Entity labels are the color-cased piece letter plus the square ("Qh4" for
a white queen, "qh4" for a black one); the kind tag carries color and
piece letter ("wQ", "bK") but the matcher never sees it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

from relmatch.matcher import MatchConfig, match
from relmatch.relnet import Entity, RelationalNetwork, TypeRegistry, build_network

CHESS_TYPES = ("attack", "defense", "blocking", "confinement", "pinning")
CHESS_REGISTRY = TypeRegistry(CHESS_TYPES)

_FILES = "abcdefgh"
_PIECE_LETTERS = set("KQRBNP")

_ROOK_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_BISHOP_DIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_KING_STEPS = _ROOK_DIRS + _BISHOP_DIRS
_KNIGHT_STEPS = (
    (1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2),
)


class FenError(ValueError):
    """Malformed FEN text or an impossible piece configuration."""


@dataclass(frozen=True)
class Piece:
    color: str  # "w" or "b"
    kind: str  # upper-case piece letter
    file: int  # 0..7 = a..h
    rank: int  # 0..7 = rank 1..8

    @property
    def square(self) -> str:
        return f"{_FILES[self.file]}{self.rank + 1}"

    @property
    def label(self) -> str:
        letter = self.kind if self.color == "w" else self.kind.lower()
        return f"{letter}{self.square}"


@dataclass(frozen=True)
class ChessPosition:
    """Board occupancy in scan order (rank 8 first, file a first per rank)."""

    pieces: Tuple[Piece, ...]
    side_to_move: str = "w"

    def occupancy(self) -> dict:
        return {(piece.file, piece.rank): piece for piece in self.pieces}


def parse_fen(text: str) -> ChessPosition:
    """Parse the piece-placement (and optional side-to-move) FEN fields.

    Later FEN fields are accepted and ignored. Raises FenError naming the
    offending rank for malformed placement rows, and rejects boards with
    more than 32 pieces or more than one king per color.
    """
    fields = text.split()
    if not fields:
        raise FenError("empty FEN")
    rows = fields[0].split("/")
    if len(rows) != 8:
        raise FenError(f"expected 8 ranks, got {len(rows)}")
    pieces = []
    for row_index, row in enumerate(rows):
        rank = 7 - row_index
        file = 0
        for ch in row:
            if ch.isdigit():
                if ch == "0" or ch == "9":
                    raise FenError(f"rank {rank + 1}: bad empty-run digit {ch!r}")
                file += int(ch)
            elif ch.upper() in _PIECE_LETTERS:
                if file > 7:
                    raise FenError(f"rank {rank + 1}: squares exceed 8")
                color = "w" if ch.isupper() else "b"
                pieces.append(Piece(color, ch.upper(), file, rank))
                file += 1
            else:
                raise FenError(f"rank {rank + 1}: bad piece letter {ch!r}")
        if file != 8:
            raise FenError(f"rank {rank + 1}: squares sum to {file}, not 8")
    if len(pieces) > 32:
        raise FenError(f"{len(pieces)} pieces exceed the 32-piece maximum")
    for color in "wb":
        kings = sum(1 for p in pieces if p.color == color and p.kind == "K")
        if kings > 1:
            raise FenError(f"more than one {color!r} king")
    side = "w"
    if len(fields) > 1:
        if fields[1] not in ("w", "b"):
            raise FenError(f"bad side-to-move field {fields[1]!r}")
        side = fields[1]
    return ChessPosition(tuple(pieces), side)


def _on_board(file: int, rank: int) -> bool:
    return 0 <= file <= 7 and 0 <= rank <= 7


def _slider_dirs(kind: str):
    if kind == "B":
        return _BISHOP_DIRS
    if kind == "R":
        return _ROOK_DIRS
    if kind == "Q":
        return _KING_STEPS
    return ()


def _pawn_step(color: str) -> int:
    return 1 if color == "w" else -1


def _pawn_start_rank(color: str) -> int:
    return 1 if color == "w" else 6


def cover_squares(position: ChessPosition, piece: Piece, occupancy=None) -> set:
    """Squares the piece bears on with capture geometry.

    Pawns cover only their two forward diagonals; sliders stop at (and
    include) the first occupied square of each ray.
    """
    occupancy = occupancy if occupancy is not None else position.occupancy()
    covered = set()
    if piece.kind == "P":
        step = _pawn_step(piece.color)
        for df in (-1, 1):
            square = (piece.file + df, piece.rank + step)
            if _on_board(*square):
                covered.add(square)
    elif piece.kind == "N":
        for df, dr in _KNIGHT_STEPS:
            square = (piece.file + df, piece.rank + dr)
            if _on_board(*square):
                covered.add(square)
    elif piece.kind == "K":
        for df, dr in _KING_STEPS:
            square = (piece.file + df, piece.rank + dr)
            if _on_board(*square):
                covered.add(square)
    else:
        for df, dr in _slider_dirs(piece.kind):
            file, rank = piece.file + df, piece.rank + dr
            while _on_board(file, rank):
                covered.add((file, rank))
                if (file, rank) in occupancy:
                    break
                file, rank = file + df, rank + dr
    return covered


def legal_moves(position: ChessPosition, piece: Piece, occupancy=None) -> list:
    """Destination squares the piece may move to, statically.

    Pawns push onto empty squares and capture diagonally onto enemies;
    kings may not step onto squares covered by any enemy piece (computed
    on the board as it stands, so a king never shields a ray from itself);
    non-king pieces are not restricted by check.
    """
    occupancy = occupancy if occupancy is not None else position.occupancy()
    moves = []
    if piece.kind == "P":
        step = _pawn_step(piece.color)
        push = (piece.file, piece.rank + step)
        if _on_board(*push) and push not in occupancy:
            moves.append(push)
            double = (piece.file, piece.rank + 2 * step)
            if piece.rank == _pawn_start_rank(piece.color) and double not in occupancy:
                moves.append(double)
        for df in (-1, 1):
            square = (piece.file + df, piece.rank + step)
            if _on_board(*square):
                occupant = occupancy.get(square)
                if occupant is not None and occupant.color != piece.color:
                    moves.append(square)
    elif piece.kind == "N":
        for df, dr in _KNIGHT_STEPS:
            square = (piece.file + df, piece.rank + dr)
            if _on_board(*square):
                occupant = occupancy.get(square)
                if occupant is None or occupant.color != piece.color:
                    moves.append(square)
    elif piece.kind == "K":
        banned = set()
        for other in position.pieces:
            if other.color != piece.color:
                banned |= cover_squares(position, other, occupancy)
        for df, dr in _KING_STEPS:
            square = (piece.file + df, piece.rank + dr)
            if not _on_board(*square) or square in banned:
                continue
            occupant = occupancy.get(square)
            if occupant is None or occupant.color != piece.color:
                moves.append(square)
    else:
        for df, dr in _slider_dirs(piece.kind):
            file, rank = piece.file + df, piece.rank + dr
            while _on_board(file, rank):
                occupant = occupancy.get((file, rank))
                if occupant is None:
                    moves.append((file, rank))
                else:
                    if occupant.color != piece.color:
                        moves.append((file, rank))
                    break
                file, rank = file + df, rank + dr
    return moves


def geometric_destinations(position: ChessPosition, piece: Piece, occupancy=None) -> set:
    """Move-pattern squares used to apportion confinement credit.

    Unlike legal moves these ignore who occupies a destination: a pawn's
    set always has its push square(s) and both capture diagonals, sliders
    run to the first occupant inclusive, kings and knights use their full
    patterns.
    """
    occupancy = occupancy if occupancy is not None else position.occupancy()
    squares = set()
    if piece.kind == "P":
        step = _pawn_step(piece.color)
        push = (piece.file, piece.rank + step)
        if _on_board(*push):
            squares.add(push)
        if piece.rank == _pawn_start_rank(piece.color):
            double = (piece.file, piece.rank + 2 * step)
            if _on_board(*double):
                squares.add(double)
        for df in (-1, 1):
            square = (piece.file + df, piece.rank + step)
            if _on_board(*square):
                squares.add(square)
    elif piece.kind in ("N", "K"):
        steps = _KNIGHT_STEPS if piece.kind == "N" else _KING_STEPS
        for df, dr in steps:
            square = (piece.file + df, piece.rank + dr)
            if _on_board(*square):
                squares.add(square)
    else:
        squares = cover_squares(position, piece, occupancy)
    return squares


def _ray_occupants(occupancy, piece: Piece, direction) -> list:
    """Pieces along one ray of a slider, nearest first."""
    found = []
    file, rank = piece.file + direction[0], piece.rank + direction[1]
    while _on_board(file, rank):
        occupant = occupancy.get((file, rank))
        if occupant is not None:
            found.append(occupant)
            if len(found) == 2:
                break
        file, rank = file + direction[0], rank + direction[1]
    return found


def extract_chess_relations(position: ChessPosition) -> RelationalNetwork:
    """The five-type relational network of a position.

    attack / defense: capture-geometry cover of an enemy / friendly piece.
    blocking: the first occupant q of a friendly slider p's ray, emitted
        q -> p (the blocker obstructs the slider).
    pinning: slider p -> enemy q when q is the only piece between p and
        the enemy king along a ray.
    confinement: p -> q for every p that covers (as an enemy) or occupies
        one of q's geometric destination squares, but only when q has no
        legal moves at all.
    """
    occupancy = position.occupancy()
    index = {(piece.file, piece.rank): i for i, piece in enumerate(position.pieces)}
    relations = []

    for i, piece in enumerate(position.pieces):
        for square in cover_squares(position, piece, occupancy):
            occupant = occupancy.get(square)
            if occupant is None:
                continue
            j = index[(occupant.file, occupant.rank)]
            relations.append((i, j, "attack" if occupant.color != piece.color else "defense"))

    for i, piece in enumerate(position.pieces):
        for direction in _slider_dirs(piece.kind):
            occupants = _ray_occupants(occupancy, piece, direction)
            if occupants and occupants[0].color == piece.color:
                j = index[(occupants[0].file, occupants[0].rank)]
                relations.append((j, i, "blocking"))
            if (
                len(occupants) == 2
                and occupants[0].color != piece.color
                and occupants[1].color != piece.color
                and occupants[1].kind == "K"
            ):
                j = index[(occupants[0].file, occupants[0].rank)]
                relations.append((i, j, "pinning"))

    for j, target in enumerate(position.pieces):
        if legal_moves(position, target, occupancy):
            continue
        destinations = geometric_destinations(position, target, occupancy)
        for i, piece in enumerate(position.pieces):
            if i == j:
                continue
            if (piece.file, piece.rank) in destinations:
                relations.append((i, j, "confinement"))
                continue
            if piece.color != target.color and cover_squares(
                position, piece, occupancy
            ) & destinations:
                relations.append((i, j, "confinement"))

    entities = [Entity(piece.label, piece.color + piece.kind) for piece in position.pieces]
    return build_network(entities, relations, CHESS_REGISTRY)


@dataclass(frozen=True)
class BatteryCase:
    """One network pair plus the entity correspondences its match must hit."""

    name: str
    fen_a: str
    fen_b: str
    key_mappings: Tuple[Tuple[str, Tuple[str, ...]], ...]


@dataclass(frozen=True)
class KeyOutcome:
    label: str
    acceptable: Tuple[str, ...]
    mapped_to: Optional[str]
    hit: bool


@dataclass(frozen=True)
class CaseReport:
    name: str
    hits: int
    total: int
    raw_score: float
    normalized_score: float
    outcomes: Tuple[KeyOutcome, ...] = ()
    error: Optional[str] = None


@dataclass(frozen=True)
class BatteryReport:
    cases: Tuple[CaseReport, ...]

    @property
    def total_hits(self) -> int:
        return sum(case.hits for case in self.cases)

    @property
    def total_keys(self) -> int:
        return sum(case.total for case in self.cases)

    @property
    def all_satisfied(self) -> bool:
        return all(case.hits == case.total and case.error is None for case in self.cases)


def _require_kings(position: ChessPosition, which: str) -> None:
    for color in "wb":
        if not any(p.color == color and p.kind == "K" for p in position.pieces):
            raise FenError(f"{which}: missing {color!r} king")


def run_battery(cases: Sequence[BatteryCase], config: Optional[MatchConfig] = None) -> BatteryReport:
    """Match each case's networks and count satisfied key mappings.

    A case whose FENs fail to parse, lack a king, or whose key labels do
    not resolve is reported as an error (scoring 0 of its keys); the other
    cases still run.
    """
    config = config or MatchConfig()
    reports = []
    for case in cases:
        try:
            position_a = parse_fen(case.fen_a)
            position_b = parse_fen(case.fen_b)
            _require_kings(position_a, "fen_a")
            _require_kings(position_b, "fen_b")
            network_a = extract_chess_relations(position_a)
            network_b = extract_chess_relations(position_b)
            labels_a = network_a.label_index()
            labels_b = network_b.label_index()
            unresolved = [
                label
                for label, acceptable in case.key_mappings
                if label not in labels_a
                or any(target not in labels_b for target in acceptable)
            ]
            if unresolved:
                raise FenError(f"key labels do not resolve: {unresolved}")
        except (FenError, ValueError) as exc:
            reports.append(
                CaseReport(
                    name=case.name,
                    hits=0,
                    total=len(case.key_mappings),
                    raw_score=0.0,
                    normalized_score=0.0,
                    error=str(exc),
                )
            )
            continue

        result = match(network_a, network_b, config)
        mapping = result.assignment.mapping
        reverse_b = {idx: label for label, idx in labels_b.items()}
        outcomes = []
        for label, acceptable in case.key_mappings:
            target_index = mapping.get(labels_a[label])
            mapped_to = reverse_b.get(target_index) if target_index is not None else None
            outcomes.append(
                KeyOutcome(
                    label=label,
                    acceptable=tuple(acceptable),
                    mapped_to=mapped_to,
                    hit=mapped_to in acceptable,
                )
            )
        reports.append(
            CaseReport(
                name=case.name,
                hits=sum(1 for outcome in outcomes if outcome.hit),
                total=len(outcomes),
                raw_score=result.score.raw,
                normalized_score=result.score.normalized,
                outcomes=tuple(outcomes),
            )
        )
    return BatteryReport(tuple(reports))


def load_battery(path=None) -> list:
    """Read battery cases from a line-delimited file (default: shipped set)."""
    if path is None:
        from importlib.resources import files

        source = files("relmatch").joinpath("data/chess_battery.jsonl")
        text = source.read_text(encoding="utf-8")
    else:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    cases = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            record = json.loads(line)
            cases.append(
                BatteryCase(
                    name=record["name"],
                    fen_a=record["fen_a"],
                    fen_b=record["fen_b"],
                    key_mappings=tuple(
                        (label, tuple(acceptable)) for label, acceptable in record["key"]
                    ),
                )
            )
        except (KeyError, ValueError) as exc:
            raise FenError(f"battery line {lineno}: {exc}") from None
    return cases
