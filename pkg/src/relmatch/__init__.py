"""Relational analogy matching and cross-area tactic transfer mining."""

from relmatch.chess import (
    CHESS_REGISTRY,
    CHESS_TYPES,
    BatteryCase,
    BatteryReport,
    CaseReport,
    ChessPosition,
    FenError,
    Piece,
    cover_squares,
    extract_chess_relations,
    geometric_destinations,
    legal_moves,
    load_battery,
    parse_fen,
    run_battery,
)
from relmatch.leanstates import (
    PROOF_REGISTRY,
    PROOF_TYPES,
    CorpusEntry,
    ParseError,
    ProofState,
    Shortcut,
    TacticSchema,
    Unparseable,
    derive_area,
    extract_proof_relations,
    parse_proof_state,
    parse_schema,
    read_corpus,
    schema_key,
    serialize_proof_state,
    write_corpus,
)
from relmatch.matcher import (
    MatchConfig,
    MatchResult,
    RankedAnalogues,
    batch_match,
    brute_force_match,
    match,
    prefilter_candidates,
    read_results,
    write_results,
)
from relmatch.relnet import (
    Assignment,
    Entity,
    MatchScore,
    NetworkError,
    RelationProfile,
    RelationType,
    RelationalNetwork,
    TypeRegistry,
    build_network,
    normalize_score,
    read_networks,
    relation_profile,
    relational_score,
    resolve_weights,
    signature_hash,
    write_networks,
)
from relmatch.stats import (
    TALLY_BUCKETS,
    AreaStats,
    CandidateFilters,
    PairScore,
    StatsError,
    TransferCandidate,
    ZTable,
    aggregate,
    pair_potential,
    potential_of,
    transfer_candidates,
    zscore_table,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AreaStats",
    "BatteryCase",
    "BatteryReport",
    "CHESS_REGISTRY",
    "CHESS_TYPES",
    "CandidateFilters",
    "CaseReport",
    "ChessPosition",
    "CorpusEntry",
    "Entity",
    "FenError",
    "MatchConfig",
    "MatchResult",
    "MatchScore",
    "NetworkError",
    "PROOF_REGISTRY",
    "PROOF_TYPES",
    "PairScore",
    "ParseError",
    "Piece",
    "ProofState",
    "RankedAnalogues",
    "RelationProfile",
    "RelationType",
    "RelationalNetwork",
    "Shortcut",
    "StatsError",
    "TALLY_BUCKETS",
    "TacticSchema",
    "TransferCandidate",
    "TypeRegistry",
    "Unparseable",
    "ZTable",
    "aggregate",
    "batch_match",
    "brute_force_match",
    "build_network",
    "cover_squares",
    "derive_area",
    "extract_chess_relations",
    "extract_proof_relations",
    "geometric_destinations",
    "legal_moves",
    "load_battery",
    "match",
    "normalize_score",
    "pair_potential",
    "parse_fen",
    "parse_proof_state",
    "parse_schema",
    "potential_of",
    "prefilter_candidates",
    "read_corpus",
    "read_networks",
    "read_results",
    "relation_profile",
    "relational_score",
    "resolve_weights",
    "run_battery",
    "schema_key",
    "serialize_proof_state",
    "signature_hash",
    "transfer_candidates",
    "write_corpus",
    "write_networks",
    "write_results",
    "zscore_table",
    "__version__",
]
