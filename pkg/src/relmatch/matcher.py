"""Assignment search between relational networks.

match() runs a seeded multi-restart hill climb. All restarts advance in
lockstep as rows of numpy arrays: the bilinear table G4[a,b,c,d] (score
contribution of mapping source a to target c and source b to target d)
is built once per network pair, and two running tables per restart hold
row/column contributions so that every candidate move's gain is available
as an array expression instead of a rescoring pass. The final raw score is
still recomputed from scratch through relational_score, so the incremental
bookkeeping can never silently drift.

brute_force_match() is the exact enumeration oracle for small instances,
batch_match() ranks many candidates per query, and prefilter_candidates()
prunes candidates by relation-profile signatures before full matching.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from relmatch.relnet import (
    Assignment,
    MatchScore,
    NetworkError,
    RelationalNetwork,
    normalize_score,
    relation_profile,
    relational_score,
    resolve_weights,
    signature_hash,
)

# Above this many G4 cells the table is not materialized; gathers fall back
# to contracting the per-type adjacency stacks on the fly.
_G4_CELL_LIMIT = 2**22

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class MatchConfig:
    """Search knobs. Defaults give the standard 32-restart deterministic run."""

    restarts: int = 32
    max_iters_per_restart: int = 1000
    seed: int = 0
    weights: Optional[object] = None
    top_k: int = 5

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters_per_restart < 1:
            raise ValueError("max_iters_per_restart must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit non-negative integer")


@dataclass(frozen=True)
class MatchResult:
    """Best assignment found, with its score and restart bookkeeping.

    cap_reached is True when any restart consumed its full iteration budget
    before converging (the oracle never climbs, so it reports False).
    """

    assignment: Assignment
    score: MatchScore
    restarts_used: int
    best_restart_index: int
    cap_reached: bool = False


@dataclass(frozen=True)
class RankedAnalogues:
    """Per-query ranking: top candidates by normalized score, descending."""

    query_id: str
    ranking: Tuple[Tuple[str, MatchResult], ...]
    errors: Tuple[Tuple[str, str], ...] = ()


def _degree_stacks(network: RelationalNetwork, n_types: int):
    """Per-entity out/in degree counts as (n_entities, n_types) arrays."""
    out_deg = np.zeros((network.n_entities, n_types), dtype=np.int64)
    in_deg = np.zeros((network.n_entities, n_types), dtype=np.int64)
    for src, dst, type_id in network.relations:
        out_deg[src, type_id] += 1
        in_deg[dst, type_id] += 1
    return out_deg, in_deg


def _adjacency_stack(network: RelationalNetwork, n_types: int) -> np.ndarray:
    stack = np.zeros((n_types, network.n_entities, network.n_entities))
    for src, dst, type_id in network.relations:
        stack[type_id, src, dst] = 1.0
    return stack


class _Quad:
    """The bilinear table G4[a,b,c,d] = sum_k w_k A_k[a,b] B_k[c,d].

    Materialized as a dense (s,s,t,t) array when small enough, otherwise
    kept virtual and contracted per gather.
    """

    def __init__(self, weighted_a: np.ndarray, b: np.ndarray) -> None:
        self.wa = weighted_a
        self.b = b
        self.s = weighted_a.shape[1]
        self.t = b.shape[1]
        cells = self.s * self.s * self.t * self.t
        if cells <= _G4_CELL_LIMIT:
            self.g4 = np.tensordot(weighted_a, b, axes=([0], [0]))
            self.flat = self.g4.reshape(-1)
        else:
            self.g4 = None
            self.flat = None
        # self_table[p, j] = G4[p, p, j, j]: score of the isolated pair p -> j.
        wa_diag = weighted_a.diagonal(axis1=1, axis2=2)
        b_diag = b.diagonal(axis1=1, axis2=2)
        self.self_table = np.einsum("kp,kj->pj", wa_diag, b_diag)

    def gather(self, i0, i1, i2, i3) -> np.ndarray:
        if self.g4 is not None:
            return self.g4[i0, i1, i2, i3]
        return (self.wa[:, i0, i1] * self.b[:, i2, i3]).sum(axis=0)

    def init_row_col(self, mapping: np.ndarray):
        """Full contribution tables for a batch of maximal assignments.

        row[r,p,c] = score of row p if source p sat at target c, everyone
        else staying at mapping[r]; col[r,p,c] is the column counterpart.
        """
        n_batch, s = mapping.shape
        t = self.t
        if self.g4 is not None:
            onehot = np.zeros((n_batch, s, t))
            onehot[np.arange(n_batch)[:, None], np.arange(s)[None, :], mapping] = 1.0
            flat = onehot.reshape(n_batch, s * t)
            by_row = self.g4.transpose(0, 2, 1, 3).reshape(s * t, s * t)
            by_col = self.g4.transpose(1, 3, 0, 2).reshape(s * t, s * t)
            row = (flat @ by_row.T).reshape(n_batch, s, t)
            col = (flat @ by_col.T).reshape(n_batch, s, t)
            return row, col
        chosen_cols = self.b[:, :, mapping]  # (k, t, batch, s)
        chosen_rows = self.b[:, mapping, :]  # (k, batch, s, t)
        row = np.einsum("kpq,kcrq->rpc", self.wa, chosen_cols)
        col = np.einsum("kqp,krqc->rpc", self.wa, chosen_rows)
        return row, col


def _take_pairwise(table: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    """table[r,p,mapping[r,q]] for all q, giving an (r,s,s) array."""
    n_batch, s, _ = table.shape
    idx = np.broadcast_to(mapping[:, None, :], (n_batch, s, s))
    return np.take_along_axis(table, idx, axis=2)


def _take_self(table: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    return np.take_along_axis(table, mapping[:, :, None], axis=2)[:, :, 0]


def _exchange_deltas(quad: _Quad, mapping, row, col, row_self, col_self) -> np.ndarray:
    """Score delta of swapping the targets of sources p and q, per restart.

    Entries with p >= q are set to -inf (the move is symmetric in p, q).
    Every term of the delta is the sum of a quantity and its (p, q)
    transpose, so the half-sum U is assembled first and symmetrized once.
    """
    s, t = quad.s, quad.t

    if quad.flat is not None:
        # Shared flat-index arithmetic: G4[a,b,c,d] sits at
        # a*s*t*t + b*t*t + c*t + d in the raveled table.
        stt = s * t * t
        tt = t * t
        src = np.arange(s)
        m_t = mapping * t
        diag_last = m_t + mapping  # m_p*t + m_p
        x1 = m_t[:, None, :] + mapping[:, :, None]  # m_q*t + m_p
        x2 = x1.swapaxes(1, 2)  # m_p*t + m_q
        pp = (src * (stt + tt)).reshape(1, s, 1)
        pq = (src[:, None] * stt + src[None, :] * tt)[None, :, :]
        dq = diag_last[:, None, :]

        a1 = quad.flat.take(pp + x1)
        a5 = quad.flat.take(pp + x2)
        a7 = quad.flat.take(pp + dq)
        a2 = quad.flat.take(pq + dq)
        a3 = quad.flat.take(pq + x2)
        a8 = quad.flat.take(pq + x1)
        a6 = quad.flat.take(pq.swapaxes(1, 2) + dq)
    else:
        p_grid = np.arange(s).reshape(1, s, 1)
        q_grid = np.arange(s).reshape(1, 1, s)
        m_p = mapping[:, :, None]
        m_q = mapping[:, None, :]
        a1 = quad.gather(p_grid, p_grid, m_q, m_p)
        a2 = quad.gather(p_grid, q_grid, m_q, m_q)
        a3 = quad.gather(p_grid, q_grid, m_p, m_q)
        a5 = quad.gather(p_grid, p_grid, m_p, m_q)
        a6 = quad.gather(q_grid, p_grid, m_q, m_q)
        a7 = quad.gather(p_grid, p_grid, m_q, m_q)
        a8 = quad.gather(p_grid, q_grid, m_q, m_p)
    a4 = quad.self_table[np.arange(s)[None, :], mapping]

    rc = _take_pairwise(row, mapping)
    cc = _take_pairwise(col, mapping)
    half = (
        rc
        + cc
        - row_self[:, :, None]
        - col_self[:, :, None]
        - a1
        - a2
        + a3
        + a4[:, :, None]
        - a5
        - a6
        + a7
        + a8
    )
    delta = half + half.swapaxes(1, 2)
    upper = np.triu(np.ones((s, s), dtype=bool), k=1)
    return np.where(upper[None, :, :], delta, _NEG_INF)


def _reassign_deltas(quad: _Quad, mapping, row, col, row_self, col_self) -> np.ndarray:
    """Score delta of moving source p to free target j; occupied j -> -inf."""
    n_batch, s = mapping.shape
    t = quad.t

    if quad.flat is not None:
        stt = s * t * t
        tt = t * t
        pp = (np.arange(s) * (stt + tt)).reshape(1, s, 1)
        j_times_t = (np.arange(t) * t).reshape(1, 1, t)
        j_plain = np.arange(t).reshape(1, 1, t)
        b1 = quad.flat.take(pp + j_times_t + mapping[:, :, None])
        b2 = quad.flat.take(pp + (mapping * t)[:, :, None] + j_plain)
    else:
        p_grid = np.arange(s).reshape(1, s, 1)
        j_grid = np.arange(t).reshape(1, 1, t)
        m_p = mapping[:, :, None]
        b1 = quad.gather(p_grid, p_grid, j_grid, m_p)
        b2 = quad.gather(p_grid, p_grid, m_p, j_grid)
    a4 = quad.self_table[np.arange(s)[None, :], mapping]

    delta = (
        row
        + col
        - row_self[:, :, None]
        - col_self[:, :, None]
        - b1
        - b2
        + quad.self_table[None, :, :]
        + a4[:, :, None]
    )
    occupied = np.zeros((n_batch, t), dtype=bool)
    occupied[np.arange(n_batch)[:, None], mapping] = True
    return np.where(occupied[:, None, :], _NEG_INF, delta)


def _apply_exchanges(quad: _Quad, mapping, row, col, idx, p_v, q_v) -> None:
    """Exchange targets of sources p_v and q_v in the given restarts."""
    s, t = quad.s, quad.t
    j_p = mapping[idx, p_v][:, None, None]
    j_q = mapping[idx, q_v][:, None, None]
    p_c = p_v[:, None, None]
    q_c = q_v[:, None, None]

    if quad.flat is not None:
        stt = s * t * t
        tt = t * t
        row_base = (np.arange(s) * stt).reshape(1, s, 1)
        col_base = (np.arange(s) * tt).reshape(1, s, 1)
        c_row = (np.arange(t) * t).reshape(1, 1, t)
        c_col = np.arange(t).reshape(1, 1, t)
        take = quad.flat.take
        row[idx] += (
            take(row_base + p_c * tt + c_row + j_q)
            - take(row_base + p_c * tt + c_row + j_p)
            + take(row_base + q_c * tt + c_row + j_p)
            - take(row_base + q_c * tt + c_row + j_q)
        )
        col[idx] += (
            take(p_c * stt + col_base + j_q * t + c_col)
            - take(p_c * stt + col_base + j_p * t + c_col)
            + take(q_c * stt + col_base + j_p * t + c_col)
            - take(q_c * stt + col_base + j_q * t + c_col)
        )
    else:
        p_grid = np.arange(s).reshape(1, s, 1)
        c_grid = np.arange(t).reshape(1, 1, t)
        row[idx] += (
            quad.gather(p_grid, p_c, c_grid, j_q)
            - quad.gather(p_grid, p_c, c_grid, j_p)
            + quad.gather(p_grid, q_c, c_grid, j_p)
            - quad.gather(p_grid, q_c, c_grid, j_q)
        )
        col[idx] += (
            quad.gather(p_c, p_grid, j_q, c_grid)
            - quad.gather(p_c, p_grid, j_p, c_grid)
            + quad.gather(q_c, p_grid, j_p, c_grid)
            - quad.gather(q_c, p_grid, j_q, c_grid)
        )
    mapping[idx, p_v] = j_q[:, 0, 0]
    mapping[idx, q_v] = j_p[:, 0, 0]


def _apply_reassigns(quad: _Quad, mapping, row, col, idx, p_v, j_v) -> None:
    """Move source p_v to the free target j_v in the given restarts."""
    s, t = quad.s, quad.t
    j_old = mapping[idx, p_v][:, None, None]
    j_new = j_v[:, None, None]
    p_c = p_v[:, None, None]

    if quad.flat is not None:
        stt = s * t * t
        tt = t * t
        row_base = (np.arange(s) * stt).reshape(1, s, 1) + p_c * tt
        col_base = p_c * stt + (np.arange(s) * tt).reshape(1, s, 1)
        c_row = (np.arange(t) * t).reshape(1, 1, t)
        c_col = np.arange(t).reshape(1, 1, t)
        take = quad.flat.take
        row[idx] += take(row_base + c_row + j_new) - take(row_base + c_row + j_old)
        col[idx] += take(col_base + j_new * t + c_col) - take(col_base + j_old * t + c_col)
    else:
        p_grid = np.arange(s).reshape(1, s, 1)
        c_grid = np.arange(t).reshape(1, 1, t)
        row[idx] += quad.gather(p_grid, p_c, c_grid, j_new) - quad.gather(
            p_grid, p_c, c_grid, j_old
        )
        col[idx] += quad.gather(p_c, p_grid, j_new, c_grid) - quad.gather(
            p_c, p_grid, j_old, c_grid
        )
    mapping[idx, p_v] = j_v


def _greedy_start(a: RelationalNetwork, b: RelationalNetwork, n_types: int) -> np.ndarray:
    """Maximal assignment claimed in order of descending profile overlap.

    Overlap of (i, j) is sum over types of min(out degrees) + min(in
    degrees); ties resolve by (i, j) ascending. Claiming identity pairs
    first makes self-matches start at the global optimum.
    """
    a_out, a_in = _degree_stacks(a, n_types)
    b_out, b_in = _degree_stacks(b, n_types)
    overlap = np.minimum(a_out[:, None, :], b_out[None, :, :]).sum(axis=2)
    overlap += np.minimum(a_in[:, None, :], b_in[None, :, :]).sum(axis=2)
    s, t = overlap.shape
    order = np.argsort(-overlap.ravel(), kind="stable")
    mapping = np.full(s, -1, dtype=np.int64)
    target_taken = np.zeros(t, dtype=bool)
    claimed = 0
    for flat in order:
        i, j = divmod(int(flat), t)
        if mapping[i] < 0 and not target_taken[j]:
            mapping[i] = j
            target_taken[j] = True
            claimed += 1
            if claimed == s:
                break
    return mapping


def _initial_mappings(
    a: RelationalNetwork, b: RelationalNetwork, config: MatchConfig, n_types: int
) -> np.ndarray:
    """One maximal assignment per restart: greedy first, then seeded random."""
    s, t = a.n_entities, b.n_entities
    mapping = np.empty((config.restarts, s), dtype=np.int64)
    mapping[0] = _greedy_start(a, b, n_types)
    for restart in range(1, config.restarts):
        rng = np.random.default_rng((int(config.seed), restart))
        src_order = rng.permutation(s)
        tgt_order = rng.permutation(t)
        mapping[restart, src_order] = tgt_order[:s]
    return mapping


def _climb(quad: _Quad, mapping: np.ndarray, cap: int, row: np.ndarray, col: np.ndarray):
    """Steepest-ascent hill climb, all restarts in lockstep.

    Per step and per active restart, the best positive-gain move wins;
    ties go to the lexicographically smallest (index, index) key, and
    exchange beats reassign on identical keys. Returns accumulated gains,
    iteration counts, and cap flags; mapping, row, and col are updated in
    place.
    """
    n_restarts, s = mapping.shape
    t = quad.t
    has_free = t > s
    gains = np.zeros(n_restarts)
    iters = np.zeros(n_restarts, dtype=np.int64)
    capped = np.zeros(n_restarts, dtype=bool)
    active = np.ones(n_restarts, dtype=bool)

    while True:
        over = active & (iters >= cap)
        capped |= over
        active &= ~over
        act = np.nonzero(active)[0]
        if act.size == 0:
            break

        m_act = mapping[act]
        row_act = row[act]
        col_act = col[act]
        row_self = _take_self(row_act, m_act)
        col_self = _take_self(col_act, m_act)

        if s >= 2:
            ex = _exchange_deltas(quad, m_act, row_act, col_act, row_self, col_self)
            ex_flat = ex.reshape(act.size, -1)
            ex_gain = ex_flat.max(axis=1)
            ex_idx = ex_flat.argmax(axis=1)
        else:
            ex_gain = np.full(act.size, _NEG_INF)
            ex_idx = np.zeros(act.size, dtype=np.int64)
        ex_p, ex_q = np.divmod(ex_idx, s)

        if has_free:
            re = _reassign_deltas(quad, m_act, row_act, col_act, row_self, col_self)
            re_flat = re.reshape(act.size, -1)
            re_gain = re_flat.max(axis=1)
            re_idx = re_flat.argmax(axis=1)
        else:
            re_gain = np.full(act.size, _NEG_INF)
            re_idx = np.zeros(act.size, dtype=np.int64)
        re_p, re_j = np.divmod(re_idx, t)

        # argmax over a row-major layout already yields the smallest key
        # among equal gains; across kinds, exchange wins ties on equal keys.
        use_ex = (ex_gain > re_gain) | (
            (ex_gain == re_gain)
            & ((ex_p < re_p) | ((ex_p == re_p) & (ex_q <= re_j)))
        )
        gain = np.where(use_ex, ex_gain, re_gain)
        improving = gain > 0.0

        active[act[~improving]] = False
        moved = act[improving]
        if moved.size == 0:
            continue
        gains[moved] += gain[improving]
        iters[moved] += 1

        ex_take = improving & use_ex
        if ex_take.any():
            _apply_exchanges(
                quad, mapping, row, col, act[ex_take], ex_p[ex_take], ex_q[ex_take]
            )
        re_take = improving & ~use_ex
        if re_take.any():
            _apply_reassigns(
                quad, mapping, row, col, act[re_take], re_p[re_take], re_j[re_take]
            )

    return gains, iters, capped


def match(
    a: RelationalNetwork, b: RelationalNetwork, config: Optional[MatchConfig] = None
) -> MatchResult:
    """Best injective partial assignment from a's entities to b's.

    Deterministic given (inputs, config.seed). The search itself anchors on
    the smaller network (score symmetry makes the orientation free), but the
    returned assignment and scores are in caller orientation, and score.raw
    is recomputed via relational_score rather than trusted from the climb.
    """
    config = config or MatchConfig()
    if a.registry != b.registry:
        raise NetworkError("registry mismatch between networks")
    if a.n_entities == 0 or b.n_entities == 0:
        raise NetworkError("empty network")
    weights = resolve_weights(a.registry, config.weights)

    transposed = a.n_entities > b.n_entities
    src, dst = (b, a) if transposed else (a, b)

    n_types = len(a.registry)
    stack_src = _adjacency_stack(src, n_types)
    stack_dst = _adjacency_stack(dst, n_types)
    weighted = stack_src * np.asarray(weights)[:, None, None]
    quad = _Quad(weighted, stack_dst)

    mapping = _initial_mappings(src, dst, config, n_types)
    row, col = quad.init_row_col(mapping)
    scores = _take_self(row, mapping).sum(axis=1)
    gains, iters, capped = _climb(quad, mapping, config.max_iters_per_restart, row, col)
    scores += gains

    best = int(np.argmax(scores))
    pairs = [(i, int(mapping[best, i])) for i in range(src.n_entities)]
    if transposed:
        pairs = [(t, s) for s, t in pairs]
    assignment = Assignment(pairs)

    raw = relational_score(a, b, assignment, weights)
    score = MatchScore.of(raw, a.n_entities, b.n_entities)
    return MatchResult(
        assignment=assignment,
        score=score,
        restarts_used=config.restarts,
        best_restart_index=best,
        cap_reached=bool(capped.any()),
    )


def brute_force_match(
    a: RelationalNetwork,
    b: RelationalNetwork,
    weights=None,
    cap: int = 8,
) -> MatchResult:
    """Exact optimum by enumerating every maximal injective assignment.

    Monotonicity (non-negative weights) means maximal assignments dominate,
    so only injections of the smaller side are enumerated; the count still
    grows as P(max_side, min_side), hence the hard cap on the smaller side.
    Returns the lexicographically first optimum; restart fields are zeroed.
    """
    if a.registry != b.registry:
        raise NetworkError("registry mismatch between networks")
    if a.n_entities == 0 or b.n_entities == 0:
        raise NetworkError("empty network")
    small = min(a.n_entities, b.n_entities)
    if small > cap:
        raise NetworkError(
            f"brute force refused: min(n_source, n_target) = {small} exceeds cap {cap}"
        )
    per_type = resolve_weights(a.registry, weights)
    a_rel = a.relations
    b_set = b.relation_set

    best_score = _NEG_INF
    best_pairs: Optional[list] = None
    if a.n_entities <= b.n_entities:
        for perm in itertools.permutations(range(b.n_entities), a.n_entities):
            total = 0.0
            for src_i, dst_i, type_id in a_rel:
                if (perm[src_i], perm[dst_i], type_id) in b_set:
                    total += per_type[type_id]
            if total > best_score:
                best_score = total
                best_pairs = [(i, perm[i]) for i in range(a.n_entities)]
    else:
        for perm in itertools.permutations(range(a.n_entities), b.n_entities):
            table = {perm[j]: j for j in range(b.n_entities)}
            total = 0.0
            for src_i, dst_i, type_id in a_rel:
                mapped_src = table.get(src_i)
                if mapped_src is None:
                    continue
                mapped_dst = table.get(dst_i)
                if mapped_dst is None:
                    continue
                if (mapped_src, mapped_dst, type_id) in b_set:
                    total += per_type[type_id]
            if total > best_score:
                best_score = total
                best_pairs = [(perm[j], j) for j in range(b.n_entities)]

    assignment = Assignment(best_pairs or [])
    raw = relational_score(a, b, assignment, weights)
    return MatchResult(
        assignment=assignment,
        score=MatchScore.of(raw, a.n_entities, b.n_entities),
        restarts_used=0,
        best_restart_index=0,
        cap_reached=False,
    )


def _with_ids(items: Sequence) -> list:
    """Normalize networks or (id, network) pairs to (str id, network) pairs."""
    out = []
    for position, item in enumerate(items):
        if isinstance(item, RelationalNetwork):
            out.append((str(position), item))
        else:
            item_id, network = item
            out.append((str(item_id), network))
    return out


def batch_match(
    queries: Sequence, candidates: Sequence, config: Optional[MatchConfig] = None
) -> list:
    """match() every query against every candidate; keep top_k per query.

    Each pair runs under the same config (and so the same seed), making the
    results identical to independent match() calls in any evaluation order.
    Per-pair failures are collected on the query's RankedAnalogues instead
    of aborting the batch.
    """
    config = config or MatchConfig()
    named_queries = _with_ids(queries)
    named_candidates = _with_ids(candidates)
    results = []
    for query_id, query in named_queries:
        scored = []
        errors = []
        for candidate_id, candidate in named_candidates:
            try:
                scored.append((candidate_id, match(query, candidate, config)))
            except NetworkError as exc:
                errors.append((candidate_id, str(exc)))
        scored.sort(key=lambda item: (-item[1].score.normalized, item[0]))
        results.append(
            RankedAnalogues(
                query_id=query_id,
                ranking=tuple(scored[: config.top_k]),
                errors=tuple(errors),
            )
        )
    return results


def _signature_multiset(network: RelationalNetwork) -> Counter:
    return Counter(
        signature_hash(relation_profile(network, i)) for i in range(network.n_entities)
    )


def prefilter_candidates(
    query: RelationalNetwork, candidates: Sequence, budget: int
) -> list:
    """Keep the `budget` candidates whose signature multisets overlap most.

    Overlap is the multiset intersection size of per-entity profile hashes;
    ties keep the earlier candidate. Returns candidates in rank order, in
    whatever form (network or (id, network)) they came in.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    query_sig = _signature_multiset(query)
    ranked = []
    for position, item in enumerate(candidates):
        network = item if isinstance(item, RelationalNetwork) else item[1]
        overlap = sum((query_sig & _signature_multiset(network)).values())
        ranked.append((-overlap, position, item))
    ranked.sort(key=lambda row: row[:2])
    return [item for _, _, item in ranked[:budget]]


def write_results(
    path, results: Iterable[RankedAnalogues], header: Optional[str] = None
) -> None:
    """Write rankings as line-delimited JSON records.

    `header`, if given, becomes a leading '#' comment line that readers of
    the format skip.
    """
    with open(path, "w", encoding="utf-8") as handle:
        if header is not None:
            comment = header if header.startswith("#") else "# " + header
            handle.write(comment + "\n")
        for result in results:
            record = {
                "query": result.query_id,
                "ranking": [
                    {
                        "candidate": candidate_id,
                        "raw": match_result.score.raw,
                        "normalized": match_result.score.normalized,
                        "assignment": [list(pair) for pair in match_result.assignment.pairs],
                    }
                    for candidate_id, match_result in result.ranking
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


def read_results(path) -> list:
    """Read a results file back as raw record dicts ('#' lines skipped)."""
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise NetworkError(f"{path}:{lineno}: bad JSON: {exc}") from None
    return records
