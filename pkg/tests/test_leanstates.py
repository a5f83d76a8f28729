"""Tactic schema parsing, areas, proof states, and their networks."""

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relmatch.leanstates import (
    CorpusEntry,
    PROOF_REGISTRY,
    PROOF_TYPES,
    ParseError,
    ProofState,
    Shortcut,
    TacticSchema,
    Unparseable,
    derive_area,
    extract_proof_relations,
    known_tactic_heads,
    parse_proof_state,
    parse_schema,
    read_corpus,
    schema_key,
    serialize_proof_state,
    write_corpus,
)

GOLDEN_PATH = Path(__file__).parent / "data" / "parser_golden.tsv"


def load_golden():
    rows = []
    for line in GOLDEN_PATH.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        tactic, kind, head, arity, has_with, uses_lemma = line.split("\t")
        rows.append((tactic, kind, head, arity, has_with, uses_lemma))
    return rows


GOLDEN = load_golden()


class TestParseSchema:
    def test_golden_set_has_twenty_rows(self):
        assert len(GOLDEN) == 20

    @pytest.mark.parametrize(
        "tactic, kind, head, arity, has_with, uses_lemma",
        GOLDEN,
        ids=[row[0][:32] for row in GOLDEN],
    )
    def test_golden_rows(self, tactic, kind, head, arity, has_with, uses_lemma):
        result = parse_schema(tactic)
        if kind == "schema":
            assert isinstance(result, TacticSchema)
            assert result.head == head
            assert result.arity == int(arity)
            assert result.has_with == bool(int(has_with))
            assert result.uses_lemma == bool(int(uses_lemma))
        elif kind == "shortcut":
            assert result == Shortcut(head)
        else:
            assert isinstance(result, Unparseable)

    def test_table_rows_zero_six_eight(self):
        listing = parse_schema(
            "filter_upwards [h_eq s f hf, h_inter_eq s f hf, h'] "
            "with omega h_eq h_inter_eq h'"
        )
        assert (listing.head, listing.has_with, listing.arity) == ("filter_upwards", True, 1)
        row6 = parse_schema("any_goals rfl")
        assert (row6.head, row6.has_with, row6.arity) == ("any_goals", False, 1)
        row8 = parse_schema("by_cases hι : Nonempty ι")
        assert (row8.head, row8.has_with, row8.arity) == ("by_cases", False, 4)

    def test_linebreak_in_tactic_is_plain_whitespace(self):
        folded = parse_schema(
            "filter_upwards [h_eq s f hf, h_inter_eq s f hf, h']\n"
            "  with omega h_eq h_inter_eq h'"
        )
        assert folded == parse_schema(
            "filter_upwards [h_eq s f hf, h_inter_eq s f hf, h'] "
            "with omega h_eq h_inter_eq h'"
        )

    def test_with_inside_brackets_does_not_count(self):
        result = parse_schema("simp [with_top.foo]")
        assert result.has_with is False
        assert result.uses_lemma is True
        assert result.arity == 1

    def test_bracket_inside_angles_is_not_lemma_use(self):
        result = parse_schema("obtain ⟨x, [y]⟩ := h")
        assert result.uses_lemma is False

    def test_known_head_list_contains_table_heads(self):
        heads = known_tactic_heads()
        assert {
            "filter_upwards", "congr", "fun_prop", "ext1", "all_goals",
            "lift", "any_goals", "measurability", "by_cases", "congrm",
        } <= heads

    def test_schema_key_format(self):
        schema = parse_schema("rw [h] at h'")
        assert schema_key(schema) == "rw|3|0|1"

    @given(st.text(min_size=0, max_size=60))
    @settings(max_examples=200)
    def test_classification_is_total(self, text):
        result = parse_schema(text)
        assert isinstance(result, (TacticSchema, Shortcut, Unparseable))
        if isinstance(result, TacticSchema):
            assert result.head
            assert not any(c.isspace() or c in "()[]{}⟨⟩" for c in result.head)
            assert result.arity >= 0


class TestDeriveArea:
    def test_examples(self):
        assert derive_area("Mathlib/Probability/Kernel/Basic.lean") == "Mathlib.Probability"
        assert derive_area("Mathlib/Tactic/Linarith/Frontend.lean") == "Mathlib.Tactic"

    def test_two_component_path_strips_extension(self):
        assert derive_area("Mathlib/Foo.lean") == "Mathlib.Foo"

    def test_short_path_is_error(self):
        with pytest.raises(ParseError, match="non-area path"):
            derive_area("Mathlib")

    @given(
        st.lists(
            st.text(
                alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), max_codepoint=0x24F),
                min_size=1,
                max_size=8,
            ),
            min_size=2,
            max_size=6,
        )
    )
    @settings(max_examples=150)
    def test_always_two_dotted_components(self, components):
        area = derive_area("/".join(components))
        assert len(area.split(".")) == 2


class TestProofState:
    def test_parse_examples(self):
        state = parse_proof_state("h : x = y\n⊢ y = x")
        assert state.hypotheses == (("h", "x = y"),)
        assert state.goals == ("y = x",)
        assert parse_proof_state("⊢ True") == ProofState((), ("True",))

    def test_duplicate_hypothesis_name(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_proof_state("h : A\nh : B\n⊢ A")

    def test_missing_goal(self):
        with pytest.raises(ParseError, match="goal"):
            parse_proof_state("h : A")
        with pytest.raises(ParseError, match="goal"):
            ProofState((("h", "A"),), ())

    def test_hypothesis_after_goal(self):
        with pytest.raises(ParseError, match="after goals"):
            parse_proof_state("⊢ A\nh : B")

    def test_bad_line(self):
        with pytest.raises(ParseError, match="expected"):
            parse_proof_state("garbage line\n⊢ A")

    @given(
        st.lists(
            st.tuples(
                st.text(alphabet="abcdefgh₁₂'", min_size=1, max_size=6),
                st.text(alphabet="abcxyz∀∃→=↔ ()", min_size=1, max_size=20).map(str.strip).filter(bool),
            ),
            max_size=5,
            unique_by=lambda pair: pair[0],
        ),
        st.lists(
            st.text(alphabet="abcxyz∀∃→=↔ ()", min_size=1, max_size=20).map(str.strip).filter(bool),
            min_size=1,
            max_size=3,
        ),
    )
    @settings(max_examples=150)
    def test_serialize_round_trip(self, hyps, goals):
        state = ProofState(tuple(hyps), tuple(goals))
        assert parse_proof_state(serialize_proof_state(state)) == state


def triples(network):
    labels = [e.label for e in network.entities]
    return {
        (labels[i], labels[j], network.registry.label_of(t))
        for (i, j, t) in network.relations
    }


class TestExtractProofRelations:
    def test_exact_match_example(self):
        network = extract_proof_relations(ProofState((("h", "a = b"),), ("a = b",)))
        found = triples(network)
        assert ("h", "h", "equality") in found
        assert ("⊢0", "⊢0", "equality") in found
        assert ("h", "⊢0", "fit/apply") in found
        assert ("⊢0", "⊢0", "lemma-needed") not in found

    def test_reflexive_goal(self):
        network = extract_proof_relations(ProofState((), ("x = x",)))
        found = triples(network)
        assert ("⊢0", "⊢0", "reflexive") in found
        assert ("⊢0", "⊢0", "equality") in found

    def test_bidirectional_without_head_match(self):
        network = extract_proof_relations(ProofState((("h", "P ↔ Q"),), ("Q",)))
        found = triples(network)
        assert ("h", "h", "bidirectional") in found
        assert ("h", "⊢0", "head-match") not in found
        assert ("⊢0", "⊢0", "lemma-needed") in found

    def test_rewrite_side_occurs_in_goal(self):
        network = extract_proof_relations(
            ProofState((("h", "a = b"),), ("f a ≤ c",))
        )
        found = triples(network)
        assert ("h", "⊢0", "rewrite") in found
        assert ("⊢0", "⊢0", "lemma-needed") not in found

    def test_rewrite_needs_token_run_not_substring(self):
        # "ab" contains "a" as characters but not as a token
        network = extract_proof_relations(ProofState((("h", "a = b"),), ("ab ≤ c",)))
        assert ("h", "⊢0", "rewrite") not in triples(network)

    def test_structure_is_symmetric(self):
        network = extract_proof_relations(
            ProofState(
                (("h1", "∀ x, P x → Q x"), ("h2", "∀ y, R y → S y")),
                ("True",),
            )
        )
        found = triples(network)
        assert ("h1", "h2", "structure") in found
        assert ("h2", "h1", "structure") in found

    def test_witness_into_existential_goal(self):
        network = extract_proof_relations(
            ProofState((("h", "P a"),), ("∃ x, P a ∧ Q x",))
        )
        assert ("h", "⊢0", "witness") in triples(network)

    def test_simp_and_decidable_heads(self):
        network = extract_proof_relations(ProofState((), ("True", "Decidable p")))
        found = triples(network)
        assert ("⊢0", "⊢0", "kernel/simp") in found
        assert ("⊢1", "⊢1", "decidable") in found

    def test_head_match_on_shared_first_identifier(self):
        network = extract_proof_relations(
            ProofState((("h", "Continuous f"),), ("Continuous (f ∘ g)",))
        )
        assert ("h", "⊢0", "head-match") in triples(network)

    def test_entity_order_and_kinds(self):
        network = extract_proof_relations(
            ProofState((("h2", "A"), ("h1", "B")), ("A", "B"))
        )
        assert [e.label for e in network.entities] == ["h2", "h1", "⊢0", "⊢1"]
        assert [e.kind for e in network.entities] == ["hyp", "hyp", "goal", "goal"]

    def test_registry_is_fourteen_slots(self):
        assert len(PROOF_TYPES) == 14
        assert PROOF_REGISTRY.labels[-3:] == ("reserved-11", "reserved-12", "reserved-13")

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["h", "h'", "hx", "h₁", "hμ"]),
                st.sampled_from(
                    ["a = b", "x = x", "P ↔ Q", "∀ x, P x", "∃ y, Q y",
                     "Continuous f", "True", "f a ≤ c", "Nat"]
                ),
            ),
            max_size=4,
            unique_by=lambda pair: pair[0],
        ),
        st.lists(
            st.sampled_from(
                ["a = b", "x = x", "P ↔ Q", "∀ x, P x", "∃ y, P a ∧ Q y",
                 "Continuous (f ∘ g)", "True", "Decidable p", "f a ≤ c"]
            ),
            min_size=1,
            max_size=3,
        ),
    )
    @settings(max_examples=150)
    def test_only_named_types_and_equality_invariant(self, hyps, goals):
        state = ProofState(tuple(hyps), tuple(goals))
        network = extract_proof_relations(state)
        emitted = {network.registry.label_of(t) for (_, _, t) in network.relations}
        assert emitted <= set(PROOF_TYPES[:11])
        found = triples(network)
        for name, type_text in hyps:
            if type_text in ("a = b", "x = x"):
                assert (name, name, "equality") in found


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        entries = [
            CorpusEntry("e1", "rfl", "Mathlib/Order/Basic.lean",
                        ProofState((("h", "x = y"),), ("y = x",))),
            CorpusEntry("e2", "hx"),
            CorpusEntry("e3", "simp", source_file="Mathlib/Data/Nat/Basic.lean"),
        ]
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, entries)
        assert read_corpus(path) == entries

    def test_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('# header\n{"id": "a", "tactic": "rfl"}\n', encoding="utf-8")
        assert read_corpus(path) == [CorpusEntry("a", "rfl")]

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a", "tactic": "rfl"}\nnot json\n', encoding="utf-8")
        with pytest.raises(ParseError, match=r":2:"):
            read_corpus(path)

    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a"}\n', encoding="utf-8")
        with pytest.raises(ParseError, match=r":1:"):
            read_corpus(path)

    @pytest.mark.parametrize("record, message", [
        ('{"id": "a", "tactic": "rfl", "state": "h : p\\n|- q"}',
         "state must be an object"),
        ('{"id": "a", "tactic": "rfl", "state": {"hyps": "h : p"}}',
         "must be arrays"),
        ('{"id": "a", "tactic": "rfl", "state": {"hyps": [["h"]]}}',
         "string pair"),
        ('{"id": "a", "tactic": "rfl", "state": {"goals": [1]}}',
         "goal must be a string"),
        ('{"id": "a", "tactic": 5}', "tactic must be a string"),
        ('{"id": "a", "tactic": "rfl", "source_file": 7}',
         "source_file must be a string"),
        ('{"tactic": "rfl"}', "missing the id"),
        ('["id", "tactic"]', "not a JSON object"),
    ])
    def test_malformed_record_shapes_are_parse_errors(
        self, tmp_path, record, message
    ):
        path = tmp_path / "corpus.jsonl"
        path.write_text(record + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match=message):
            read_corpus(path)
