"""Command-line driver: config handling, reports, exit codes, determinism."""

import json

import pytest

from relmatch.cli import (
    CliError,
    WhyReportTemplate,
    build_parser,
    load_config,
    main,
    resolve_config,
)
from relmatch.matcher import read_results
from relmatch.relnet import (
    Assignment,
    TypeRegistry,
    build_network,
    relational_score,
    write_networks,
)

AREAS = (
    "Mathlib/Probability/Basic.lean",
    "Mathlib/Order/Lattice.lean",
    "Mathlib/Topology/Basic.lean",
    "Mathlib/Algebra/Group.lean",
)

STATE = {"hyps": [["h", "a = b"], ["hx", "P a"]], "goals": ["P b"]}


def write_corpus_file(path, extra_lines=()):
    """A 24-entry 4-area corpus: rfl dominates Probability, intro the rest."""
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        handle.write("# test corpus\n")
        for i, area in enumerate(AREAS):
            for j in range(6):
                tactic = "rfl" if (i == 0 and j < 4) else "intro x"
                record = {
                    "id": f"e{count}",
                    "tactic": tactic,
                    "source_file": area,
                    "state": STATE,
                }
                handle.write(json.dumps(record) + "\n")
                count += 1
        for line in extra_lines:
            handle.write(line + "\n")
    return path


@pytest.fixture
def corpus(tmp_path):
    return write_corpus_file(tmp_path / "corpus.jsonl")


def toy_network(k):
    registry = TypeRegistry(("likes", "sends"))
    entities = [f"n{i}" for i in range(4)]
    relations = [
        (0, 1, "likes"),
        (1, 2, "sends"),
        (2, 3, "likes"),
        (k % 4, (k + 1) % 4, "sends"),
    ]
    return build_network(entities, relations, registry)


def read_lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def body_of(path):
    """File content without the timestamp header line."""
    lines = read_lines(path)
    assert lines[0].startswith("# generated ")
    return lines[1:]


class TestConfig:
    def test_load_config_parses_every_key(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text(
            "# settings\n"
            "corpus = corpus.jsonl\n"
            "out_dir = reports\n"
            "universe = A, B, C\n"
            "excluded_sources = X\n"
            "excluded_targets =\n"
            "restarts = 8\n"
            "max_iters_per_restart = 50\n"
            "seed = 7\n"
            "top_k = 2\n"
            "format = csv\n"
            "plots = no\n"
        )
        settings = load_config(path)
        assert settings["universe"] == ("A", "B", "C")
        assert settings["excluded_targets"] == ()
        assert settings["restarts"] == 8
        assert settings["report_format"] == "csv"
        assert settings["plots"] is False

    def test_unknown_key_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed = 1\nwhatever = 3\n")
        with pytest.raises(CliError, match=r"cfg.txt:2: unknown key 'whatever'"):
            load_config(path)

    def test_bad_value_and_bad_line_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed = lots\n")
        with pytest.raises(CliError, match="bad value for seed"):
            load_config(path)
        path.write_text("just some words\n")
        with pytest.raises(CliError, match="expected key=value"):
            load_config(path)

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed = 3\nout_dir = from_config\n")
        parser = build_parser()
        args = parser.parse_args(
            ["battery", "--config", str(path), "--seed", "9"]
        )
        cfg = resolve_config(args)
        assert cfg.seed == 9
        assert cfg.out_dir.name == "from_config"

    def test_global_flags_accepted_in_either_position(self):
        parser = build_parser()
        before = resolve_config(parser.parse_args(["--seed", "7", "battery"]))
        after = resolve_config(parser.parse_args(["battery", "--seed", "7"]))
        assert before.seed == after.seed == 7

    def test_paths_resolved_absolute(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        parser = build_parser()
        cfg = resolve_config(parser.parse_args(["schemas", "--corpus", "c.jsonl"]))
        assert cfg.corpus.is_absolute()
        assert cfg.out_dir.is_absolute()


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["match", "--queries", "q", "--targets", "t", "--top-k", "0"],
            ["match", "--queries", "q", "--targets", "t", "--restarts", "0"],
            ["candidates", "--corpus", "c", "--source", "A", "--target", "A"],
            ["schemas"],
            ["no-such-command"],
        ],
    )
    def test_exit_code_2(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == 2


class TestSchemas:
    def test_census_matches_hand_count(self, corpus, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["schemas", "--corpus", str(corpus), "--out-dir", str(out)]) == 0
        body = body_of(out / "schemas.tsv")
        assert body[0] == "schema\tcount\tareas_present"
        assert body[1] == "intro|1|0|0\t20\t4"
        assert body[2] == "rfl|0|0|0\t4\t1"
        assert "# tally included 24" in body
        assert "# tally shortcut 0" in body
        assert (out / "schemas.png").exists()

    def test_malformed_lines_warn_but_do_not_abort(self, tmp_path, capsys):
        corpus = write_corpus_file(
            tmp_path / "corpus.jsonl",
            extra_lines=[
                "not json at all",
                '{"tactic": "rfl"}',
                '{"id": "s", "tactic": "rfl", "state": "h : p |- q"}',
            ],
        )
        out = tmp_path / "out"
        assert main(["schemas", "--corpus", str(corpus), "--out-dir", str(out)]) == 0
        err = capsys.readouterr().err
        assert "corpus.jsonl:26: bad JSON" in err
        assert "corpus.jsonl:27: record is missing the id field" in err
        assert "corpus.jsonl:28: state must be an object" in err

    def test_shortcut_only_corpus_yields_empty_census(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        with corpus.open("w") as handle:
            for i in range(3):
                handle.write(json.dumps({"id": str(i), "tactic": "hx", "source_file": AREAS[0]}) + "\n")
        out = tmp_path / "out"
        assert main(["schemas", "--corpus", str(corpus), "--out-dir", str(out)]) == 0
        body = body_of(out / "schemas.tsv")
        assert body[0] == "schema\tcount\tareas_present"
        assert body[1] == "# tally included 0"
        assert "# tally shortcut 3" in body

    def test_empty_corpus_is_a_data_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("")
        assert main(["schemas", "--corpus", str(corpus)]) == 3
        assert "no valid entries" in capsys.readouterr().err

    def test_csv_format_and_no_plot(self, corpus, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("format = csv\n")
        out = tmp_path / "out"
        argv = [
            "schemas", "--corpus", str(corpus), "--out-dir", str(out),
            "--config", str(cfg), "--no-plot",
        ]
        assert main(argv) == 0
        body = body_of(out / "schemas.csv")
        assert body[0] == "schema,count,areas_present"
        assert not (out / "schemas.png").exists()


class TestStatsCommands:
    def test_zscores_report_covers_universe(self, corpus, tmp_path):
        out = tmp_path / "out"
        assert main(["zscores", "--corpus", str(corpus), "--out-dir", str(out)]) == 0
        body = body_of(out / "zscores.tsv")
        assert body[0] == "area\tschema\tcount\tfreq\tz"
        # 4 areas x 2 schemas, implicit zeros included
        assert len(body) == 1 + 8
        assert (out / "zscores.png").exists()

    def test_candidates_excluded_target_names_the_rule(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        with corpus.open("w") as handle:
            for i, area in enumerate(AREAS + ("Mathlib/Tactic/Ring.lean",)):
                handle.write(json.dumps({"id": str(i), "tactic": "rfl", "source_file": area}) + "\n")
        argv = [
            "candidates", "--corpus", str(corpus), "--out-dir", str(tmp_path),
            "--source", "Mathlib.Probability", "--target", "Mathlib.Tactic",
        ]
        assert main(argv) == 3
        assert "target-area exclusion rule" in capsys.readouterr().err

    def test_candidates_report_single_row(self, tmp_path):
        # rfl dominates Source, shows up in two more areas (so it is present
        # in >= 3), and never occurs in Target; intro pads every area.
        corpus = tmp_path / "corpus.jsonl"
        rows = []
        for area, tactics in (
            ("Mathlib/Source/A.lean", ["rfl"] * 9 + ["intro x"]),
            ("Mathlib/Target/B.lean", ["intro x"] * 10),
            ("Mathlib/Other/C.lean", ["rfl"] + ["intro x"] * 9),
            ("Mathlib/Fourth/D.lean", ["rfl"] + ["intro x"] * 9),
            ("Mathlib/Fifth/E.lean", ["intro x"] * 10),
            ("Mathlib/Sixth/F.lean", ["intro x"] * 10),
        ):
            rows += [{"tactic": t, "source_file": area} for t in tactics]
        with corpus.open("w") as handle:
            for i, row in enumerate(rows):
                handle.write(json.dumps({"id": str(i), **row}) + "\n")
        out = tmp_path / "out"
        argv = [
            "candidates", "--corpus", str(corpus), "--out-dir", str(out),
            "--source", "Mathlib.Source", "--target", "Mathlib.Target",
        ]
        assert main(argv) == 0
        body = body_of(out / "candidates.tsv")
        assert len(body) == 2
        assert body[1].startswith("rfl|0|0|0\tMathlib.Source\tMathlib.Target\t")
        assert "\tABSENT\t" in body[1]

    def test_pairs_report_ranks_all_admissible_pairs(self, corpus, tmp_path):
        out = tmp_path / "out"
        assert main(["pairs", "--corpus", str(corpus), "--out-dir", str(out)]) == 0
        body = body_of(out / "pairs.tsv")
        assert body[0] == "source\ttarget\tpotential\tcontributors"
        assert len(body) == 1 + 4 * 3


class TestMatchCommand:
    def test_single_pair_ranking_revalidates(self, tmp_path):
        queries = tmp_path / "queries.jsonl"
        targets = tmp_path / "targets.jsonl"
        write_networks(queries, [("q0", toy_network(0))])
        write_networks(targets, [("t0", toy_network(0))])
        out = tmp_path / "out"
        argv = ["match", "--queries", str(queries), "--targets", str(targets),
                "--out-dir", str(out)]
        assert main(argv) == 0
        records = read_results(out / "matches.jsonl")
        assert len(records) == 1
        ranking = records[0]["ranking"]
        assert len(ranking) == 1
        best = ranking[0]
        score = relational_score(
            toy_network(0), toy_network(0), Assignment(best["assignment"])
        )
        assert score == best["raw"] == 4.0

    def test_rankings_are_top_k_and_non_increasing(self, tmp_path):
        queries = tmp_path / "queries.jsonl"
        targets = tmp_path / "targets.jsonl"
        write_networks(queries, [(f"q{k}", toy_network(k)) for k in range(2)])
        write_networks(targets, [(f"t{k}", toy_network(k)) for k in range(6)])
        out = tmp_path / "out"
        argv = ["match", "--queries", str(queries), "--targets", str(targets),
                "--out-dir", str(out), "--top-k", "3"]
        assert main(argv) == 0
        records = read_results(out / "matches.jsonl")
        assert [r["query"] for r in records] == ["q0", "q1"]
        for record in records:
            scores = [row["normalized"] for row in record["ranking"]]
            assert len(scores) == 3
            assert scores == sorted(scores, reverse=True)
        assert (out / "matches.png").exists()

    def test_corpus_files_are_auto_extracted(self, corpus, tmp_path, capsys):
        out = tmp_path / "out"
        argv = ["match", "--queries", str(corpus), "--targets", str(corpus),
                "--out-dir", str(out), "--top-k", "1"]
        assert main(argv) == 0
        records = read_results(out / "matches.jsonl")
        assert len(records) == 24
        # identical states, so the best analogue is a perfect self-match
        assert records[0]["ranking"][0]["normalized"] == 1.0

    def test_unrecognized_record_names_file_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"neither": 1}\n')
        assert main(["match", "--queries", str(bad), "--targets", str(bad)]) == 3
        assert "bad.jsonl:1: unrecognized record" in capsys.readouterr().err

    def test_bad_record_mid_file_names_line(self, tmp_path, capsys):
        targets = tmp_path / "targets.jsonl"
        write_networks(targets, [("t0", toy_network(0))])
        with targets.open("a") as handle:
            handle.write('{"id": "t1", "entities": [], "relations": 5}\n')
        assert main(["match", "--queries", str(targets), "--targets", str(targets)]) == 3
        assert "targets.jsonl:2:" in capsys.readouterr().err

    def test_duplicate_ids_rejected(self, tmp_path, capsys):
        targets = tmp_path / "targets.jsonl"
        write_networks(targets, [("t0", toy_network(0)), ("t0", toy_network(1))])
        assert main(["match", "--queries", str(targets), "--targets", str(targets)]) == 3
        assert "duplicate record id 't0'" in capsys.readouterr().err

    def test_rerun_is_byte_identical_apart_from_header(self, tmp_path):
        queries = tmp_path / "queries.jsonl"
        write_networks(queries, [(f"q{k}", toy_network(k)) for k in range(3)])
        first, second = tmp_path / "o1", tmp_path / "o2"
        for out in (first, second):
            argv = ["match", "--queries", str(queries), "--targets", str(queries),
                    "--out-dir", str(out), "--seed", "5"]
            assert main(argv) == 0
        assert body_of(first / "matches.jsonl") == body_of(second / "matches.jsonl")
        assert (first / "matches.png").read_bytes() == (second / "matches.png").read_bytes()


class TestBatteryCommand:
    def test_empty_battery_is_a_success(self, tmp_path, capsys):
        battery = tmp_path / "battery.jsonl"
        battery.write_text("# no cases\n")
        out = tmp_path / "out"
        assert main(["battery", "--file", str(battery), "--out-dir", str(out)]) == 0
        assert "total 0/0" in capsys.readouterr().out
        assert (out / "battery.tsv").exists()

    def test_missing_battery_file_is_a_data_error(self, tmp_path):
        assert main(["battery", "--file", str(tmp_path / "nope.jsonl")]) == 3

    def test_fully_hit_case_exits_zero(self, tmp_path, capsys):
        case = {
            "name": "fools-mate",
            "fen_a": "rnb1kbnr/pppp1ppp/8/4p3/6Pq/5P2/PPPPP2P/RNBQKBNR",
            "fen_b": "8/8/8/8/8/6b1/2k1P3/4KB2",
            "key": [["qh4", ["bg3"]], ["Ke1", ["Ke1"]]],
        }
        battery = tmp_path / "battery.jsonl"
        battery.write_text(json.dumps(case) + "\n")
        out = tmp_path / "out"
        assert main(["battery", "--file", str(battery), "--out-dir", str(out)]) == 0
        output = capsys.readouterr().out
        assert "fools-mate: 2/2" in output
        assert "total 2/2" in output

    def test_missed_case_exits_four_and_lists_misses(self, tmp_path, capsys):
        case = {
            "name": "fools-mate",
            "fen_a": "rnb1kbnr/pppp1ppp/8/4p3/6Pq/5P2/PPPPP2P/RNBQKBNR",
            "fen_b": "8/8/8/8/8/6b1/2k1P3/4KB2",
            "key": [["qh4", ["Ke1"]]],
        }
        battery = tmp_path / "battery.jsonl"
        battery.write_text(json.dumps(case) + "\n")
        out = tmp_path / "out"
        assert main(["battery", "--file", str(battery), "--out-dir", str(out)]) == 4
        assert "missed qh4" in capsys.readouterr().out
        body = body_of(out / "battery.tsv")
        assert body[1].startswith("fools-mate\t0\t1\t")


class TestWhyReport:
    def test_template_requires_all_four_headers(self):
        with pytest.raises(ValueError, match="missing section headers"):
            WhyReportTemplate("k", "s", "t", sections=(("attempts", ""),))

    def test_report_contains_sections_and_ids(self, tmp_path, capsys):
        argv = ["whyreport", "--schema", "rw|3|0|1", "--source-id", "thm_a",
                "--target-id", "thm_b", "--out-dir", str(tmp_path)]
        assert main(argv) == 0
        path = tmp_path / "why-rw-3-0-1-thm_a-thm_b.md"
        text = path.read_text(encoding="utf-8")
        for header in ("what-the-source-tactic-does", "does-an-analog-exist",
                       "attempts", "failure-diagnosis"):
            assert f"## {header}" in text
        assert "- schema: rw|3|0|1" in text

    def test_unicode_schema_key_round_trips(self, tmp_path):
        argv = ["whyreport", "--schema", "φ_aux|2|1|0", "--source-id", "a",
                "--target-id", "b", "--out-dir", str(tmp_path)]
        assert main(argv) == 0
        reports = list(tmp_path.glob("why-*.md"))
        assert len(reports) == 1
        assert "- schema: φ_aux|2|1|0" in reports[0].read_text(encoding="utf-8")

    def test_refuses_overwrite_without_force(self, tmp_path, capsys):
        argv = ["whyreport", "--schema", "k", "--source-id", "s",
                "--target-id", "t", "--out-dir", str(tmp_path)]
        assert main(argv) == 0
        assert main(argv) == 3
        assert "already exists" in capsys.readouterr().err
        assert main(argv + ["--force"]) == 0

    def test_verify_cmd_status_recorded(self, tmp_path):
        argv = ["whyreport", "--schema", "k", "--source-id", "s",
                "--target-id", "t", "--out-dir", str(tmp_path),
                "--verify-cmd", "false"]
        assert main(argv) == 0
        text = (tmp_path / "why-k-s-t.md").read_text(encoding="utf-8")
        assert "## verification" in text
        assert "- exit-status: 1" in text


class TestDeterminism:
    def test_report_commands_rerun_byte_identical(self, corpus, tmp_path):
        outputs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            for argv in (
                ["schemas", "--corpus", str(corpus), "--out-dir", str(out)],
                ["zscores", "--corpus", str(corpus), "--out-dir", str(out)],
                ["pairs", "--corpus", str(corpus), "--out-dir", str(out)],
                ["candidates", "--corpus", str(corpus), "--out-dir", str(out),
                 "--source", "Mathlib.Probability", "--target", "Mathlib.Order"],
            ):
                assert main(argv) == 0
            outputs.append(out)
        first, second = outputs
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            if name.endswith(".png"):
                assert (first / name).read_bytes() == (second / name).read_bytes()
            else:
                assert body_of(first / name) == body_of(second / name)
