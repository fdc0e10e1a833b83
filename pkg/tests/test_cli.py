"""Command line behavior: scores, plan files, exit codes, bench runs."""
import json
import math
import pathlib

import pytest

from htnsat.cli import (
    PlanFormatError,
    UsageError,
    ipc_score,
    load_problem,
    main,
    parse_plan,
    quality_score,
    write_plan,
)
from htnsat.hddl import parse_ground
from htnsat.planner import PlannerConfig, plan, verify

from domains import wide_choice

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
SOLVABLE = ["fork3", "taxi", "tower", "mpre", "addonly", "reinsert",
            "empty_goal", "empty_method"]


def fixture(name):
    return str(FIXTURES / f"{name}.ground")


def solved(name, **kw):
    p = parse_ground((FIXTURES / f"{name}.ground").read_text(), name)
    res = plan(p, PlannerConfig(**kw))
    assert res.status == "solved"
    return p, res


class TestScores:
    def test_ipc_analytic_cases(self):
        assert ipc_score(1.0, 600.0, True) == pytest.approx(1.0, abs=1e-12)
        assert ipc_score(600.0, 600.0, True) == pytest.approx(0.0, abs=1e-12)
        assert ipc_score(math.sqrt(600.0), 600.0, True) \
            == pytest.approx(0.5, abs=1e-12)

    def test_ipc_subsecond_and_unsolved(self):
        assert ipc_score(0.01, 600.0, True) == 1.0
        assert ipc_score(0.01, 600.0, False) == 0.0
        assert ipc_score(599.0, 600.0, False) == 0.0

    def test_ipc_nonincreasing_in_t(self):
        samples = [0.2, 1.0, 2.0, 10.0, 59.9, 60.0]
        scores = [ipc_score(t, 60.0, True) for t in samples]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_ipc_rejects_tiny_limit(self):
        with pytest.raises(UsageError):
            ipc_score(0.5, 1.0, True)

    def test_quality_analytic_cases(self):
        assert quality_score(7, 7, True) == pytest.approx(1.0, abs=1e-12)
        assert quality_score(14, 7, True) == pytest.approx(0.5, abs=1e-12)
        assert quality_score(5, 3, False) == 0.0
        assert quality_score(0, 0, True) == 1.0
        assert quality_score(4, 0, True) == 0.0

    def test_quality_times_length_recovers_reference(self):
        for c_ref in (1, 3, 7, 11):
            for c in (c_ref, 2 * c_ref, 3 * c_ref + 1):
                assert quality_score(c, c_ref, True) * c \
                    == pytest.approx(c_ref, abs=1e-12)


class TestPlanFiles:
    def test_single_action_plan_shape(self):
        p, res = solved("empty_goal")
        lines = write_plan(p, res.tree).splitlines()
        assert lines[0] == "==>" and lines[-1] == "<=="
        body = lines[1:-1]
        numbered = [ln for ln in body if ln.split()[1].startswith("(")]
        roots = [ln for ln in body if ln.startswith("root ")]
        decomps = [ln for ln in body if "->" in ln]
        assert len(numbered) == 1 and len(roots) == 1 and len(decomps) == 1

    def test_action_lines_carry_split_arguments(self):
        p, res = solved("taxi")
        text = write_plan(p, res.tree)
        assert "(call s1)" in text or "(call s2)" in text

    @pytest.mark.parametrize("name", SOLVABLE)
    def test_round_trip_preserves_the_tree(self, name):
        p, res = solved(name)
        tree = parse_plan(p, write_plan(p, res.tree))
        assert verify(p, tree) == []
        assert tree.plan() == res.plan

    def test_rejects_missing_delimiters(self):
        p, res = solved("fork3")
        text = write_plan(p, res.tree).replace("==>\n", "")
        with pytest.raises(PlanFormatError, match="delimited"):
            parse_plan(p, text)

    def test_rejects_unknown_action(self):
        p, res = solved("fork3")
        text = write_plan(p, res.tree).replace("(begin-", "(bogus-")
        with pytest.raises(PlanFormatError, match="unknown action"):
            parse_plan(p, text)

    def test_rejects_unreferenced_action_line(self):
        p, res = solved("fork3")
        lines = write_plan(p, res.tree).splitlines()
        lines.insert(4, "9 (spin)")
        with pytest.raises(PlanFormatError, match="disagree"):
            parse_plan(p, "\n".join(lines))

    def test_swapped_action_lines_parse_but_fail_verification(self):
        # Swapping two action names keeps the file self-consistent; the
        # damage only shows up when the plan is executed.
        p, res = solved("fork3")
        lines = write_plan(p, res.tree).splitlines()
        a0, a1 = lines[1].split(" ", 1)[1], lines[2].split(" ", 1)[1]
        lines[1], lines[2] = f"0 {a1}", f"1 {a0}"
        tree = parse_plan(p, "\n".join(lines))
        assert any("child mismatch" in m for m in verify(p, tree))

    def test_rejects_duplicate_ids(self):
        p, res = solved("fork3")
        lines = write_plan(p, res.tree).splitlines()
        lines.insert(2, lines[1])
        with pytest.raises(PlanFormatError, match="duplicate"):
            parse_plan(p, "\n".join(lines))

    def test_rejects_self_referential_decomposition(self):
        p, _ = solved("fork3")
        text = "==>\nroot 0\n0 main -> go-left 0 0\n<==\n"
        with pytest.raises(PlanFormatError):
            parse_plan(p, text)


class TestSolveCommand:
    def test_solved_prints_plan_and_exits_zero(self, capsys):
        assert main([fixture("fork3")]) == 0
        out = capsys.readouterr().out
        assert ";; status solved" in out
        assert "==>" in out and "<==" in out

    def test_unsolvable_exits_one(self, capsys):
        assert main([fixture("unsolvable")]) == 1
        assert ";; status unsolvable" in capsys.readouterr().out

    def test_timeout_exits_two(self, capsys):
        assert main([fixture("fork3"), "--timeout", "0"]) == 2
        assert ";; status timeout" in capsys.readouterr().out

    def test_missing_file_exits_three(self, capsys):
        assert main(["nope.ground"]) == 3
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_exits_three(self, capsys):
        assert main([fixture("fork3"), "--frobnicate"]) == 3
        assert "error:" in capsys.readouterr().err

    def test_single_non_ground_input_exits_three(self, capsys):
        assert main([str(FIXTURES / "taxi.hddl")]) == 3
        assert ".ground" in capsys.readouterr().err

    def test_hddl_pair_solves(self, capsys):
        assert main([str(FIXTURES / "taxi.hddl"),
                     str(FIXTURES / "taxi1.hddl")]) == 0
        assert "call" in capsys.readouterr().out

    def test_plan_file_matches_stdout(self, tmp_path, capsys):
        dest = tmp_path / "out.plan"
        assert main([fixture("fork3"), "--plan", str(dest)]) == 0
        out = capsys.readouterr().out
        block = out[out.index("==>"):]
        assert dest.read_text() == block

    def test_stats_json(self, tmp_path, capsys):
        dest = tmp_path / "stats.json"
        assert main([fixture("reinsert"), "--stats", str(dest)]) == 0
        capsys.readouterr()
        stats = json.loads(dest.read_text())
        assert stats["reinsertions"] == 1
        assert stats["rounds"] >= 1
        assert any(q["kind"] == "solution" for q in stats["queries"])

    def test_emit_dot(self, tmp_path, capsys):
        dest = tmp_path / "grid.dot"
        assert main([fixture("fork3"), "--emit-dot", str(dest)]) == 0
        capsys.readouterr()
        assert dest.read_text().startswith("digraph")

    def test_dump_cnf_writes_rounds(self, tmp_path, capsys):
        base = tmp_path / "enc"
        assert main([fixture("fork3"), "--dump-cnf", str(base)]) == 0
        capsys.readouterr()
        dumps = sorted(tmp_path.glob("enc.round*.cnf"))
        assert dumps
        assert dumps[0].read_text().startswith("p cnf ")

    def test_dump_profiles_prints_tasks(self, capsys):
        assert main([fixture("tower"), "--dump-profiles"]) == 0
        assert "strip" in capsys.readouterr().out

    def test_mode_and_amo_flags_accepted(self, capsys):
        assert main([fixture("fork3"), "--mode", "bfs", "--amo", "binary",
                     "--no-mutex", "--mandpre-prune=off",
                     "--seed", "7"]) == 0
        capsys.readouterr()

    def test_bfs_develops_more_methods_on_wide_choice(self, tmp_path, capsys):
        source = tmp_path / "wide.ground"
        source.write_text(wide_choice(4))
        counts = {}
        for mode in ("greedy", "bfs"):
            dest = tmp_path / f"{mode}.json"
            assert main([str(source), "--mode", mode,
                         "--stats", str(dest)]) == 0
            counts[mode] = json.loads(dest.read_text())["methods_developed"]
        capsys.readouterr()
        assert counts["bfs"] > counts["greedy"]


class TestValidateOnly:
    def test_accepts_written_plan(self, tmp_path, capsys):
        dest = tmp_path / "ok.plan"
        assert main([fixture("taxi"), "--plan", str(dest)]) == 0
        capsys.readouterr()
        assert main([fixture("taxi"), "--validate-only", str(dest)]) == 0
        assert "plan valid" in capsys.readouterr().out

    def test_rejects_corrupted_plan(self, tmp_path, capsys):
        dest = tmp_path / "bad.plan"
        assert main([fixture("fork3"), "--plan", str(dest)]) == 0
        capsys.readouterr()
        lines = dest.read_text().splitlines()
        a0, a1 = lines[1].split(" ", 1)[1], lines[2].split(" ", 1)[1]
        lines[1], lines[2] = f"0 {a1}", f"1 {a0}"
        dest.write_text("\n".join(lines) + "\n")
        assert main([fixture("fork3"), "--validate-only", str(dest)]) == 1
        assert "child mismatch" in capsys.readouterr().out

    def test_rejects_inexecutable_plan(self, tmp_path, capsys):
        # A structurally fine tree whose plan skips the required first hop.
        text = ("==>\n0 (call s1)\nroot 1\n"
                "1 calltaxi -> via(s1) 2 0\n"
                "2 go(s1) -> stay(s1)\n<==\n")
        dest = tmp_path / "skip.plan"
        dest.write_text(text)
        assert main([fixture("taxi"), "--validate-only", str(dest)]) == 1
        assert "inapplicable" in capsys.readouterr().out

    def test_missing_plan_file_exits_three(self, capsys):
        assert main([fixture("taxi"), "--validate-only", "gone.plan"]) == 3
        assert "error:" in capsys.readouterr().err


class TestBench:
    def test_fixture_manifest_scores(self, tmp_path, capsys):
        out = tmp_path / "scores.csv"
        assert main(["bench", str(FIXTURES / "bench.json"),
                     "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "ipc_norm" in printed
        rows = out.read_text().splitlines()
        assert rows[0].startswith("group,instance,mode")
        assert len(rows) == 6  # 2 modes x 2 solvable + 1 unsolvable run
        unsolved = [r for r in rows if r.startswith("toys,unsolvable")]
        assert len(unsolved) == 1
        assert unsolved[0].endswith(",0.000000,0.000000")

    def test_ref_length_feeds_quality(self, tmp_path, capsys):
        manifest = {
            "timeout": 30,
            "instances": [{"name": "fork", "ground": "fork3.ground",
                           "ref_length": 1}],
        }
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest))
        (tmp_path / "fork3.ground").write_text(
            (FIXTURES / "fork3.ground").read_text())
        out = tmp_path / "scores.csv"
        assert main(["bench", str(mpath), "--out", str(out)]) == 0
        capsys.readouterr()
        row = out.read_text().splitlines()[1]
        assert row.split(",")[7] == f"{1 / 3:.6f}"

    def test_bad_manifest_exits_three(self, tmp_path, capsys):
        mpath = tmp_path / "m.json"
        mpath.write_text("{\"instances\": [{\"name\": \"x\"}]}")
        assert main(["bench", str(mpath), "--out",
                     str(tmp_path / "s.csv")]) == 3
        assert "error:" in capsys.readouterr().err

    def test_tiny_limit_exits_three(self, tmp_path, capsys):
        assert main(["bench", str(FIXTURES / "bench.json"),
                     "--out", str(tmp_path / "s.csv"),
                     "--timeout", "1"]) == 3
        assert "exceed one second" in capsys.readouterr().err


class TestLoadProblem:
    def test_ground_path(self):
        p = load_problem([fixture("fork3")])
        assert p.name == "fork3"

    def test_hddl_pair(self):
        p = load_problem([str(FIXTURES / "taxi.hddl"),
                          str(FIXTURES / "taxi1.hddl")])
        assert p.abstracts[p.root].name == "calltaxi(p)"

    def test_three_inputs_rejected(self):
        with pytest.raises(UsageError):
            load_problem([fixture("fork3")] * 3)

    def test_parse_error_becomes_usage_error(self, tmp_path):
        bad = tmp_path / "bad.ground"
        bad.write_text("fact a\nfact a\nroot t\n")
        with pytest.raises(UsageError):
            load_problem([str(bad)])