from __future__ import annotations

import json
import subprocess
import sys

import pytest

from tracepredict.cli import main


def run(capsys, *argv):
    """Exit code and captured output; argparse usage errors surface as SystemExit."""
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


class TestTrace:
    def test_validate_ok(self, capsys, sig_files):
        code, out, _ = run(capsys, "trace", "validate", "--input", sig_files["sig3"])
        assert code == 0 and out.strip() == "8 events, 2 threads, well-formed"

    def test_validate_violation(self, capsys, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("t1|w|x\nt1|acq|l\nt2|acq|l\n")
        code, out, _ = run(capsys, "trace", "validate", "--input", path)
        assert code == 1 and "violation at event 3" in out

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "trace", "validate", "--input", tmp_path / "nope.trace")
        assert code == 2 and "cannot read" in err

    def test_parse_error(self, capsys, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("t1|w|x\nnot a label\n")
        code, _, err = run(capsys, "trace", "validate", "--input", path)
        assert code == 2 and "line 2" in err

    def test_structured_input(self, capsys, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps([{"t": "t1", "op": "w", "d": "x"}]))
        code, out, _ = run(capsys, "trace", "validate", "--input", path, "--format", "structured")
        assert code == 0 and out.startswith("1 events")

    def test_stats(self, capsys, sig_files):
        code, out, _ = run(capsys, "trace", "stats", "--input", sig_files["sig4"])
        stats = json.loads(out)
        assert code == 0
        assert (stats["events"], stats["threads"], stats["reads"], stats["writes"]) == (7, 3, 4, 3)
        assert stats["well_formed"] is True


class TestRace:
    @pytest.mark.parametrize(
        "mode,code", [("maz", 0), ("strong", 1), ("strong-rf", 1), ("confp", 1)]
    )
    def test_sig2_modes(self, capsys, sig_files, mode, code):
        got, out, _ = run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--mode", mode)
        report = json.loads(out)
        assert got == code and report["mode"] == mode
        assert report["counts"]["findings"] == len(report["findings"]) == code

    def test_confp_report(self, capsys, sig_files):
        _, out, _ = run(capsys, "analyze", "race", "--input", sig_files["sig2"])
        report = json.loads(out)
        assert report["schema"] == 1 and report["command"] == "analyze race"
        assert report["findings"] == [
            {"events": [1, 6], "labels": ["t1|w|x", "t2|w|x"], "witness": [4, 5]}
        ]
        assert "elapsed_ms" not in report

    def test_strong_witness(self, capsys, sig_files):
        _, out, _ = run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--mode", "strong")
        assert json.loads(out)["findings"][0]["witness"] == [1, 4, 5, 6]

    def test_sampling(self, capsys, sig_files):
        argv = ["analyze", "race", "--input", sig_files["sig2"], "--mode", "strong"]
        code, out, _ = run(capsys, *argv, "--sample", 32, "--seed", 0)
        report = json.loads(out)
        assert code == 1 and report["sampling"] == {"budget": 32, "seed": 0}

    def test_sampling_rejected_in_confp(self, capsys, sig_files):
        code, _, err = run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--sample", 4)
        assert code == 2 and "confp" in err

    def test_seed_without_sample(self, capsys, sig_files):
        argv = ["analyze", "race", "--input", sig_files["sig2"], "--mode", "strong", "--seed", 1]
        assert run(capsys, *argv)[0] == 2

    def test_ill_formed_input(self, capsys, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("t1|acq|l\nt2|acq|l\n")
        code, _, err = run(capsys, "analyze", "race", "--input", path)
        assert code == 2 and "not well-formed" in err

    def test_timing(self, capsys, sig_files):
        _, out, _ = run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--timing")
        assert json.loads(out)["elapsed_ms"] >= 0

    def test_repeated_reports_identical(self, capsys, sig_files):
        argv = ["analyze", "race", "--input", sig_files["sig4"], "--mode", "strong-rf"]
        first = run(capsys, *argv)[1]
        assert run(capsys, *argv)[1] == first
        assert run(capsys, *argv, "--threads", 2)[1] == first

    def test_output_file(self, capsys, sig_files, tmp_path):
        target = tmp_path / "report.json"
        code, out, _ = run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--output", target)
        assert code == 1 and "report written" in out
        assert json.loads(target.read_text())["counts"]["findings"] == 1

    def test_bad_threads(self, capsys, sig_files):
        assert run(capsys, "analyze", "race", "--input", sig_files["sig2"], "--threads", 0)[0] == 2


class TestDeadlock:
    def test_sig3(self, capsys, sig_files):
        code, out, _ = run(capsys, "analyze", "deadlock", "--input", sig_files["sig3"])
        finding = json.loads(out)["findings"][0]
        assert code == 1
        assert finding["events"] == [2, 6] and finding["locks"] == ["l2", "l1"]

    def test_none_in_sig2(self, capsys, sig_files):
        assert run(capsys, "analyze", "deadlock", "--input", sig_files["sig2"])[0] == 0

    def test_maz_rejected(self, capsys, sig_files):
        argv = ["analyze", "deadlock", "--input", sig_files["sig3"], "--mode", "maz"]
        assert run(capsys, *argv)[0] == 2

    def test_max_cycle(self, capsys, sig_files):
        argv = ["analyze", "deadlock", "--input", sig_files["sig3"], "--max-cycle", 1]
        assert run(capsys, *argv)[0] == 2


class TestPattern:
    ARGS = ("--pattern", "t1|w|y,t2|r|y", "--match", "adjacent")

    def test_sig4_strong_rf(self, capsys, sig_files):
        code, out, _ = run(capsys, "analyze", "pattern", "--input", sig_files["sig4"], *self.ARGS)
        report = json.loads(out)
        assert code == 1 and report["mode"] == "strong-rf"
        assert report["findings"][0]["witness"] == [1, 5, 6, 7]
        assert report["findings"][0]["events"] == [1, 7]

    @pytest.mark.parametrize("mode", ["strong", "maz"])
    def test_sig4_weaker_modes(self, capsys, sig_files, mode):
        argv = ["analyze", "pattern", "--input", sig_files["sig4"], *self.ARGS, "--mode", mode]
        code, out, _ = run(capsys, *argv)
        assert code == 0 and json.loads(out)["findings"] == []

    def test_subsequence(self, capsys, sig_files):
        argv = ["analyze", "pattern", "--input", sig_files["sig2"]]
        code, _, _ = run(capsys, *argv, "--pattern", "t2|w|x,t1|w|x", "--match", "subsequence")
        assert code == 0

    def test_letters_outside_trace(self, capsys, sig_files):
        argv = ["analyze", "pattern", "--input", sig_files["sig2"]]
        code, _, _ = run(capsys, *argv, "--pattern", "t9|w|z", "--match", "subsequence")
        assert code == 0

    def test_match_required(self, capsys, sig_files):
        argv = ["analyze", "pattern", "--input", sig_files["sig4"], "--pattern", "t1|w|y"]
        assert run(capsys, *argv)[0] == 2

    def test_bad_pattern(self, capsys, sig_files):
        argv = ["analyze", "pattern", "--input", sig_files["sig4"], "--match", "adjacent"]
        assert run(capsys, *argv, "--pattern", "t1|w|y")[0] == 2


class TestOracle:
    def test_equiv(self, capsys, sig_files):
        code, out, _ = run(capsys, "oracle", "closure", "--kind", "equiv", "--input", sig_files["abacba"])
        assert code == 0 and len(out.splitlines()) == 2

    def test_ideal(self, capsys, sig_files):
        code, out, _ = run(capsys, "oracle", "closure", "--kind", "ideal", "--input", sig_files["abacba"])
        lines = out.splitlines()
        assert code == 0 and len(lines) == 11 and lines[0] == "<empty>"

    def test_bound(self, capsys, tmp_path):
        path = tmp_path / "long.trace"
        path.write_text("t1|w|x\n" * 12)
        code, _, err = run(capsys, "oracle", "closure", "--kind", "rf", "--input", path)
        assert code == 2 and "bound" in err

    def test_unknown_kind(self, capsys, sig_files):
        assert run(capsys, "oracle", "closure", "--kind", "bogus", "--input", sig_files["sig1"])[0] == 2


class TestEntryPoint:
    def test_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0 and "analyze" in capsys.readouterr().out

    def test_no_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_module_invocation(self, sig_files):
        argv = ["-v", "analyze", "race", "--input", str(sig_files["sig2"])]
        proc = subprocess.run(
            [sys.executable, "-m", "tracepredict", *argv], capture_output=True, text=True
        )
        assert proc.returncode == 1
        assert json.loads(proc.stdout)["counts"]["racy_events"] == 1
        assert "finished in" in proc.stderr
