import csv
import io
import json
import math
from collections import defaultdict

import pytest

from qpe_sampling.cli import main, render
from qpe_sampling.numerics import DEFAULT_CONTEXT
from qpe_sampling.schemes.box import box_breakpoints

mp = DEFAULT_CONTEXT.mp


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse(text):
    return list(csv.reader(io.StringIO(text)))


class TestTables:
    @pytest.mark.parametrize("table, shape", [("1", (12, 11)), ("3", (7, 11)), ("4", (21, 21))])
    def test_full_match(self, capsys, table, shape):
        code, out, err = run(capsys, "table", table)
        rows = parse(out)
        assert code == 0, err
        assert (len(rows), len(rows[0])) == shape

    def test_table_four_dashes(self, capsys):
        _, out, _ = run(capsys, "table", "4")
        rows = parse(out)
        first = next(r for r in rows if r[:2] == ["triple_sign", "1e-1"])
        assert first[2:5] == ["15", "16", "19"] and set(first[5:]) == {"-"}

    def test_table_two_rows(self, capsys, tmp_path):
        rep = tmp_path / "report.csv"
        code, out, _ = run(capsys, "table", "2", "--row", "Sign based", "--row", "Majority and sign", "--report", str(rep))
        assert code == 0
        assert [r[0] for r in parse(out)[1:]] == ["Sign based", "Majority and sign"]
        cells = parse(rep.read_text())
        assert cells[0] == ["row", "column", "computed", "published", "match", "margin", "alternate"]
        assert len(cells) == 21 and all(c[4] == "yes" for c in cells[1:])

    def test_mismatch_exit(self, capsys, tmp_path, monkeypatch):
        import qpe_sampling.cli as cli

        real = cli.load_golden

        def tampered(t):
            rows = real(t)
            rows[1][1] = "999"
            return rows

        monkeypatch.setattr(cli, "load_golden", tampered)
        code, _, err = run(capsys, "table", "3")
        assert code == 1 and "mismatch" in err

    def test_markdown(self, capsys):
        _, out, _ = run(capsys, "table", "3", "--format", "markdown")
        assert out.startswith("| row |") and "|---|" in out

    def test_policy_flag_restricted(self, capsys):
        code, _, _ = run(capsys, "table", "1", "--policy", "table3")
        assert code == 2

    def test_unknown_row(self, capsys):
        assert run(capsys, "table", "2", "--row", "Nope")[0] == 2

    def test_csv_round_trip(self, capsys, tmp_path):
        out_file = tmp_path / "t1.csv"
        assert run(capsys, "table", "1", "--out", str(out_file))[0] == 0
        text = out_file.read_text()
        assert render(parse(text), "csv") == text


class TestCurves:
    def test_box_jumps(self, capsys):
        _, out, _ = run(capsys, "curve", "box", "--n", "8", "--delta", "0.3", "--resolution", "11")
        rows = parse(out)
        assert rows[0] == ["p", "side", "error"]
        left = [r for r in rows[1:] if r[1] == "left"]
        interior = [b for b in box_breakpoints(8, mp.mpf("0.3")) if 0 < b < 1]
        assert len(left) == len(interior) == 14
        assert sum(r[1] == "point" for r in rows[1:]) == 11

    def test_wedge_jumps_at_grid_angles(self, capsys):
        _, out, _ = run(capsys, "curve", "wedge", "--n", "5", "--eta", "pi/4", "--resolution", "3")
        rows = parse(out)[1:]
        crit = set()
        for i in range(6):
            for j in range(6):
                t = math.atan2(j - 2.5, i - 2.5)
                crit |= {round((t + s * math.pi / 4) % (2 * math.pi), 9) for s in (-1, 1)}
        jumps = {float(r[0]) for r in rows if r[1] != "point"}
        assert jumps and all(round(a, 9) in crit for a in jumps)
        assert all(0 <= float(r[0]) <= math.pi / 2 + 1e-12 for r in rows)

    def test_majority_ordering(self, capsys):
        _, out, _ = run(capsys, "curve", "majority", "--resolution", "9")
        by_alpha = defaultdict(dict)
        for a, n, err, scaled in parse(out)[1:]:
            by_alpha[a][int(n)] = (float(err), float(scaled))
        for curves in by_alpha.values():
            ns = sorted(curves)
            assert ns == [1, 2, 3, 5, 10, 25, 100, 500]
            for lo, hi in zip(ns, ns[1:]):
                assert curves[hi][0] < curves[lo][0]
                assert curves[hi][1] <= curves[lo][1] * (1 + 1e-12)

    def test_bad_resolution(self, capsys):
        assert run(capsys, "curve", "box", "--resolution", "1")[0] == 2


class TestSimulate:
    def test_target_met_and_deterministic(self, capsys, tmp_path):
        args = ["simulate", "--m", "4", "--eps", "0.1", "--trials", "2000", "--seed", "42"]
        code, a, _ = run(capsys, *args)
        assert code == 0
        _, b, _ = run(capsys, *args)
        assert a == b
        fields = dict(parse(a)[1:])
        assert fields["meets_target"] == "yes" and fields["trials"] == "2000"

    def test_single_fixed_phase(self, capsys):
        code, out, _ = run(capsys, "simulate", "--trials", "1", "--phi", "0")
        fields = dict(parse(out)[1:])
        assert fields["successes"] == "1"

    def test_jsonl(self, capsys, tmp_path):
        path = tmp_path / "t.jsonl"
        run(capsys, "simulate", "--trials", "5", "--m", "3", "--jsonl", str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 5
        assert all(json.loads(x)["schema"] == 1 for x in lines)

    def test_missed_target(self, capsys):
        # one trial cannot give a 99% upper bound below 0.1
        assert run(capsys, "simulate", "--trials", "1", "--phi", "0")[0] == 1


class TestMinN:
    def test_sign(self, capsys):
        code, out, _ = run(capsys, "min-n", "sign", "--angle", "pi/16", "--eps", "1e-3")
        assert code == 0 and dict(parse(out)[1:])["n"] == "3"

    def test_box_window(self, capsys):
        _, out, _ = run(capsys, "min-n", "box", "--delta", "0.1", "--eps", "0.3")
        fields = dict(parse(out)[1:])
        assert fields["n"] == "110"
        assert fields["unstable"].split() == [str(n) for n in range(113, 120)]

    def test_wedge(self, capsys):
        _, out, _ = run(capsys, "min-n", "wedge", "--eta", "pi/8", "--eps", "0.1")
        assert dict(parse(out)[1:])["n"] == "20"

    def test_domain_error(self, capsys):
        assert run(capsys, "min-n", "sign", "--angle", "pi/2", "--eps", "0.1")[0] == 2


class TestUsage:
    def test_missing_command(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_table(self):
        with pytest.raises(SystemExit) as exc:
            main(["table", "7"])
        assert exc.value.code == 2
