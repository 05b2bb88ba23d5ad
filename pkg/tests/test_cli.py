import csv
import io
import json
import math
import subprocess
import sys

import pytest

from qsphere.cli import main, parse_sweep, rel_err, UsageError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spectrum_example(capsys):
    code, out, _ = run(capsys, "spectrum", "--count", "3", "--q", "0.5")
    assert code == 0
    rows = table(out)
    assert [r["k"] for r in rows] == ["0", "1", "2"]
    expected = [(1, 4 / 3, 4), (2.5, 8 / 3, 8), (5.25, 16 / 3, 12)]
    for r, (full, simp, mult) in zip(rows, expected):
        assert float(r["eigenvalue_full"]) == pytest.approx(full, rel=1e-15)
        assert float(r["eigenvalue_simplified"]) == pytest.approx(simp, rel=1e-15)
        assert int(r["multiplicity"]) == mult


def test_json_matches_csv(capsys):
    _, out_csv, _ = run(capsys, "spectrum", "--count", "5")
    _, out_json, _ = run(capsys, "spectrum", "--count", "5", "--format", "json")
    recs = json.loads(out_json)
    rows = table(out_csv)
    assert [list(r) for r in recs] == [list(r) for r in rows]
    for rec, row in zip(recs, rows):
        assert all(float(row[k]) == rec[k] for k in rec)


def test_csv_round_trips_binary64(capsys):
    _, out, _ = run(capsys, "heat", "--t", "0.05:2:7:log", "--method", "compare")
    from qsphere.heattrace import trace_direct
    from qsphere.qspec import QParams
    for r in table(out):
        assert float(r["direct"]) == trace_direct(float(r["t"]), QParams(0.5))
    assert "\r" not in out


def test_heat_compare_and_classical(capsys):
    _, out, _ = run(capsys, "heat", "--t", "0.5", "--method", "compare")
    row = table(out)[0]
    assert {"t", "direct", "residue", "rel_err"} <= set(row)
    assert float(row["rel_err"]) <= 1e-8
    _, out, _ = run(capsys, "heat", "--t", "1", "--method", "classical")
    assert float(table(out)[0]["value"]) == pytest.approx(4 * math.exp(-1) / (1 - math.exp(-1)) ** 2, rel=1e-14)


def test_precision_warning_is_a_column(capsys):
    code, out, _ = run(capsys, "heat", "--t", "1,20", "--method", "residue")
    assert code == 0
    rows = table(out)
    assert "precision_warning" in rows[0]
    assert [r["precision_warning"] for r in rows] == ["0", "1"]


@pytest.mark.parametrize("argv,code", [
    (["spectrum", "--count", "0"], 2),
    (["heat", "--t", "-1:1:3"], 2),
    (["heat", "--t=-1:1:3"], 2),
    (["heat", "--t", "0,1"], 2),
    (["heat", "--t", "2:1:3"], 2),
    (["heat", "--method", "nope"], 2),
    (["zeta", "--s", "0", "--method", "continued"], 3),
    (["zeta", "--s", "abc"], 2),
    (["spectrum", "--q", "1.5"], 3),
    (["heat", "--q", "0.97", "--method", "residue"], 3),
    (["action", "--cutoff", "cauchy:a=1"], 3),
    (["action", "--cutoff", "gamma:a=1,r=3", "--lam", "1"], 3),
    (["rep", "--L", "3"], 3),
    (["rep", "--check", "fluctuation", "--form", "A,A"], 2),
])
def test_exit_codes(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    assert err and not out


def test_domain_error_names_parameter(capsys):
    _, _, err = run(capsys, "spectrum", "--q", "1.5")
    assert "q=1.5" in err


def test_action_compare(capsys):
    _, out, _ = run(capsys, "action", "--cutoff", "step:a=1,b=3", "--lam", "2,5,10", "--method", "compare")
    rows = table(out)
    assert len(rows) == 3 and all(float(r["rel_err"]) <= 1e-6 for r in rows)


def test_zeta_and_poles(capsys):
    _, out, _ = run(capsys, "zeta", "--s", "2,0.5+1j", "--method", "compare")
    assert all(float(r["rel_err"]) <= 1e-10 for r in table(out))
    _, out, _ = run(capsys, "poles", "--re=-5:1", "--im=-1:1")
    rows = table(out)
    assert [float(r["re"]) for r in rows] == [0, -2, -4]
    assert float(rows[0]["c_m2_re"]) == pytest.approx(4 / math.log(0.5) ** 2, rel=1e-8)


def test_rep_checks(capsys):
    _, out, _ = run(capsys, "rep", "--L", "10", "--check", "relations")
    assert all(float(r["interior_residual"]) <= 1e-12 for r in table(out))
    _, out, _ = run(capsys, "rep", "--L", "10", "--check", "spectrum")
    assert float(table(out)[0]["max_rel_dev"]) <= 1e-12


def test_rep_dump(capsys, tmp_path):
    path = tmp_path / "a.csv"
    code, _, _ = run(capsys, "rep", "--L", "4", "--check", "spectrum", "--dump", "A", "--dump-path", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# L=4") and len(lines) == 61


def test_parallel_sweep_is_byte_identical(capsys):
    argv = ["heat", "--t", "0.05:2:6:log", "--method", "compare"]
    _, serial, _ = run(capsys, *argv)
    _, parallel, _ = run(capsys, *argv, "--jobs", "2")
    assert serial == parallel


def test_config_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "qs.cfg"
    cfg.write_text("# settings\nq = 0.3\nformat=json\n")
    _, out, _ = run(capsys, "spectrum", "--count", "2", "--config", str(cfg))
    assert json.loads(out)[1]["eigenvalue_full"] == pytest.approx(0.3 + 1 / 0.3, rel=1e-14)
    monkeypatch.setenv("QSPHERE_CONFIG", str(cfg))
    _, out_env, _ = run(capsys, "spectrum", "--count", "2")
    assert out_env == out
    # flags win over the file
    _, out_flag, _ = run(capsys, "spectrum", "--count", "2", "--q", "0.5", "--format", "csv")
    assert float(table(out_flag)[1]["eigenvalue_full"]) == 2.5


def test_bad_config(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert run(capsys, "spectrum", "--config", str(cfg))[0] == 2
    assert run(capsys, "spectrum", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_output_and_figure(capsys, tmp_path):
    out, fig = tmp_path / "heat.csv", tmp_path / "heat.png"
    code, stdout, _ = run(capsys, "heat", "--t", "0.05:2:5:log", "-o", str(out), "--figure", str(fig))
    assert code == 0 and stdout == ""
    assert len(table(out.read_text())) == 5
    assert fig.read_bytes()[:4] == b"\x89PNG"
    bar = tmp_path / "rel.png"
    assert run(capsys, "rep", "--L", "6", "--figure", str(bar))[0] == 0
    assert bar.stat().st_size > 0


def test_parse_sweep():
    pts, log = parse_sweep("1:100:3:log")
    assert log and list(pts) == pytest.approx([1, 10, 100])
    assert list(parse_sweep("0.5")[0]) == [0.5]
    assert list(parse_sweep("1,2,3")[0]) == [1, 2, 3]
    for bad in ("1:2", "1:2:0", "1:2:3:cubic", "0:1:3:log", "nan"):
        with pytest.raises(UsageError):
            parse_sweep(bad)


def test_rel_err_floor():
    assert rel_err(0.0, 0.0) == 0.0
    assert rel_err(1.0, 2.0) == 0.5


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qsphere.cli", "spectrum", "--count", "2"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[0] == "k,eigenvalue_full,eigenvalue_simplified,multiplicity"
