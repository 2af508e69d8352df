import csv
import io
import json
import subprocess
import sys

import pytest

from replicability import __version__
from replicability.cli import run

from reference_tables import TABLE1


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


def assert_single_line_error(err, code):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith(f"error: code={code} message=")


class TestOutputs:
    def test_figure1_defaults(self, capsys):
        code, out, _ = invoke(capsys, "figure1", "--grid-mu", "11")
        assert code == 0
        meta, rows = parse_csv(out)
        assert meta["tool"] == f"replicability {__version__}"
        assert meta["seed"] and meta["hdi_tie_rule"]
        assert meta["command"].startswith("replicability figure1")
        assert list(rows[0])[:7] == ["mu", "rho", "m", "level", "lower", "upper", "attained_mass"]
        assert len(rows) == 6 * 3 * 11
        assert {r["panel"] for r in rows} == set("ABCDEF")
        cell = next(r for r in rows if r["rho"] == "0.14999999999999999" and r["m"] == "50"
                    and r["mu"] == "0.20000000000000001")
        assert float(cell["upper"]) == pytest.approx(0.54, abs=0.02 + 1e-12)

    def test_seventeen_digits(self, capsys):
        _, out, _ = invoke(capsys, "example1", "--theta", "1.0", "--sigma", "0.5")
        _, rows = parse_csv(out)
        mu = rows[0]["mu"]
        assert len(mu.replace("0.", "", 1).lstrip("0")) >= 15
        assert float(mu) == pytest.approx(TABLE1[(1.0, 0.50)][0], abs=1e-3)

    def test_figure5_pair_metadata(self, capsys):
        code, out, _ = invoke(capsys, "figure5", "--m", "17,100")
        assert code == 0
        meta, rows = parse_csv(out)
        assert meta["minimal_separable_pair"].startswith("0.148,0.852")
        assert meta["rho"] == "0.175"
        assert len(rows) == 2 * 3

    def test_effective_size(self, capsys):
        _, out, _ = invoke(capsys, "effective-size", "--rho", "0.1,0.2", "--m", "100,274")
        _, rows = parse_csv(out)
        got = {(r["m"], r["rho"]): int(r["m_e_rounded"]) for r in rows}
        assert got == {("100", "0.10000000000000001"): 9, ("274", "0.10000000000000001"): 10,
                       ("100", "0.20000000000000001"): 5, ("274", "0.20000000000000001"): 5}
        assert float(rows[0]["asymptote"]) == pytest.approx(10.0)

    def test_rho_zero_asymptote_empty(self, capsys):
        _, out, _ = invoke(capsys, "effective-size", "--rho", "0", "--m", "10")
        _, rows = parse_csv(out)
        assert rows[0]["asymptote"] == "" and float(rows[0]["m_e"]) == 10

    def test_overlap_small_grid(self, capsys):
        code, out, _ = invoke(capsys, "overlap", "--grid-mu", "40", "--grid-rho", "40",
                              "--mu", "0.2,0.8")
        assert code == 0
        meta, rows = parse_csv(out)
        assert meta["prior"] == "uniform" and "mu_grid_reading" in meta
        assert [float(r["overlap"]) for r in rows if r["mu_i"] == r["mu_j"]] == [1.0, 1.0]
        assert rows[1]["x_i"] == "20" and rows[1]["x_j"] == "80"

    def test_conditional(self, capsys):
        _, out, _ = invoke(capsys, "conditional", "--rho", "0.05", "--mu", "0.2", "--grid-mu", "500")
        _, rows = parse_csv(out)
        assert len(rows) == 500
        assert sum(float(r["density"]) for r in rows) / 500 == pytest.approx(1.0, abs=1e-9)

    def test_example2_modes(self, capsys):
        code, out, _ = invoke(capsys, "example2", "--bias", "0.5", "--noise", "0.25")
        assert code == 0
        meta, rows = parse_csv(out)
        assert [r["mode"] for r in rows] == ["large-n", "n=100"]
        assert meta["critical_count"] == "59"
        assert float(meta["alpha"]) == pytest.approx(0.0443, abs=1e-4)
        assert "Gauss-Legendre" in meta["quadrature"]
        code, out, _ = invoke(capsys, "example2", "--n", "0", "--bias", "0")
        assert [r["mode"] for r in parse_csv(out)[1]] == ["large-n"] * 4

    def test_ml4_json(self, capsys):
        code, out, _ = invoke(capsys, "ml4", "--format", "json", "--draws", "20000",
                              "--prior", "jeffreys")
        assert code == 0
        payload = json.loads(out)
        assert payload["meta"]["seed"] == 20240601
        assert "SYNTHETIC" in payload["meta"]["input"]
        assert "contrast_ih_minus_aa_jeffreys" in payload["meta"]
        groups = [r["group"] for r in payload["rows"]]
        assert groups == ["ml4", "ml4+ref", "aa", "ih", "aa+ref", "ih+ref"]
        for r in payload["rows"]:
            assert 0 <= r["rho_hdi_lo"] <= r["rho_mean"] <= r["rho_hdi_hi"] <= 1

    def test_ml4_summary_input(self, capsys, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("group,m,mean_g,sd_g,se\nml4,17,0.055,0.25,0.2\n")
        code, out, _ = invoke(capsys, "ml4", "--summary", str(p), "--groups", "ml4",
                              "--draws", "5000", "--prior", "weak")
        assert code == 0
        _, rows = parse_csv(out)
        assert len(rows) == 1 and rows[0]["prior"] == "weak"

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "t1.csv"
        code, out, _ = invoke(capsys, "example1", "--out", str(target))
        assert code == 0 and out == ""
        assert len(parse_csv(target.read_text())[1]) == 16


class TestReproducibility:
    @pytest.mark.parametrize("argv", [
        ["ml4", "--draws", "10000", "--groups", "aa"],
        ["figure1", "--grid-mu", "21", "--m", "5"],
        ["example2", "--bias", "0,0.5"],
    ])
    def test_byte_identical(self, capsys, argv):
        a = invoke(capsys, *argv)[1]
        b = invoke(capsys, *argv)[1]
        assert a == b and a

    def test_seed_changes_ml4(self, capsys):
        a = invoke(capsys, "ml4", "--draws", "5000", "--groups", "ml4", "--seed", "1")[1]
        b = invoke(capsys, "ml4", "--draws", "5000", "--groups", "ml4", "--seed", "2")[1]
        assert parse_csv(a)[1] != parse_csv(b)[1]


class TestErrors:
    @pytest.mark.parametrize("argv", [
        ["figure1", "--m", ""],
        ["figure1", "--m", "5,abc"],
        ["figure1", "--level", "1.5"],
        ["overlap", "--prior", "fixed:2"],
        ["overlap", "--prior", "weak"],
        ["ml4", "--prior", "uniform"],
        ["ml4", "--draws", "10"],
        ["ml4", "--groups", "zz"],
        ["nosuchcommand"],
        ["figure1", "--format", "xml"],
    ])
    def test_validation(self, capsys, argv):
        code, out, err = invoke(capsys, *argv)
        assert code == 2 and out == ""
        assert_single_line_error(err, "validation")

    def test_bad_input_file(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("site_id,g\nx,1\n")
        code, _, err = invoke(capsys, "ml4", "--input", str(p))
        assert code == 2
        assert_single_line_error(err, "validation")

    def test_missing_input(self, capsys, tmp_path):
        code, _, err = invoke(capsys, "ml4", "--input", str(tmp_path / "nope.csv"))
        assert code == 3
        assert_single_line_error(err, "io")

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, err = invoke(capsys, "example1", "--out", str(tmp_path / "no" / "dir" / "x.csv"))
        assert code == 3
        assert_single_line_error(err, "io")
        assert "no/dir/x.csv" in err

    def test_non_convergence(self, capsys):
        code, out, err = invoke(capsys, "example2", "--u", "0", "--bias", "0", "--noise", "40",
                                "--n", "5000")
        assert code == 4 and out == ""
        assert_single_line_error(err, "numeric")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "replicability", "example1", "--format", "json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert len(json.loads(proc.stdout)["rows"]) == 16
    proc = subprocess.run([sys.executable, "-m", "replicability", "figure1", "--m", "x"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2
    assert proc.stderr.count("\n") == 1
