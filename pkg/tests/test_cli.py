import pandas as pd
import pytest

from cli import CONTRACT_PASSED, CONTRACT_VIOLATED, RUNTIME_ERROR, parse_complex, run


def read_csv(path):
    return pd.read_csv(path, comment="#")


def summary_line(capsys):
    return [line for line in capsys.readouterr().out.splitlines() if line.startswith("# ")][-1]


def test_parse_complex():
    assert parse_complex("0+2i") == 2j
    assert parse_complex("1-0.5j") == 1 - 0.5j
    assert parse_complex("3") == 3


def test_hardy_single_spike(tmp_path, capsys):
    out = tmp_path / "hardy.csv"
    status = run(["hardy", "--p", "2", "--seq", "single-spike", "--N", "100000", "--out", str(out)])
    assert status == CONTRACT_PASSED
    frame = read_csv(out)
    assert frame["ratio"][0] == pytest.approx(1.64492, abs=1e-5)
    assert "PASS" in summary_line(capsys)


def test_blowup_writes_fixed_columns(tmp_path, capsys):
    out = tmp_path / "blowup.csv"
    status = run(["blowup", "--k", "1", "--f", "log", "--anchor-n", "100", "--a-min", "1e-3", "--a-max", "1",
                  "--points", "6", "--N", "1024", "--out", str(out)])
    assert status == CONTRACT_PASSED
    frame = read_csv(out)
    assert list(frame.columns) == ["a", "norm", "lower_bound", "remark_bound", "violated"]
    assert len(frame) == 6
    assert "slope=" in summary_line(capsys)


def test_norm_resolvent_lower_bound(tmp_path):
    out = tmp_path / "r.csv"
    status = run(["norm-resolvent", "--k", "1", "--f", "log", "--lambda", "0+2i", "--N", "10000", "--out", str(out)])
    assert status == CONTRACT_PASSED
    frame = read_csv(out)
    assert frame["lower_bound"][0] == pytest.approx(1 / 0.05408, rel=1e-3)
    assert frame["norm"][0] >= frame["lower_bound"][0] - 1e-8


def test_sk_check_flags_sqrt_witness(tmp_path):
    out = tmp_path / "sk.csv"
    assert run(["sk-check", "--f", "sqrt-witness", "--N", "10000", "--out", str(out)]) == CONTRACT_VIOLATED
    assert run(["sk-check", "--f", "log", "--k", "2", "--N", "10000", "--out", str(out)]) == CONTRACT_PASSED
    assert list(read_csv(out)["j"]) == [1, 2]


def test_minimality(tmp_path):
    out = tmp_path / "m.csv"
    assert run(["minimality", "--k", "1", "--N", "2000", "--out", str(out)]) == CONTRACT_PASSED
    frame = read_csv(out)
    assert (frame["distance"] - frame["n_pow_minus_half"]).abs().max() < 1e-10


def test_partial_sums_and_blocks(tmp_path):
    out = tmp_path / "p.csv"
    assert run(["partial-sums", "--k", "1", "--N", "8", "--blocks", "uniform:1", "--max-prefix", "3", "--out", str(out)]) == CONTRACT_PASSED
    assert read_csv(out)["norm"].iloc[-1] == pytest.approx(2.0)
    assert run(["blocks", "--k", "2", "--N", "30", "--blocks", "random:4", "--out", str(out)]) == CONTRACT_PASSED
    assert (read_csv(out)["norm"] >= 1.0).all()


def test_laplace(tmp_path):
    out = tmp_path / "l.csv"
    assert run(["laplace", "--lambda", "1", "--N", "16", "--T", "40", "--steps", "4000", "--out", str(out)]) == CONTRACT_PASSED
    frame = read_csv(out)
    assert frame["error"][0] <= 10 * frame["total"][0]


def test_integral_scan(tmp_path):
    out = tmp_path / "i.csv"
    status = run(["integral-scan", "--N", "8", "--a-min", "0.1", "--a-max", "10", "--points", "3",
                  "--x", "basis:1", "--y", "basis:1", "--out", str(out)])
    assert status == CONTRACT_PASSED
    assert {"a", "integral", "normalized", "pairing", "adjoint"} <= set(read_csv(out).columns)


def test_spectrum_map(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["spectrum-map", "--N", "64", "--out", str(out)]) == CONTRACT_PASSED
    assert len(read_csv(out)) == 3


def test_nongen_witness(tmp_path):
    out = tmp_path / "w.csv"
    assert run(["nongen-witness", "--N-list", "32,128,512", "--t", "1", "--out", str(out)]) == CONTRACT_PASSED
    assert list(read_csv(out)["N"]) == [32.0, 128.0, 512.0]


def test_norm_group(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["norm-group", "--N", "64", "--t-min", "1", "--t-max", "50", "--points", "5", "--out", str(out)]) == CONTRACT_PASSED


def test_norm_resolvent_lp_reports_lower_bound(tmp_path, capsys):
    out = tmp_path / "r3.csv"
    status = run(["norm-resolvent", "--k", "1", "--p", "3", "--lambda", "1+1i", "--N", "64", "--out", str(out)])
    assert status == CONTRACT_PASSED
    frame = read_csv(out)
    assert bool(frame["lower_bound_only"][0])
    assert pd.isna(frame["remark_bound"][0])
    assert frame["norm"][0] >= frame["lower_bound"][0] - 1e-8
    assert "norm lower bound=" in summary_line(capsys)


def test_norm_group_lp_flags_every_row(tmp_path):
    out = tmp_path / "g3.csv"
    status = run(["norm-group", "--p", "3", "--N", "64", "--t-min", "1", "--t-max", "20", "--points", "4", "--out", str(out)])
    assert status in (CONTRACT_PASSED, CONTRACT_VIOLATED)
    frame = read_csv(out)
    assert frame["lower_bound_only"].astype(bool).all()
    assert (frame["norm"] >= 1.0 - 1e-12).all()


def test_tabulated_symbol(tmp_path):
    table = tmp_path / "f.txt"
    table.write_text("\n".join(str(v) for v in [0.0, 0.5, 0.9, 1.2, 1.4, 1.55, 1.65, 1.7]) + "\n")
    out = tmp_path / "t.csv"
    status = run(["norm-resolvent", "--f", "table", "--table", str(table), "--lambda", "1+1i", "--N", "8", "--out", str(out)])
    assert status == CONTRACT_PASSED


def test_output_is_reproducible(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["blocks", "--k", "1", "--N", "40", "--blocks", "random:5", "--seed", "9"]
    assert run(args + ["--out", str(first)]) == CONTRACT_PASSED
    assert run(args + ["--out", str(second)]) == CONTRACT_PASSED
    first_lines = first.read_text().splitlines()
    second_lines = second.read_text().splitlines()
    assert first_lines[0].startswith("# subcommand=blocks N=40 seed=9")
    assert first_lines[1:] == second_lines[1:]


class TestErrors:
    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == RUNTIME_ERROR
        assert "Usage" in capsys.readouterr().err

    def test_bad_flag_prints_flag_table(self, capsys):
        assert run(["blowup", "--points", "zero"]) == RUNTIME_ERROR
        err = capsys.readouterr().err
        assert "--anchor-n" in err

    def test_table_without_path(self):
        assert run(["norm-resolvent", "--f", "table", "--lambda", "1"]) == RUNTIME_ERROR

    def test_lambda_on_spectrum(self, capsys):
        assert run(["norm-resolvent", "--lambda", "0", "--N", "16"]) == RUNTIME_ERROR
        assert "spectrum" in capsys.readouterr().err

    def test_hardy_exponent_out_of_range(self):
        assert run(["hardy", "--p", "1"]) == RUNTIME_ERROR

    def test_missing_table_file(self, tmp_path):
        assert run(["sk-check", "--f", "table", "--table", str(tmp_path / "none.txt")]) == RUNTIME_ERROR

    def test_degenerate_grid_range(self, capsys):
        assert run(["blowup", "--a-min", "0.5", "--a-max", "0.5", "--points", "3", "--N", "64", "--anchor-n", "4"]) == RUNTIME_ERROR
        assert "min < max" in capsys.readouterr().err

    def test_power_failure_names_its_time(self, monkeypatch, capsys):
        from config import Config

        monkeypatch.setattr(Config, "POWER_MAX_ITER", 2)
        status = run(["norm-group", "--N", "64", "--t-min", "3", "--t-max", "7", "--points", "2", "--method", "power"])
        assert status == RUNTIME_ERROR
        assert "t=3" in capsys.readouterr().err
