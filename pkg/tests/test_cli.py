import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from polyshift.experiments.cli import build_parser, main, parse_shifts
from polyshift.experiments.io import read_csv
from polyshift.graphs import build_circulant, build_random_geometric, write_edge_list
from polyshift.polyfilter import PolyCoeffs, dump_filter


@pytest.fixture
def rgg_file(tmp_path):
    p = tmp_path / "g.txt"
    write_edge_list(build_random_geometric(30, 0.4, seed=1), p)
    return p


@pytest.fixture
def circ_file(tmp_path):
    p = tmp_path / "c.txt"
    write_edge_list(build_circulant(20, [1, 2]), p)
    return p


class TestSpectrum:
    def test_stdout(self, circ_file, capsys):
        assert main(["spectrum", "--graph", str(circ_file), "--shifts", "circ1+circ2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "i,lambda_1,lambda_2" and len(lines) == 21
        lam = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
        f = np.arange(20)
        want = np.column_stack([1 - np.cos(2 * np.pi * f / 20), 1 - np.cos(4 * np.pi * f / 20)])
        assert np.allclose(np.sort(lam[:, 0]), np.sort(want[:, 0]), atol=1e-10)

    def test_out_dir(self, rgg_file, tmp_path):
        out = tmp_path / "sp"
        assert main(["spectrum", "--graph", str(rgg_file), "--out", str(out)]) == 0
        rows = read_csv(out / "spectrum.csv")
        assert len(rows) == 30
        lam = np.array([float(r["lambda_1"]) for r in rows])
        assert lam.min() > -1e-12 and lam.max() < 2 + 1e-12
        assert json.loads((out / "meta.json").read_text())["config"]["shifts"] == "lsym"

    def test_unknown_token(self, rgg_file, capsys):
        assert main(["spectrum", "--graph", str(rgg_file), "--shifts", "bogus"]) == 2
        assert "unknown shift token" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["spectrum", "--graph", str(tmp_path / "nope.txt")]) == 2

    def test_noncommuting(self, rgg_file):
        assert main(["spectrum", "--graph", str(rgg_file), "--shifts", "lsym+adjacency"]) == 2

    def test_parse_shifts(self):
        G = build_circulant(12, [1, 3])
        F = parse_shifts("circ1 + circ3", G)
        assert F.d == 2 and F.n == 12


class TestInverse:
    def test_iopa(self, tmp_path, capsys):
        out = tmp_path / "inv"
        code = main(["inverse", "--n", "200", "--method", "IOPA", "--degree", "2",
                     "--iterations", "6", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "trace_IOPA2.csv")
        assert len(rows) == 7 and float(rows[-1]["rel_error"]) < 1e-6
        meta = json.loads((out / "meta.json").read_text())
        assert meta["diverged"] is False and meta["solver"]["a_L"] < 0.1
        assert "IOPA2" in capsys.readouterr().out

    @pytest.mark.parametrize("method", ["GD0", "ARMA", "ICPA3"])
    def test_methods(self, method, tmp_path):
        assert main(["inverse", "--n", "100", "--method", method, "--out", str(tmp_path)]) == 0
        assert (tmp_path / f"trace_{method}.csv").exists()

    def test_divergence_exit_code(self, tmp_path):
        code = main(["inverse", "--n", "200", "--method", "ICPA0", "--iterations", "30",
                     "--out", str(tmp_path)])
        assert code == 3
        assert json.loads((tmp_path / "meta.json").read_text())["diverged"] is True

    def test_bad_generator(self):
        assert main(["inverse", "--n", "10", "--generators", "5"]) == 2

    def test_bad_method(self):
        assert main(["inverse", "--n", "50", "--method", "NEWTON1"]) == 2

    def test_filter_spec(self, tmp_path):
        dump_filter(PolyCoeffs([3.0, 1.0]), tmp_path / "h.json")
        assert main(["inverse", "--n", "50", "--config", str(tmp_path / "h.json"),
                     "--method", "IOPA1", "--out", str(tmp_path / "o")]) == 0


class TestFilter:
    def test_centralized(self, tmp_path, rgg_file):
        dump_filter(PolyCoeffs([1.0, -0.5, 0.25]), tmp_path / "h.json")
        out = tmp_path / "f"
        assert main(["filter", "--graph", str(rgg_file), "--config", str(tmp_path / "h.json"),
                     "--out", str(out)]) == 0
        rows = read_csv(out / "filtered.csv")
        assert len(rows) == 30

    def test_distributed_matches(self, tmp_path, rgg_file):
        dump_filter(PolyCoeffs([1.0, -0.5, 0.25]), tmp_path / "h.json")
        args = ["filter", "--graph", str(rgg_file), "--config", str(tmp_path / "h.json"),
                "--seed", "4"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--distributed", "--out", str(tmp_path / "b")])
        ya = np.array([float(r["y"]) for r in read_csv(tmp_path / "a" / "filtered.csv")])
        yb = np.array([float(r["y"]) for r in read_csv(tmp_path / "b" / "filtered.csv")])
        np.testing.assert_allclose(ya, yb, atol=1e-13)
        summary = json.loads((tmp_path / "b" / "comm_summary.json").read_text())
        assert summary["rounds"] == 2 and summary["nonedge_messages"] == 0
        assert len(read_csv(tmp_path / "b" / "comm_log.csv")) == summary["messages"]

    def test_signal_file(self, tmp_path, capsys):
        (tmp_path / "x.csv").write_text("i,value\n" + "".join(f"{i},1.0\n" for i in range(10)))
        assert main(["filter", "--n", "10", "--generators", "1", "--signal",
                     str(tmp_path / "x.csv")]) == 0
        # L_sym annihilates constants: h1(L) 1 = 27/4 * 1
        norm = float(capsys.readouterr().out.split("=")[1])
        assert norm == pytest.approx(27 / 4 * np.sqrt(10), rel=1e-10)

    def test_multishift_needs_spec(self, circ_file):
        assert main(["filter", "--graph", str(circ_file), "--shifts", "circ1+circ2"]) == 2


class TestExperimentCommands:
    def test_exp_circulant(self, tmp_path):
        code = main(["exp-circulant", "--n", "100", "--trials", "3", "--method", "GD0,IOPA1",
                     "--iterations", "6", "--out", str(tmp_path)])
        assert code == 0
        for name in ("table.csv", "rates.csv", "trace_GD0.csv", "trace_IOPA1.csv", "meta.json"):
            assert (tmp_path / name).exists()
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["config"]["methods"] == ["GD0", "IOPA1"] and meta["config"]["trials"] == 3

    def test_expected_divergence_is_success(self, tmp_path):
        assert main(["exp-circulant", "--n", "100", "--trials", "2", "--method", "ICPA0",
                     "--out", str(tmp_path)]) == 0

    def test_degree_flag(self, tmp_path):
        main(["exp-circulant", "--n", "60", "--trials", "1", "--degree", "2",
              "--iterations", "4", "--out", str(tmp_path)])
        assert [r["method"] for r in read_csv(tmp_path / "table.csv")] == ["IOPA2", "ICPA2"]

    def test_config_file_with_override(self, tmp_path):
        cfg = {"experiment": "exp-circulant", "n": 80, "trials": 1, "iterations": 4,
               "methods": ["IOPA1"]}
        (tmp_path / "c.json").write_text(json.dumps(cfg))
        main(["exp-circulant", "--config", str(tmp_path / "c.json"), "--seed", "9",
              "--out", str(tmp_path / "o")])
        meta = json.loads((tmp_path / "o" / "meta.json").read_text())
        assert meta["config"]["n"] == 80 and meta["config"]["seed"] == 9

    def test_wrong_experiment_config(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"experiment": "exp-temperature"}))
        assert main(["exp-circulant", "--config", str(tmp_path / "c.json")]) == 2

    def test_exp_timevarying(self, tmp_path):
        assert main(["exp-timevarying", "--n", "60", "--trials", "1", "--eta", "1/2",
                     "--iterations", "2", "--out", str(tmp_path)]) == 0
        assert {r["mode"] for r in read_csv(tmp_path / "table.csv")} == {"vertex", "temporal",
                                                                          "joint"}

    def test_exp_temperature_bad_data(self, tmp_path, capsys):
        (tmp_path / "t.csv").write_text("station_id,lat,lon,h00\nA,1,2,x\n")
        assert main(["exp-temperature", "--data", str(tmp_path / "t.csv")]) == 2
        assert "row 2, col 4" in capsys.readouterr().err

    def test_exp_temperature_synthetic(self, tmp_path):
        assert main(["exp-temperature", "--trials", "1", "--eta", "20", "--method", "IOPA1",
                     "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "meta.json").read_text())["synthetic"] is True


class TestParser:
    def test_subcommands(self):
        p = build_parser()
        for cmd in ("exp-circulant", "exp-timevarying", "exp-temperature", "filter", "inverse",
                    "spectrum"):
            assert p.parse_args([cmd] + (["--graph", "g"] if cmd == "spectrum" else [])).command == cmd

    def test_generators_parse(self):
        args = build_parser().parse_args(["inverse", "--generators", "1,2,5", "--eta", "0.75,1/4"])
        assert args.generators == [1, 2, 5] and args.eta == [0.75, 0.25]

    def test_console_script(self, circ_file):
        exe = shutil.which("polyshift")
        cmd = [exe] if exe else [sys.executable, "-m", "polyshift.experiments.cli"]
        r = subprocess.run(cmd + ["spectrum", "--graph", str(circ_file), "--shifts", "bogus"],
                           capture_output=True, text=True)
        assert r.returncode == 2
