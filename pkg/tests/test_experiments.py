import json
import os

import numpy as np
import pytest
import scipy.sparse as sp

from polyshift import errors
from polyshift.experiments import ExperimentConfig, exp_circulant, exp_temperature, exp_timevarying
from polyshift.experiments.circulant import parse_method
from polyshift.experiments.denoise import (
    DenoiseProblem,
    compute_penalties,
    initial_strip_signal,
    read_temperature_csv,
    simulate_timevarying,
    snr_db,
    synthetic_temperature,
    temperature_filter,
    temperature_problem,
    timevarying_filter,
    timevarying_graph,
    timevarying_problem,
)
from polyshift.experiments.io import read_csv
from polyshift.graphs import sym_normalized_laplacian
from polyshift.inverse import iopa_solve
from polyshift.polyfilter import materialize


def _write_temperature(path, ids, coords, W):
    with open(path, "w") as fh:
        fh.write("station_id,lat,lon," + ",".join(f"h{k:02d}" for k in range(W.shape[1])) + "\n")
        for i, (c, w) in zip(ids, zip(coords, W)):
            fh.write(",".join([i] + [repr(float(v)) for v in (*c, *w)]) + "\n")


@pytest.fixture(scope="module")
def tv_small():
    G, _ = timevarying_graph(64, 0.25, seed=2)
    truth, fam, ev, et, Q1, Q2 = timevarying_problem(G, 6, 0.1)
    return G, truth, fam, ev, et, Q1, Q2


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig("exp-timevarying")
        assert c.n == 512 and c.snapshots == 24 and c.eta == [0.75, 0.5, 0.25]
        assert ExperimentConfig().trials == 100

    def test_json_round_trip(self, tmp_path):
        c = ExperimentConfig("exp-circulant", n=50, trials=3, methods=["IOPA2"])
        c.to_json(tmp_path / "c.json")
        assert ExperimentConfig.from_json(tmp_path / "c.json") == c

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"experiment": "exp-circulant", "bogus": 1})

    @pytest.mark.parametrize("name,want", [("IOPA3", ("IOPA", 3)), ("gd0", ("GD0", None)),
                                           ("ARMA", ("ARMA", None))])
    def test_parse_method(self, name, want):
        assert parse_method(name) == want

    @pytest.mark.parametrize("name", ["IOPA", "XYZ1", "ICPA-1"])
    def test_parse_method_rejects(self, name):
        with pytest.raises(ValueError):
            parse_method(name)


class TestCirculant:
    def test_outputs_and_determinism(self, tmp_path):
        kw = dict(n=100, trials=5, iterations=12, report_m=[1, 2, 5, 10],
                  methods=["GD0", "IOPA1", "ICPA2", "ICPA0", "ARMA"])
        r1 = exp_circulant(ExperimentConfig("exp-circulant", out=str(tmp_path / "a"), **kw))
        exp_circulant(ExperimentConfig("exp-circulant", out=str(tmp_path / "b"), **kw))
        for name in ["table.csv", "rates.csv", "trace_GD0.csv", "trace_IOPA1.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        table = read_csv(tmp_path / "a" / "table.csv")
        assert [r["method"] for r in table] == kw["methods"]
        assert list(table[0]) == ["method", "m1", "m2", "m5", "m10"]
        meta = json.loads((tmp_path / "a" / "meta.json").read_text())
        assert meta["config"]["n"] == 100 and "numpy" in meta["versions"]
        assert r1["diverged"]["ICPA0"] and not r1["diverged"]["IOPA1"]
        assert r1["unexpected_divergence"] == []
        rates = {r["method"]: r for r in read_csv(tmp_path / "a" / "rates.csv")}
        assert rates["ICPA0"]["diverged"] == "true"

    def test_rates_nearly_independent_of_size(self):
        kw = dict(trials=10, iterations=20, methods=[f"IOPA{k}" for k in range(6)]
                  + [f"ICPA{k}" for k in range(1, 6)])
        small = exp_circulant(ExperimentConfig("exp-circulant", n=100, **kw), write=False)
        big = exp_circulant(ExperimentConfig("exp-circulant", n=1000, **kw), write=False)
        for k in kw["methods"]:
            assert abs(small["rates"][k] - big["rates"][k]) <= 0.05, k

    def test_first_iterates(self):
        res = exp_circulant(ExperimentConfig("exp-circulant", trials=20, iterations=3,
                                             methods=["GD0", "IOPA1"]), write=False)
        assert res["errors"]["GD0"][1] == pytest.approx(0.2350, abs=0.02)
        assert res["errors"]["IOPA1"][1] == pytest.approx(0.1545, abs=0.02)

    def test_custom_filter(self):
        cfg = ExperimentConfig("exp-circulant", n=60, trials=2, iterations=5, methods=["IOPA1"],
                               filter={"degrees": [1], "coeffs": [3.0, 1.0]})
        res = exp_circulant(cfg, write=False)
        assert res["errors"]["IOPA1"][-1] < 1e-3


class TestSimulation:
    def test_zero_dynamics_constant(self, rng):
        x1 = rng.standard_normal(10)
        X = simulate_timevarying(np.zeros((10, 10)), x1, 8, 0.1)
        np.testing.assert_array_equal(X, np.tile(x1, (8, 1)))

    def test_recurrence_residual(self, small_rgg):
        L = sym_normalized_laplacian(small_rgg)
        P = -sp.identity(small_rgg.n) + 0.5 * L
        delta = 0.1
        X = simulate_timevarying(P, initial_strip_signal(small_rgg.coords), 12, delta)
        for j in range(1, 11):
            lhs = (X[j + 1] - 2 * X[j] + X[j - 1]) / delta ** 2
            np.testing.assert_allclose(lhs, P @ X[j], atol=1e-10)

    def test_strip_signal(self):
        pts = np.array([[0.1, 0.1], [0.4, 0.3], [0.6, 0.6], [0.9, 0.9]])
        np.testing.assert_allclose(initial_strip_signal(pts),
                                   [0.3, 0.5 + 0.16 + 0.09, 0.5 - 1.2, 0.5 + 0.81 + 0.81])

    def test_smoothness_decreases(self):
        G, _ = timevarying_graph(512, 1 / 16, seed=0)
        truth, *_ = timevarying_problem(G, 24, 0.1)
        X = truth.reshape(24, 512)
        L = sym_normalized_laplacian(G)
        s = [X[j] @ (L @ X[j]) for j in range(12)]
        assert s[11] < s[0]


class TestPenalties:
    def test_zero_noise(self, rng):
        X = rng.standard_normal(20)
        assert compute_penalties(X, 0.0, sp.identity(20), sp.identity(20)) == (0.0, 0.0)

    def test_temperature_numerator(self, rng):
        X = rng.standard_normal(24 * 218)
        eta = 3.0
        a, b = compute_penalties(X, eta, sp.identity(X.size), 2 * sp.identity(X.size),
                                 c_beta=1.0)
        den = X @ X + eta ** 2 / 3 * X.size
        assert a == pytest.approx(1744 * eta ** 2 / den, rel=1e-12)
        assert b == pytest.approx(1744 * eta ** 2 / (2 * den), rel=1e-12)

    def test_modes(self, rng):
        X = rng.standard_normal(30)
        I = sp.identity(30)
        assert compute_penalties(X, 1.0, I, I, "vertex")[1] == 0.0
        assert compute_penalties(X, 1.0, I, I, "temporal")[0] == 0.0
        with pytest.raises(ValueError):
            compute_penalties(X, 1.0, I, I, "both")

    def test_constant_signal(self, caplog):
        L = sym_normalized_laplacian(timevarying_graph(20, 0.5, 0)[0])
        a, _ = compute_penalties(np.ones(20), 0.5, L - L, L)
        assert a == 0.0

    def test_expected_regularizer(self, tv_small, rng):
        # Monte Carlo check of E[B^T Q B] = X^T Q X + eta^2/3 tr Q
        _, truth, _, _, _, Q1, _ = tv_small
        eta = 0.5
        vals = [float(B @ (Q1 @ B)) for B in
                (truth + rng.uniform(-eta, eta, truth.size) for _ in range(400))]
        want = truth @ (Q1 @ truth) + eta ** 2 / 3 * Q1.diagonal().sum()
        assert np.mean(vals) == pytest.approx(want, rel=0.02)

    def test_snr(self):
        assert snr_db(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == np.inf
        assert snr_db(np.array([1.1, 0.0]), np.array([1.0, 0.0])) == pytest.approx(20.0)


class TestDenoiseProblem:
    def test_kron_equals_dense(self, tv_small, rng):
        _, truth, fam, ev, et, Q1, Q2 = tv_small
        a, b = compute_penalties(truth, 0.5, Q1, Q2)
        p = DenoiseProblem(fam, timevarying_filter(a, b, 0.1), ev, et)
        D = materialize(p.h, [S.toarray() for S in fam.shifts])
        x = rng.standard_normal(truth.size)
        np.testing.assert_allclose(p.apply(x), D @ x, atol=1e-9 * np.linalg.norm(D @ x))

    def test_filter_matches_operator(self, tv_small):
        G, truth, fam, *_ = tv_small
        delta, a, b = 0.1, 0.3, 0.02
        from polyshift.graphs import build_path, laplacian

        N, M = G.n, 6
        Lg = sym_normalized_laplacian(G).toarray()
        LT = laplacian(build_path(M)).toarray()
        P = -np.eye(N) + 0.5 * Lg
        want = (np.eye(N * M) + a * np.kron(np.eye(M), Lg)
                + b * (np.kron(LT, np.eye(N)) / delta ** 2 + np.kron(np.eye(M), P)))
        D = materialize(timevarying_filter(a, b, delta), [S.toarray() for S in fam.shifts])
        np.testing.assert_allclose(D, want, atol=1e-12)

    def test_snr_paths_agree(self, tv_small, rng):
        _, truth, fam, ev, et, Q1, Q2 = tv_small
        for mode in ("vertex", "temporal", "joint"):
            a, b = compute_penalties(truth, 0.5, Q1, Q2, mode)
            p = DenoiseProblem(fam, timevarying_filter(a, b, 0.1), ev, et)
            p.certify()
            B = truth + rng.uniform(-0.5, 0.5, truth.size)
            exact = snr_db(p.solve_exact(B), truth)
            dense = snr_db(p.solve_dense(B), truth)
            it = iopa_solve(p.h, fam, B, 1, 60, tol=1e-14).x
            assert exact == pytest.approx(dense, abs=1e-6)
            assert snr_db(it, truth) == pytest.approx(dense, abs=1e-6)

    def test_certify_rejects(self, tv_small):
        _, _, fam, ev, et, *_ = tv_small
        p = DenoiseProblem(fam, temperature_filter(-1.0, 0.0), ev, et)
        with pytest.raises(errors.NotPositiveDefiniteError):
            p.certify()


@pytest.fixture(scope="module")
def result():
    cfg = ExperimentConfig("exp-timevarying", n=160, radius=0.15, trials=2, iterations=8,
                           eta=[0.75, 0.5, 0.25])
    return exp_timevarying(cfg)


class TestTimeVarying:
    def test_improves_snr(self, result):
        for (eta, mode, method), r in result["summary"].items():
            if mode == "joint" or eta == 0.5:
                assert r["snr_inf"] > r["isnr"], (eta, mode)

    def test_converges_to_limit(self, result):
        for (eta, mode, method), r in result["summary"].items():
            if method in ("IOPA1", "ICPA1"):
                assert abs(r["snr"][7] - r["snr_inf"]) <= 0.01
                assert abs(r["snr"][5] - r["snr_inf"]) <= 0.05

    def test_gd0_slower_first_step(self, result):
        for eta in (0.75, 0.5, 0.25):
            s = result["summary"]
            assert s[(eta, "joint", "GD0")]["snr"][0] < s[(eta, "joint", "IOPA1")]["snr"][0]

    def test_joint_beats_single_domain(self, result):
        s = result["summary"]
        for eta in (0.75, 0.5, 0.25):
            joint = s[(eta, "joint", "IOPA1")]["snr_inf"]
            assert joint >= max(s[(eta, m, "IOPA1")]["snr_inf"] for m in ("vertex", "temporal"))

    def test_outputs(self, tmp_path):
        cfg = ExperimentConfig("exp-timevarying", n=60, radius=0.3, trials=1, iterations=2,
                               eta=[0.5], out=str(tmp_path))
        exp_timevarying(cfg)
        rows = read_csv(tmp_path / "table.csv")
        assert len(rows) == 9
        assert list(rows[0])[-3:] == ["SNR1", "SNR2", "SNRinf"]
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert len(meta["smoothness"]) == 24

    def test_fixed_penalties(self):
        cfg = ExperimentConfig("exp-timevarying", n=60, radius=0.3, trials=1, iterations=2,
                               eta=[0.5], alpha=0.1, beta=0.01, methods=["IOPA1"])
        s = exp_timevarying(cfg)["summary"]
        assert s[(0.5, "joint", "IOPA1")]["alpha"] == 0.1
        assert s[(0.5, "vertex", "IOPA1")]["beta"] == 0.0


class TestTemperature:
    def test_csv_round_trip(self, tmp_path):
        ids, coords, W = synthetic_temperature(n=12, seed=1)
        _write_temperature(tmp_path / "t.csv", ids, coords, W)
        ids2, coords2, W2 = read_temperature_csv(tmp_path / "t.csv")
        assert ids2 == ids
        np.testing.assert_array_equal(W2, W)

    @pytest.mark.parametrize("text,row,col", [
        ("station_id,lat,lon,h00\nA,1,2\n", 2, 3),
        ("station_id,lat,lon,h00\nA,1,2,x\n", 2, 4),
        ("id,lat,lon,h00\n", 1, 0),
    ])
    def test_malformed(self, tmp_path, text, row, col):
        (tmp_path / "t.csv").write_text(text)
        with pytest.raises(errors.DataFormatError) as ei:
            read_temperature_csv(tmp_path / "t.csv")
        assert (ei.value.row, ei.value.col) == (row, col)

    def test_problem_shape(self):
        ids, coords, W = synthetic_temperature(n=30)
        truth, fam, *_, Gw = temperature_problem(coords, W)
        assert truth.size == 30 * 24 and fam.d == 2
        assert Gw.degrees().min() >= 5
        # time-major: entry j * N + i is station i at hour j
        assert truth[3 * 30 + 7] == W[7, 3]

    def test_zero_noise(self):
        res = exp_temperature(ExperimentConfig("exp-temperature", trials=1, eta=[0.0],
                                               iterations=2, methods=["IOPA1"]))
        for r in res["summary"].values():
            assert np.isinf(r["isnr"]) and np.isfinite(r["snr_inf"])

    def test_synthetic_improves(self, tmp_path):
        res = exp_temperature(ExperimentConfig("exp-temperature", trials=2, eta=[20.0],
                                               out=str(tmp_path)))
        s = res["summary"]
        for mode in ("vertex", "temporal", "joint"):
            assert s[(20.0, mode, "IOPA1")]["snr_inf"] > s[(20.0, mode, "IOPA1")]["isnr"]
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["synthetic"] is True and meta["data_source"] == "synthetic"

    def test_from_csv(self, tmp_path):
        ids, coords, W = synthetic_temperature(n=40, seed=3)
        _write_temperature(tmp_path / "t.csv", ids, coords, W)
        res = exp_temperature(ExperimentConfig("exp-temperature", trials=1, eta=[10.0],
                                               data=str(tmp_path / "t.csv"), methods=["IOPA1"]))
        assert res["meta"]["synthetic"] is False and res["meta"]["stations"] == 40

    @pytest.mark.skipif("POLYSHIFT_TEMPERATURE_CSV" not in os.environ,
                        reason="real temperature dataset not supplied")
    def test_joint_beats_single_on_dataset(self):
        cfg = ExperimentConfig("exp-temperature", trials=3,
                               data=os.environ["POLYSHIFT_TEMPERATURE_CSV"], methods=["IOPA1"])
        s = exp_temperature(cfg)["summary"]
        for eta in cfg.eta:
            joint = s[(eta, "joint", "IOPA1")]["snr_inf"]
            assert joint >= max(s[(eta, m, "IOPA1")]["snr_inf"] for m in ("vertex", "temporal"))
