import csv
import json

import numpy as np
import pytest
import scipy.sparse as sp

from polyshift import errors
from polyshift.distnet import CommStats, Network, VertexAgent, sim_filter, sim_inverse
from polyshift.experiments.circulant import H1, circulant_problem
from polyshift.graphs import Graph, build_circulant, build_path, sym_normalized_laplacian
from polyshift.inverse import chebyshev_coeffs, icpa_solve, iopa_solve, optimal_poly
from polyshift.polyfilter import PolyCoeffs, apply
from polyshift.shifts import ShiftFamily, kron_lift, lsym_shift

from families import product_family, random_family, rgg_family


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestSimFilter:
    def test_single_shift_one_round(self, small_rgg, rng):
        F = ShiftFamily([lsym_shift(small_rgg)])
        x = rng.standard_normal(small_rgg.n)
        y, stats = sim_filter(PolyCoeffs([0.0, 1.0]), F, x)
        np.testing.assert_allclose(y, F.shifts[0] @ x, atol=1e-15)
        assert stats.rounds == 1
        assert stats.total_messages == 2 * small_rgg.n_edges

    def test_two_shifts_against_apply(self, rng):
        F, G = rgg_family(rng, 30, 2)
        h = PolyCoeffs(rng.standard_normal((3, 4)))
        x = rng.standard_normal(30)
        y, stats = sim_filter(h, F, x)
        assert _rel(y, apply(h, F, x)) <= 1e-10
        assert stats.rounds == 3 * 4 - 1

    @pytest.mark.parametrize("degrees", [(1,), (4,), (2, 3), (1, 2, 2)])
    def test_message_bound(self, rng, degrees):
        F, G = rgg_family(rng, 50, len(degrees))
        h = PolyCoeffs(rng.standard_normal(tuple(L + 1 for L in degrees)))
        _, stats = sim_filter(h, F, rng.standard_normal(50))
        prod = np.prod([L + 1 for L in degrees])
        assert np.all(stats.sent <= G.degrees() * prod)
        assert stats.nonedge_messages == 0

    def test_loop_engine_matches(self, rng):
        F, G = rgg_family(rng, 25, 2)
        h = PolyCoeffs(rng.standard_normal((2, 3)))
        x = rng.standard_normal(25)
        a, _ = sim_filter(h, F, x)
        b, _ = sim_filter(h, F, x, engine="loop", order=rng.permutation(25))
        np.testing.assert_array_equal(a, b)

    def test_product_graph(self, rng):
        F, G = product_family(rng, 5, 6)
        h = PolyCoeffs(rng.standard_normal((3, 3)))
        x = rng.standard_normal(G.n)
        y, stats = sim_filter(h, F, x, graph=G)
        assert _rel(y, apply(h, F, x)) <= 1e-10
        assert stats.nonedge_messages == 0

    def test_structured_shifts_materialized(self, rng):
        T = build_path(4)
        G0 = build_circulant(9, [1])
        from polyshift.graphs import cartesian_product, laplacian

        G = cartesian_product(T, G0)
        S1 = kron_lift(laplacian(T), "left", 9, graph=G)
        S2 = kron_lift(sym_normalized_laplacian(G0), "right", 4, graph=G)
        F = ShiftFamily([S1, S2])
        h = PolyCoeffs(rng.standard_normal((2, 2)))
        x = rng.standard_normal(36)
        y, _ = sim_filter(h, F, x, graph=G)
        np.testing.assert_allclose(y, apply(h, F, x), atol=1e-12)

    def test_structured_cap(self):
        F = ShiftFamily([kron_lift(np.eye(3), "left", 3)])
        G = build_circulant(9, [1])
        with pytest.raises(errors.StructuredShiftError):
            Network(F, G, cap=5)

    def test_disconnected(self):
        G = Graph.from_edges(4, [[0, 1], [2, 3]])
        with pytest.raises(errors.DisconnectedGraphError):
            Network([sp.identity(4)], G)

    def test_width_violation(self):
        G = build_path(3)
        S = np.zeros((3, 3))
        S[0, 2] = 1.0
        with pytest.raises(errors.WidthViolationError):
            Network([S], G)

    def test_bad_engine(self, small_rgg):
        with pytest.raises(ValueError):
            Network(ShiftFamily([lsym_shift(small_rgg)]), engine="threads")

    def test_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            F, G = random_family(rng, n_max=80)
            degrees = tuple(int(v) for v in rng.integers(0, 4, F.d))
            h = PolyCoeffs(rng.standard_normal(tuple(L + 1 for L in degrees)))
            x = rng.standard_normal(F.n)
            y, stats = sim_filter(h, F, x, graph=G)
            assert _rel(y, apply(h, F, x)) <= 1e-10
            assert stats.nonedge_messages == 0


class TestAgents:
    def test_slots_and_rows(self, small_rgg):
        S = lsym_shift(small_rgg)
        net = Network(ShiftFamily([S]))
        A = S.toarray()
        for a in net.agents:
            assert isinstance(a, VertexAgent)
            assert a.slots[0] == a.id
            np.testing.assert_array_equal(a.neighbors, small_rgg.neighbors(a.id))
            np.testing.assert_allclose(a.rows[0], A[a.id, a.slots])

    def test_local_shift(self, small_rgg, rng):
        S = lsym_shift(small_rgg)
        net = Network(ShiftFamily([S]))
        z = rng.standard_normal(small_rgg.n)
        a = net.agents[3]
        val = a.local_shift(0, z[3], {j: z[j] for j in a.neighbors})
        assert val == pytest.approx((S @ z)[3])


class TestSimInverse:
    def test_zero_iterations(self, small_rgg, rng):
        F = ShiftFamily([lsym_shift(small_rgg)])
        x, tr, _ = sim_inverse("IOPA", H1, PolyCoeffs([0.3]), F, rng.standard_normal(40), 0)
        np.testing.assert_array_equal(x, 0)

    def test_iopa_matches_centralized(self, rng):
        F, spec = circulant_problem(200, [1, 2, 5])
        x = rng.uniform(-1, 1, 200)
        b = apply(H1, F, x)
        g = optimal_poly(H1, spec, 1)
        central = iopa_solve(H1, F, b, 1, 6, x_true=x, g=g)
        xd, tr, stats = sim_inverse("IOPA", H1, g[0], F, b, 6, x_true=x, log_messages=True)
        np.testing.assert_allclose(tr.rel_errors, central.rel_errors, rtol=0, atol=1e-10)
        np.testing.assert_allclose(tr.residuals, central.residuals,
                                   atol=1e-10 * central.residuals[0])
        np.testing.assert_allclose(xd, central.x, atol=1e-10)
        G = F.graph
        src = np.array([m[1] for m in stats.log])
        dst = np.array([m[2] for m in stats.log])
        assert np.all(G.has_edge(src, dst))
        assert stats.nonedge_messages == 0

    def test_icpa_matches_centralized(self, rng):
        F, spec = circulant_problem(120, [1, 2, 5])
        x = rng.uniform(-1, 1, 120)
        b = apply(H1, F, x)
        c = chebyshev_coeffs(H1, 1, 3)
        central = icpa_solve(H1, F, b, 3, 5, x_true=x)
        _, tr, _ = sim_inverse("ICPA", H1, c, F, b, 5, x_true=x)
        np.testing.assert_allclose(tr.rel_errors, central.rel_errors, atol=1e-10)

    def test_bad_method(self, small_rgg):
        with pytest.raises(ValueError):
            sim_inverse("GD", H1, PolyCoeffs([1.0]), ShiftFamily([lsym_shift(small_rgg)]),
                        np.ones(40), 2)


class TestCommStats:
    def test_exports(self, tmp_path, small_rgg, rng):
        _, stats = sim_filter(PolyCoeffs([1.0, 1.0, 1.0]), ShiftFamily([lsym_shift(small_rgg)]),
                              rng.standard_normal(40), log_messages=True)
        stats.to_csv(tmp_path / "log.csv")
        stats.to_json(tmp_path / "s.json")
        rows = list(csv.DictReader(open(tmp_path / "log.csv")))
        assert len(rows) == stats.total_messages == 2 * 2 * small_rgg.n_edges
        assert {int(r["round"]) for r in rows} == {0, 1}
        assert json.load(open(tmp_path / "s.json"))["rounds"] == 2

    def test_log_required(self):
        with pytest.raises(ValueError):
            CommStats(3).to_csv("/dev/null")

    def test_merge(self):
        a, b = CommStats(2, True), CommStats(2, True)
        a.record(np.array([0]), np.array([1]), 1)
        b.record(np.array([1]), np.array([0]), 1)
        a.merge(b)
        assert a.rounds == 2 and a.log[1][0] == 1
        np.testing.assert_array_equal(a.sent, [1, 1])
