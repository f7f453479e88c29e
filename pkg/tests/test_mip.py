import numpy as np
import pytest

import choicekit as ck
from choicekit.mip import (LinearRow, MipInstance, Variable, _interval_propagate,
                           _quad_bounds, quad_exp, surrogate_value)
from choicekit.neural import _forward_batch, init_params
from helpers import propagate_rows


class TestBruteForce:
    def test_zero_revenue_tie_breaks_to_no_purchase(self):
        model = ck.gen_instance("mnl", 6, 0)
        rev = ck.RevenueSpec(np.zeros(6), model.universe)
        res = ck.brute_force_opt(model, rev)
        assert res.mask.tolist() == [False] * 5 + [True]
        assert res.objective == 0.0

    def test_three_product_enumeration(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.MnlModel(u3, np.zeros(3))
        rev = ck.RevenueSpec(np.array([30.0, 20.0, 0.0]), u3)
        res = ck.brute_force_opt(model, rev)
        assert res.mask.tolist() == [True, True, True]
        assert res.objective == pytest.approx(50 / 3)

    def test_capacity_filter(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.MnlModel(u3, np.zeros(3))
        rev = ck.RevenueSpec(np.array([30.0, 20.0, 0.0]), u3)
        cap = ck.CapacityConstraint(np.array([1.0, 1.0, 0.0]), 1.0, u3)
        res = ck.brute_force_opt(model, rev, cap)
        assert res.mask.tolist() == [True, False, True]
        assert res.objective == pytest.approx(15.0)

    def test_budget_guard(self):
        model = ck.gen_instance("mnl", 26, 0)
        rev = ck.gen_revenue(model.universe, np.random.default_rng(0))
        with pytest.raises(ValueError, match="enumeration budget"):
            ck.brute_force_opt(model, rev)


class TestRevenueOrdered:
    def test_matches_brute_force_on_mnl(self):
        # optimal unconstrained MNL assortments are revenue-ordered and nested
        for seed in range(25):
            model = ck.gen_instance("mnl", 9, seed)
            rev = ck.gen_revenue(model.universe, np.random.default_rng(seed))
            bf = ck.brute_force_opt(model, rev)
            ro = ck.revenue_ordered(model, rev)
            assert ro.objective == pytest.approx(bf.objective, abs=1e-9)

    def test_single_product_decision(self):
        u2 = ck.Universe.with_no_purchase(2)
        model = ck.MnlModel(u2, np.array([0.0, 0.0]))
        rev = ck.RevenueSpec(np.array([8.0, 0.0]), u2)
        res = ck.revenue_ordered(model, rev)
        assert res.mask.tolist() == [True, True]
        assert res.objective == pytest.approx(4.0)


class TestAdxopt:
    def test_fixed_point_at_optimum(self):
        # unconstrained MNL: the search must terminate at the brute optimum
        model = ck.gen_instance("mnl", 8, 3)
        rev = ck.gen_revenue(model.universe, np.random.default_rng(3))
        bf = ck.brute_force_opt(model, rev)
        res = ck.adxopt(model, rev)
        assert res.objective == pytest.approx(bf.objective, abs=1e-9)

    def test_oracle_sweep_small(self):
        hits = 0
        for seed in range(30):
            model = ck.gen_instance("mnl", 8, 100 + seed)
            rev = ck.gen_revenue(model.universe, np.random.default_rng(seed))
            bf = ck.brute_force_opt(model, rev)
            res = ck.adxopt(model, rev)
            hits += abs(res.objective - bf.objective) < 1e-9
        assert hits >= 29

    def test_respects_capacity(self):
        model = ck.gen_instance("mccm", 8, 4)
        rng = np.random.default_rng(4)
        rev = ck.gen_revenue(model.universe, rng)
        cap = ck.gen_capacity(model.universe, rng)
        res = ck.adxopt(model, rev, cap)
        assert cap.satisfied(res.mask)


class TestBellman:
    def test_exit_chain_includes_every_paying_product(self):
        # immediate exit to no-purchase: no substitution, offer everything
        u4 = ck.Universe.with_no_purchase(4)
        rho = np.zeros((4, 4))
        rho[:, 3] = 1.0
        model = ck.MccmModel(u4, np.array([0.3, 0.3, 0.2, 0.2]), rho)
        rev = ck.RevenueSpec(np.array([5.0, 1.0, 9.0, 0.0]), u4)
        res = ck.mccm_bellman_opt(model, rev)
        assert res.mask.tolist() == [True, True, True, True]

    def test_matches_brute_force_sweep(self):
        for seed in range(30):
            model = ck.gen_instance("mccm", 9, 200 + seed)
            rev = ck.gen_revenue(model.universe, np.random.default_rng(seed))
            bf = ck.brute_force_opt(model, rev)
            bel = ck.mccm_bellman_opt(model, rev)
            assert bel.objective == pytest.approx(bf.objective, abs=1e-8)

    def test_concentrated_arrивals_keep_top_product(self):
        u3 = ck.Universe.with_no_purchase(3)
        lam = np.array([0.98, 0.01, 0.01])
        rho = np.full((3, 3), 1 / 3)
        model = ck.MccmModel(u3, lam, rho)
        rev = ck.RevenueSpec(np.array([50.0, 10.0, 0.0]), u3)
        res = ck.mccm_bellman_opt(model, rev)
        assert res.mask[0]

    def test_capacity_refused(self):
        model = ck.gen_instance("mccm", 5, 0)
        rng = np.random.default_rng(0)
        rev = ck.gen_revenue(model.universe, rng)
        cap = ck.gen_capacity(model.universe, rng)
        with pytest.raises(ValueError, match="unconstrained"):
            ck.mccm_bellman_opt(model, rev, cap)


class TestNnMip:
    def _net(self, n, L, seed, spread=1.0):
        rng = np.random.default_rng(seed)
        params = init_params("gasn", n, L=L, rng=rng)
        for b in params.biases:
            b += spread * rng.normal(size=b.shape)
        return params

    def test_rasn_refused(self):
        params = init_params("rasn", 5, L=1, rng=np.random.default_rng(0))
        rev = ck.gen_revenue(ck.Universe.with_no_purchase(5), np.random.default_rng(0))
        with pytest.raises(ValueError, match="gated"):
            ck.build_nn_mip(params, rev)

    def test_zero_weight_single_layer_propagation(self):
        # with W=0 the constraint system pins the final layer to the bias
        n = 3
        u = np.array([0.7, -1.2, 0.4])
        params = ck.NetworkParams("gasn", [np.zeros((n, n))], [u])
        rev = ck.RevenueSpec(np.array([10.0, 5.0, 0.0]), ck.Universe.with_no_purchase(n))
        mip = ck.build_nn_mip(params, rev)
        vals = propagate_rows(mip, np.array([1.0, 1.0, 1.0]))
        zL = [vals[i] for i in mip.meta["zL"]]
        assert np.allclose(zL, u)

    @pytest.mark.parametrize("L", [1, 2])
    def test_row_propagation_matches_forward(self, L):
        # big-M faithfulness on random nets and random binary inputs
        rng = np.random.default_rng(L)
        for trial in range(25):
            n = int(rng.integers(4, 9))
            params = self._net(n, L, seed=1000 * L + trial)
            rev = ck.gen_revenue(ck.Universe.with_no_purchase(n), rng)
            mip = ck.build_nn_mip(params, rev)
            z0 = rng.integers(0, 2, size=n).astype(float)
            z0[n - 1] = 1.0
            vals = propagate_rows(mip, z0)
            acts = _forward_batch(params, z0[None, :])
            zL = np.array([vals[i] for i in mip.meta["zL"]])
            assert np.allclose(zL, acts["logits"][0], atol=1e-7)

    def test_dead_unit_indicator_fixed(self):
        # a unit with an all-nonpositive row and negative bias can never fire
        n = 3
        w1 = np.array([[-1.0, -1.0, -1.0], [0.5, 0.2, 0.1], [0.1, 0.1, 0.1]])
        b1 = np.array([-0.5, 0.0, 0.0])
        w2 = np.eye(3)
        params = ck.NetworkParams("gasn", [w1, w2], [b1, np.zeros(3)])
        rev = ck.RevenueSpec(np.array([1.0, 1.0, 0.0]), ck.Universe.with_no_purchase(3))
        mip = ck.build_nn_mip(params, rev)
        zeta = next(v for v in mip.variables if v.name == "zeta1_0")
        assert zeta.ub == 0.0
        assert mip.big_m["z1_0"][0] == 0.0

    def test_envelope_contains_true_product(self):
        # the relaxation must admit the true bilinear values
        rng = np.random.default_rng(5)
        params = self._net(5, 1, seed=5)
        rev = ck.gen_revenue(ck.Universe.with_no_purchase(5), rng)
        mip = ck.build_nn_mip(params, rev)
        qlo, qhi = mip.meta["q_bounds"]
        for _ in range(1000):
            z0 = rng.integers(0, 2, size=5).astype(float)
            z0[4] = 1.0
            logits = _forward_batch(params, z0[None, :])["logits"][0]
            q = quad_exp(logits - mip.meta["shift"])
            w = z0 * q
            assert np.all(q >= qlo - 1e-9) and np.all(q <= qhi + 1e-9)
            # envelope rows: w >= qlo z0, w <= qhi z0, w >= q - qhi(1-z0), w <= q - qlo(1-z0)
            assert np.all(w >= qlo * z0 - 1e-9)
            assert np.all(w <= qhi * z0 + 1e-9)
            assert np.all(w >= q - qhi * (1 - z0) - 1e-9)
            assert np.all(w <= q - qlo * (1 - z0) + 1e-9)

    def test_surrogate_gap_bound(self):
        # |exp(x) - quad| <= |x|^3 / 6 * e^|x| on the propagated interval
        params = self._net(6, 1, seed=7)
        lo0 = np.zeros(6)
        hi0 = np.ones(6)
        lo0[5] = 1.0
        lo, hi = _interval_propagate(params, lo0, hi0)[-1]
        xs = np.linspace(lo.min(), hi.max(), 500)
        gap = np.abs(np.exp(xs) - quad_exp(xs))
        bound = np.abs(xs) ** 3 / 6 * np.exp(np.abs(xs))
        assert np.all(gap <= bound + 1e-12)

    @pytest.mark.parametrize("L", [1, 2])
    def test_solver_matches_surrogate_brute_force(self, L):
        rng = np.random.default_rng(20 + L)
        for trial in range(15):
            n = int(rng.integers(5, 9))
            params = self._net(n, L, seed=300 * L + trial)
            rev = ck.gen_revenue(ck.Universe.with_no_purchase(n), rng)
            cap = ck.gen_capacity(ck.Universe.with_no_purchase(n), rng) \
                if trial % 2 else None
            mip = ck.build_nn_mip(params, rev, cap)
            sol = ck.solve_nn_mip(mip, time_limit_s=60)
            bf = ck.surrogate_brute_force(params, rev, cap)
            assert sol.exact
            assert sol.objective == pytest.approx(bf.objective, abs=1e-7)

    def test_zero_time_limit_returns_warm_start(self):
        params = self._net(6, 1, seed=11)
        rev = ck.gen_revenue(ck.Universe.with_no_purchase(6), np.random.default_rng(11))
        mip = ck.build_nn_mip(params, rev)
        sol = ck.solve_nn_mip(mip, time_limit_s=0)
        assert not sol.exact
        assert sol.extra.get("warm_start")
        assert sol.mask[5]


class TestMnlMilp:
    def test_matches_brute_force_sweep(self):
        for seed in range(20):
            model = ck.gen_instance("mnl", 9, 400 + seed)
            rng = np.random.default_rng(seed)
            rev = ck.gen_revenue(model.universe, rng)
            cap = ck.gen_capacity(model.universe, rng) if seed % 2 else None
            bf = ck.brute_force_opt(model, rev, cap)
            res = ck.mnl_milp_opt(model, rev, cap)
            assert res.exact
            assert res.objective == pytest.approx(bf.objective, abs=1e-7)

    def test_capacity_respected(self):
        model = ck.gen_instance("mnl", 10, 12)
        rng = np.random.default_rng(12)
        rev = ck.gen_revenue(model.universe, rng)
        cap = ck.gen_capacity(model.universe, rng)
        res = ck.mnl_milp_opt(model, rev, cap)
        assert cap.satisfied(res.mask)


class TestNpMilp:
    def test_single_permutation_prefix_structure(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            u = ck.Universe.with_no_purchase(8)
            perm = rng.permutation(8)
            model = ck.NpModel(u, perm[None, :], np.array([1.0]))
            rev = ck.gen_revenue(u, rng)
            bf = ck.brute_force_opt(model, rev)
            res = ck.np_milp_opt(model, rev)
            assert res.objective == pytest.approx(bf.objective, abs=1e-7)

    def test_full_universe_selects_top_ranks(self):
        model = ck.gen_instance("np", 7, 31)
        rev = ck.gen_revenue(model.universe, np.random.default_rng(31))
        mip = ck.build_np_milp(model, rev)
        status, x, value = ck.solve_milp(mip)
        assert status == 0
        # force the full universe via bounds and re-solve: value matches the
        # weight-sum of each permutation's top-ranked revenue
        for v in mip.variables:
            if v.name.startswith("s_"):
                v.lb = 1.0
        status, x, value = ck.solve_milp(mip)
        expect = sum(w * rev.mu[perm[0]] for perm, w in
                     zip(model.perms, model.weights))
        assert value == pytest.approx(expect, abs=1e-7)

    def test_uniform_weights_sweep(self):
        for seed in range(10):
            model = ck.gen_instance("np", 9, 500 + seed)
            rng = np.random.default_rng(seed)
            rev = ck.gen_revenue(model.universe, rng)
            cap = ck.gen_capacity(model.universe, rng) if seed % 2 else None
            bf = ck.brute_force_opt(model, rev, cap)
            res = ck.np_milp_opt(model, rev, cap)
            assert res.objective == pytest.approx(bf.objective, abs=1e-7)

    def test_too_many_permutations_rejected(self):
        rng = np.random.default_rng(0)
        u = ck.Universe.with_no_purchase(6)
        perms = np.asarray([rng.permutation(6) for _ in range(60)])
        model = ck.NpModel(u, perms, np.full(60, 1 / 60))
        rev = ck.gen_revenue(u, rng)
        with pytest.raises(ValueError, match="permutations"):
            ck.build_np_milp(model, rev)


class TestOptRatio:
    def test_optimum_scores_one(self):
        model = ck.gen_instance("mnl", 7, 1)
        rev = ck.gen_revenue(model.universe, np.random.default_rng(1))
        bf = ck.brute_force_opt(model, rev)
        assert ck.opt_ratio(bf, model, rev) == pytest.approx(1.0)

    def test_no_purchase_scores_zero(self):
        model = ck.gen_instance("mnl", 7, 2)
        rev = ck.gen_revenue(model.universe, np.random.default_rng(2))
        trivial = ck.OptResult(np.array([False] * 6 + [True]), 0.0, "trivial", True)
        assert ck.opt_ratio(trivial, model, rev) == pytest.approx(0.0)

    def test_zero_optimum_flagged(self):
        model = ck.gen_instance("mnl", 5, 3)
        rev = ck.RevenueSpec(np.zeros(5), model.universe)
        cand = ck.OptResult(np.ones(5, dtype=bool), 0.0, "x", True)
        with pytest.warns(UserWarning, match="undefined"):
            assert np.isnan(ck.opt_ratio(cand, model, rev))


GOLDEN_LP = """\\ LP export
Maximize
 obj: 3.0 x_a + 2.5 y
Subject To
 c0: 1.0 x_a + 2.0 y <= 4.0
 c1: 1.0 x_a - 1.0 y >= -1.0
Bounds
 0.0 <= x_a <= 1.0
 0.0 <= y <= 10.0
Binary
 x_a
End
"""


class TestLpFormat:
    def _toy(self):
        variables = [Variable("x_a", "binary", 0.0, 1.0),
                     Variable("y", "continuous", 0.0, 10.0)]
        rows = [LinearRow([(0, 1.0), (1, 2.0)], "<=", 4.0),
                LinearRow([(0, 1.0), (1, -1.0)], ">=", -1.0)]
        return MipInstance(variables, rows,
                           {"type": "linear", "coefs": [(0, 3.0), (1, 2.5)]})

    def test_golden_file(self, tmp_path):
        path = tmp_path / "toy.lp"
        ck.export_lp(self._toy(), path)
        assert path.read_text() == GOLDEN_LP

    def test_round_trip_structurally_identical(self, tmp_path):
        model = ck.gen_instance("mnl", 7, 9)
        rng = np.random.default_rng(9)
        rev = ck.gen_revenue(model.universe, rng)
        cap = ck.gen_capacity(model.universe, rng)
        mip = ck.build_mnl_milp(model, rev, cap)
        path = tmp_path / "mnl.lp"
        ck.export_lp(mip, path)
        back = ck.parse_lp(path)
        assert len(back.variables) == len(mip.variables)
        assert len(back.constraints) == len(mip.constraints)
        by_name = {v.name: v for v in back.variables}  # LP order is not semantic
        for v1 in mip.variables:
            v2 = by_name[v1.name]
            assert v1.kind == v2.kind and v1.lb == v2.lb and v1.ub == v2.ub
        s1, _, val1 = ck.solve_milp(mip)
        s2, _, val2 = ck.solve_milp(back)
        assert s1 == s2 == 0
        assert val1 == pytest.approx(val2, abs=1e-9)

    def test_ratio_objective_needs_level(self, tmp_path):
        params = init_params("gasn", 4, L=1, rng=np.random.default_rng(0))
        rev = ck.gen_revenue(ck.Universe.with_no_purchase(4), np.random.default_rng(0))
        mip = ck.build_nn_mip(params, rev)
        with pytest.raises(ValueError, match="Dinkelbach"):
            ck.export_lp(mip, tmp_path / "x.lp")
        ck.export_lp(mip, tmp_path / "x.lp", t=12.5)  # linearised fine

    def test_nn_mip_round_trip_solves(self, tmp_path):
        params = init_params("gasn", 5, L=2, rng=np.random.default_rng(3))
        for b in params.biases:
            b += np.random.default_rng(4).normal(size=b.shape)
        rev = ck.gen_revenue(ck.Universe.with_no_purchase(5), np.random.default_rng(3))
        mip = ck.build_nn_mip(params, rev)
        path = tmp_path / "nn.lp"
        ck.export_lp(mip, path, t=10.0)
        back = ck.parse_lp(path)
        status, x, value = ck.solve_milp(back)
        assert status == 0  # relaxation is feasible and bounded

    def test_name_sanitisation(self, tmp_path):
        variables = [Variable("0bad name!", "continuous", 0.0, 1.0),
                     Variable("x", "continuous", 0.0, 1.0)]
        mip = MipInstance(variables, [LinearRow([(0, 1.0), (1, 1.0)], "<=", 1.0)],
                          {"type": "linear", "coefs": [(0, 1.0)]})
        path = tmp_path / "san.lp"
        ck.export_lp(mip, path)
        text = path.read_text()
        assert "0bad name!" not in text and "v_0bad_name_" in text
        back = ck.parse_lp(path)
        assert len(back.variables) == 2
