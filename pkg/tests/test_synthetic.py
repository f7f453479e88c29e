import numpy as np
import pytest

import choicekit as ck
from helpers import all_assortments


class TestMnl:
    def test_equal_utilities_uniform(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.MnlModel(u3, np.zeros(3))
        assert np.allclose(model.choice_probs(np.ones(3, dtype=bool)), 1 / 3)

    def test_two_product_closed_form(self):
        u2 = ck.Universe.with_no_purchase(2)
        model = ck.MnlModel(u2, np.array([1.0, 0.0]))
        p = model.choice_probs(np.array([True, True]))
        assert p[0] == pytest.approx(np.e / (1 + np.e), abs=1e-10)
        assert p[1] == pytest.approx(1 / (1 + np.e), abs=1e-10)

    def test_iia_exhaustive(self):
        # choice-probability ratios are assortment independent
        model = ck.gen_instance("mnl", 8, 0)
        for mask in all_assortments(model.universe):
            p = model.choice_probs(mask)
            idx = np.flatnonzero(mask)
            i, j = idx[0], idx[-1]
            expect = np.exp(model.u[i] - model.u[j])
            assert p[i] / p[j] == pytest.approx(expect, rel=1e-9)


class TestMccm:
    def test_full_universe_returns_lambda(self):
        model = ck.gen_instance("mccm", 6, 0)
        p = model.choice_probs(np.ones(6, dtype=bool))
        assert np.allclose(p, model.lam, atol=1e-12)

    def test_uniform_three_state_absorption(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.MccmModel(u3, np.ones(3) / 3, np.ones((3, 3)) / 3)
        p = model.choice_probs(np.array([True, False, True]))
        assert np.allclose(p, [0.5, 0.0, 0.5], atol=1e-12)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(42)
        model = ck.gen_instance("mccm", 7, 5)
        mask = np.array([True, False, True, False, False, True, True])
        p = model.choice_probs(mask)
        walks = 200_000
        states = rng.choice(7, size=walks, p=model.lam)
        done = mask[states]
        counts = np.zeros(7)
        for i in np.flatnonzero(done):
            counts[states[i]] += 1
        active = states[~done]
        for _ in range(1000):
            if len(active) == 0:
                break
            cdf = np.cumsum(model.rho[active], axis=1)
            active = (rng.random(len(active))[:, None] > cdf).sum(axis=1)
            hit = mask[active]
            for s in active[hit]:
                counts[s] += 1
            active = active[~hit]
        freq = counts / walks
        se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / walks)
        assert np.all(np.abs(freq - p) <= 3 * se + 1e-4)

    def test_closed_class_mass_to_no_purchase(self):
        # products 0 and 1 form a closed class; when unoffered, their arrival
        # mass must land on the always-offered no-purchase option
        u4 = ck.Universe.with_no_purchase(4)
        rho = np.array([[0.5, 0.5, 0.0, 0.0],
                        [0.5, 0.5, 0.0, 0.0],
                        [0.1, 0.1, 0.4, 0.4],
                        [0.25, 0.25, 0.25, 0.25]])
        lam = np.array([0.4, 0.3, 0.2, 0.1])
        model = ck.MccmModel(u4, lam, rho)
        mask = np.array([False, False, True, True])
        p = model.choice_probs(mask)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert p[3] > lam[3]  # absorbed the closed class residual

    def test_closed_class_without_no_purchase_errors(self):
        u = ck.Universe(3, None)
        rho = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.3, 0.3, 0.4]])
        model = ck.MccmModel(u, np.array([0.5, 0.3, 0.2]), rho)
        with pytest.raises(ck.ModelInvariantError, match="closed class"):
            model.choice_probs(np.array([False, False, True]))


class TestNp:
    def test_single_permutation(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.NpModel(u3, np.array([[1, 0, 2]]), np.array([1.0]))
        p = model.choice_probs(np.array([True, False, True]))
        assert p.tolist() == [1.0, 0.0, 0.0]

    def test_two_opposed_permutations(self):
        u3 = ck.Universe.with_no_purchase(3)
        model = ck.NpModel(u3, np.array([[0, 1, 2], [2, 1, 0]]),
                           np.array([0.5, 0.5]))
        p = model.choice_probs(np.array([False, True, True]))
        assert p.tolist() == [0.0, 0.5, 0.5]

    def test_matches_type_sampling(self):
        rng = np.random.default_rng(7)
        model = ck.gen_instance("np", 6, 3)
        mask = np.array([True, False, True, True, False, True])
        p = model.choice_probs(mask)
        draws = 100_000
        types = rng.choice(len(model.perms), size=draws, p=model.weights)
        counts = np.zeros(6)
        for t in types:
            for item in model.perms[t]:
                if mask[item]:
                    counts[item] += 1
                    break
        freq = counts / draws
        se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / draws)
        assert np.all(np.abs(freq - p) <= 3 * se + 1e-4)

    def test_probabilities_sum_to_total_weight(self):
        model = ck.gen_instance("np", 8, 11)
        for mask in all_assortments(model.universe):
            assert model.choice_probs(mask).sum() == pytest.approx(1.0, abs=1e-12)


class TestMmnl:
    def test_single_segment_is_mnl(self):
        u4 = ck.Universe.with_no_purchase(4)
        u_row = np.array([0.3, -0.7, 1.1, 0.0])
        mix = ck.MmnlModel(u4, np.array([1.0]), u_row[None, :])
        mnl = ck.MnlModel(u4, u_row)
        for mask in all_assortments(u4):
            assert np.allclose(mix.choice_probs(mask), mnl.choice_probs(mask))

    def test_polarised_segments_split(self):
        u3 = ck.Universe.with_no_purchase(3)
        u = np.array([[30.0, -30.0, 0.0], [-30.0, 30.0, 0.0]])
        mix = ck.MmnlModel(u3, np.array([0.5, 0.5]), u)
        p = mix.choice_probs(np.ones(3, dtype=bool))
        assert p[0] == pytest.approx(0.5, abs=1e-9)
        assert p[1] == pytest.approx(0.5, abs=1e-9)

    def test_zero_weight_segment_ignored(self):
        u3 = ck.Universe.with_no_purchase(3)
        u = np.array([[1.0, 2.0, 0.0], [9.0, -9.0, 0.0]])
        mix = ck.MmnlModel(u3, np.array([1.0, 0.0]), u)
        mnl = ck.MnlModel(u3, u[0])
        mask = np.ones(3, dtype=bool)
        assert np.allclose(mix.choice_probs(mask), mnl.choice_probs(mask))

    def test_identical_rows_collapse_to_mnl(self):
        u4 = ck.Universe.with_no_purchase(4)
        row = np.array([0.5, 1.5, -0.5, 0.0])
        mix = ck.MmnlModel(u4, np.full(3, 1 / 3), np.tile(row, (3, 1)))
        mnl = ck.MnlModel(u4, row)
        for mask in all_assortments(u4):
            assert np.allclose(mix.choice_probs(mask), mnl.choice_probs(mask))


class TestRegularity:
    @pytest.mark.parametrize("kind", ["mnl", "mccm", "np", "mmnl"])
    def test_adding_product_never_helps_incumbents(self, kind):
        model = ck.gen_instance(kind, 6, 13)
        for mask in all_assortments(model.universe):
            p = model.choice_probs(mask)
            for j in np.flatnonzero(~mask):
                bigger = mask.copy()
                bigger[j] = True
                q = model.choice_probs(bigger)
                assert np.all(q[mask] <= p[mask] + 1e-9)


class TestGenInstance:
    def test_mnl_standard_normal(self):
        utils = np.concatenate([ck.gen_instance("mnl", 20, s).u for s in range(500)])
        assert abs(utils.mean()) < 0.05
        assert abs(utils.std() - 1.0) < 0.05

    def test_np_preset_counts(self):
        model = ck.gen_instance("np", 20, 0)
        assert len(model.perms) == 10
        assert np.allclose(model.weights, 0.1)
        assert len(ck.gen_instance("np", 50, 0).perms) == 20

    def test_mmnl_filler_utilities(self):
        model = ck.gen_instance("mmnl", 20, 0)
        assert model.u.shape == (5, 20)
        assert np.allclose(model.u[:, 19], 0.0)  # no-purchase
        # exactly one window per segment; everything else is the -50 filler
        for c in range(5):
            in_window = model.u[c, :19] > -50
            assert in_window.sum() in (3, 4)
        assert (model.u[:, :19] == -50).sum() == 5 * 19 - 19

    def test_mccm_presets_and_groups(self):
        model = ck.gen_instance("mccm", 20, 0)
        assert abs(model.lam.sum() - 1) < 1e-9
        assert np.allclose(model.rho.sum(axis=1), 1.0, atol=1e-9)
        # in-group transition mass dominates under the clustered recipe
        rho = model.rho
        group = (np.arange(20) * 4) // 20
        in_group = np.array([[group[i] == group[j] for j in range(20)]
                             for i in range(20)])
        assert rho[in_group].sum() / rho.sum() > 0.7

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ck.gen_instance("probit", 10, 0)

    def test_deterministic(self):
        a = ck.gen_instance("mmnl", 20, 99)
        b = ck.gen_instance("mmnl", 20, 99)
        assert np.array_equal(a.u, b.u)


class TestSamplers:
    def test_fixed_size(self):
        u = ck.Universe.with_no_purchase(20)
        sampler = ck.AssortmentSampler(u, "fixed-size", k=4)
        masks = sampler.sample(200, 0)
        assert np.all(masks[:, 19])
        assert np.all(masks[:, :19].sum(axis=1) == 4)

    def test_bernoulli_frequency(self):
        u = ck.Universe.with_no_purchase(12)
        sampler = ck.AssortmentSampler(u, "bernoulli-half")
        masks = sampler.sample(100_000, 1)
        freq = masks[:, :11].mean(axis=0)
        assert np.all(np.abs(freq - 0.5) < 0.01)

    def test_half_blocked(self):
        u = ck.Universe.with_no_purchase(20)
        sampler = ck.AssortmentSampler(u, "half-blocked")
        masks = sampler.sample(500, 2)
        first = masks[:, :10].sum(axis=1)
        second = masks[:, 10:19].sum(axis=1)  # real products of the top half
        assert np.all((first == 0) | (second == 0))
        assert (first == 0).any() and (second == 0).any()
        assert np.all(masks[:, 19])

    def test_half_blocked_odd_n_rejected(self):
        with pytest.raises(ValueError):
            ck.AssortmentSampler(ck.Universe.with_no_purchase(9), "half-blocked")

    def test_window_third_sizes(self):
        u = ck.Universe.with_no_purchase(30)
        sampler = ck.AssortmentSampler(u, "window-third")
        masks = sampler.sample(300, 3)
        sizes = masks.sum(axis=1)
        assert set(np.unique(sizes)) <= {10, 11, 12}  # 10 or 11 drawn, +1 if np added

    def test_uniform_size_includes_no_purchase(self):
        u = ck.Universe.with_no_purchase(10)
        sampler = ck.AssortmentSampler(u, "uniform-size")
        masks = sampler.sample(1000, 4)
        assert np.all(masks[:, 9])
        assert masks.sum(axis=1).min() >= 1


class TestGenDataset:
    def test_empty_dataset_valid(self):
        truth = ck.gen_instance("mnl", 6, 0)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 0, 0)
        assert data.m == 0 and ck.validate_dataset(data) == []

    def test_frequencies_match_oracle(self):
        truth = ck.gen_instance("mnl", 6, 1)
        sampler = ck.AssortmentSampler(truth.universe, "fixed-size", k=3)
        data = ck.gen_dataset(truth, sampler, 100_000, 2)
        mask = data.masks[0]
        rows = np.all(data.masks == mask, axis=1)
        freq = np.bincount(data.chosen[rows], minlength=6) / rows.sum()
        p = truth.choice_probs(mask)
        assert np.abs(freq - p).max() < 0.01

    def test_deterministic(self):
        truth = ck.gen_instance("mccm", 8, 3)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        a = ck.gen_dataset(truth, sampler, 500, 7)
        b = ck.gen_dataset(truth, sampler, 500, 7)
        assert np.array_equal(a.chosen, b.chosen)
        assert np.array_equal(a.masks, b.masks)


class TestAugmentNoPurchase:
    def test_counts(self):
        truth = ck.gen_instance("mnl", 5, 0)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 100, 1)
        aug = ck.augment_no_purchase(data, copies=4)
        assert aug.m == 500
        assert (aug.chosen == 4).sum() >= 400
        assert ck.validate_dataset(aug) == []

    def test_zero_copies_identity(self):
        truth = ck.gen_instance("mnl", 5, 0)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 50, 1)
        assert ck.augment_no_purchase(data, copies=0) is data


class TestFixtures:
    def test_truth_tables(self):
        tables = ck.fixture_tables()
        dup = tables["duplicate"]
        assert np.allclose(dup.truth.choice_probs(dup.case_masks[0]), [0.6, 0, 0.4])
        assert np.allclose(dup.truth.choice_probs(dup.case_masks[1]), [0.3, 0.3, 0.4])
        dec = tables["decoy"]
        assert np.allclose(dec.truth.choice_probs(dec.case_masks[1]),
                           [0.29, 0.57, 0.0, 0.14])
        cyc = tables["cycle"]
        assert cyc.universe.no_purchase_index is None
        assert np.allclose(cyc.truth.choice_probs(cyc.case_masks[2]), [0.2, 0, 0.8])

    def test_sampled_dataset_matches_truth(self):
        fix = ck.fixture_tables()["decoy"]
        data = fix.sample_dataset(m=8000, seed=0)
        assert ck.validate_dataset(data) == []
        case2 = np.all(data.masks == fix.case_masks[1], axis=1)
        freq = np.bincount(data.chosen[case2], minlength=4) / case2.sum()
        assert np.abs(freq - [0.29, 0.57, 0.0, 0.14]).max() < 0.03


class TestPersistence:
    @pytest.mark.parametrize("kind", ["mnl", "mccm", "np", "mmnl"])
    def test_round_trip_lossless(self, tmp_path, kind):
        model = ck.gen_instance(kind, 9, 77)
        path = tmp_path / "model.json"
        ck.save_model(path, model)
        back = ck.load_model(path)
        mask = np.ones(9, dtype=bool)
        assert np.array_equal(back.choice_probs(mask), model.choice_probs(mask))
        if kind == "mnl":
            assert np.array_equal(back.u, model.u)  # bit-exact floats

    def test_feature_models_round_trip(self, tmp_path):
        model, feats = ck.gen_feature_instance("mccm-f", 6, 3, 0)
        path = tmp_path / "model.json"
        ck.save_model(path, model)
        back = ck.load_model(path)
        mask = np.array([True, False, True, True, False, True])
        assert np.allclose(back.choice_probs(mask, feats),
                           model.choice_probs(mask, feats), atol=1e-15)
