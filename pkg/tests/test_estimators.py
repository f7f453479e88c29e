import warnings

import numpy as np
import pytest

import choicekit as ck


class TestMnlMle:
    def test_consistency_against_generator(self):
        u3 = ck.Universe.with_no_purchase(3)
        truth = ck.MnlModel(u3, np.array([0.7, 0.0, 0.0]))
        sampler = ck.AssortmentSampler(u3, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 100_000, 0)
        fit = ck.fit_mnl_mle(data)
        assert fit.fit_info["converged"]
        # gauge: no-purchase utility is zero
        assert fit.u[2] == 0.0
        assert np.abs(fit.u - truth.u).max() < 0.05

    def test_never_offered_product_sentinel(self):
        u4 = ck.Universe.with_no_purchase(4)
        masks = np.tile([True, True, False, True], (400, 1))
        rng = np.random.default_rng(0)
        chosen = rng.choice([0, 1, 3], size=400)
        data = ck.ChoiceDataset(u4, chosen, masks)
        with pytest.warns(UserWarning, match="never offered"):
            fit = ck.fit_mnl_mle(data)
        assert fit.u[2] == -np.inf
        p = fit.choice_probs(np.ones(4, dtype=bool))
        assert p[2] == 0.0

    def test_separable_likelihood_flagged(self):
        # one product always chosen in binary assortments: utility diverges
        u3 = ck.Universe.with_no_purchase(3)
        masks = np.tile([True, True, True], (200, 1))
        data = ck.ChoiceDataset(u3, np.zeros(200, dtype=int), masks)
        with pytest.warns(UserWarning, match="separable"):
            fit = ck.fit_mnl_mle(data)
        assert not fit.fit_info["converged"]
        assert fit.fit_info["diverged"] == [0]

    def test_restart_reaches_same_objective(self):
        truth = ck.gen_instance("mnl", 8, 1)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 5_000, 2)
        fit1 = ck.fit_mnl_mle(data)
        fit2 = ck.fit_mnl_mle(data)  # optimiser is deterministic; concavity pins CE
        assert ck.ce_loss(fit1, data) == pytest.approx(ck.ce_loss(fit2, data), abs=1e-6)
        assert np.abs(fit1.u - fit2.u).max() < 1e-6

    def test_gradient_small_at_solution(self):
        truth = ck.gen_instance("mnl", 6, 5)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 2_000, 6)
        fit = ck.fit_mnl_mle(data, ck.MleConfig(tol=1e-6))
        assert fit.fit_info["grad_norm"] <= 1e-6


class TestFeatureMnlMle:
    def test_one_hot_reduces_to_plain_mle(self):
        # with a single product and a one-hot feature, beta and the plain
        # utility parameterise the same likelihood
        u2 = ck.Universe.with_no_purchase(2)
        truth = ck.MnlModel(u2, np.array([0.8, 0.0]))
        sampler = ck.AssortmentSampler(u2, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 20_000, 3)
        feats = np.array([[1.0], [0.0]])  # one-hot of product 0
        data = ck.ChoiceDataset(u2, data.chosen, data.masks, product_features=feats)
        plain = ck.fit_mnl_mle(data)
        feat = ck.fit_feature_mnl_mle(data)
        assert feat.beta[0] == pytest.approx(plain.u[0], abs=1e-4)

    def test_beta_consistency(self):
        model, feats = ck.gen_feature_instance("mnl-f", 12, 5, 4)
        sampler = ck.AssortmentSampler(model.universe, "uniform-size")
        data = ck.gen_dataset(model, sampler, 100_000, 5, product_features=feats)
        fit = ck.fit_feature_mnl_mle(data)
        assert np.abs(fit.beta - model.beta).max() < 0.05

    def test_rank_deficient_flagged(self):
        u3 = ck.Universe.with_no_purchase(3)
        truth = ck.MnlModel(u3, np.array([0.5, -0.5, 0.0]))
        sampler = ck.AssortmentSampler(u3, "uniform-size")
        base = ck.gen_dataset(truth, sampler, 3_000, 6)
        feats = np.array([[1.0, 2.0], [0.5, 1.0], [0.0, 0.0]])  # collinear columns
        data = ck.ChoiceDataset(u3, base.chosen, base.masks, product_features=feats)
        with pytest.warns(UserWarning, match="rank deficient"):
            fit = ck.fit_feature_mnl_mle(data)
        assert fit.fit_info.get("non_unique")


class TestMccmEm:
    def test_full_assortments_recover_frequencies(self):
        truth = ck.gen_instance("mccm", 8, 7)
        u = truth.universe
        masks = np.ones((5_000, 8), dtype=bool)
        rng = np.random.default_rng(8)
        probs = truth.choice_probs_batch(masks)
        cdf = np.cumsum(probs, axis=1)
        chosen = (rng.random(5_000)[:, None] > cdf).sum(axis=1)
        data = ck.ChoiceDataset(u, chosen, masks)
        fit = ck.fit_mccm_em(data, ck.EmConfig(seed=1))
        freq = np.bincount(chosen, minlength=8) / 5_000
        assert np.abs(fit.lam - freq).max() < 1e-9

    def test_loglik_monotone(self):
        truth = ck.gen_instance("mccm", 10, 9)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 3_000, 10)
        fit = ck.fit_mccm_em(data, ck.EmConfig(seed=2, tol=1e-4, max_iters=40))
        trace = fit.fit_info["loglik_trace"]
        assert len(trace) >= 3
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))

    def test_output_is_valid_model(self):
        truth = ck.gen_instance("mccm", 7, 11)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 2_000, 12)
        fit = ck.fit_mccm_em(data, ck.EmConfig(seed=3))
        assert abs(fit.lam.sum() - 1) < 1e-9
        assert np.allclose(fit.rho.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(fit.lam >= 0) and np.all(fit.rho >= 0)

    def test_all_no_purchase_data_concentrates(self):
        u4 = ck.Universe.with_no_purchase(4)
        masks = np.ones((300, 4), dtype=bool)
        data = ck.ChoiceDataset(u4, np.full(300, 3), masks)
        fit = ck.fit_mccm_em(data, ck.EmConfig(seed=4))
        assert fit.lam[3] > 0.999

    def test_mnl_data_nesting_bound(self):
        # the chain family nests MNL, so its test CE cannot trail MLE by much
        truth = ck.gen_instance("mnl", 10, 13)
        sampler = ck.AssortmentSampler(truth.universe, "uniform-size")
        data = ck.gen_dataset(truth, sampler, 30_000, 14)
        test = ck.gen_dataset(truth, sampler, 10_000, 15)
        mle = ck.fit_mnl_mle(data)
        em = ck.fit_mccm_em(data, ck.EmConfig(seed=5))
        assert ck.ce_loss(em, test) >= ck.ce_loss(mle, test) - 0.02

    def test_estimation_error_shrinks_with_assortment_size(self):
        # single-trial version of the assortment-size effect
        truth = ck.gen_instance("mccm", 12, 17)
        errs = {}
        for size in (2, 8):
            sampler = ck.AssortmentSampler(truth.universe, "fixed-size", k=size)
            data = ck.gen_dataset(truth, sampler, 8_000, 18)
            fit = ck.fit_mccm_em(data, ck.EmConfig(seed=6))
            errs[size] = (np.abs(fit.lam - truth.lam).sum()
                          + np.abs(fit.rho - truth.rho).sum()) / (12 + 144)
        assert errs[2] > errs[8]

    def test_empty_dataset_rejected(self):
        u4 = ck.Universe.with_no_purchase(4)
        data = ck.ChoiceDataset(u4, np.zeros(0, dtype=int), np.zeros((0, 4), dtype=bool))
        with pytest.raises(ck.DatasetError):
            ck.fit_mccm_em(data)
        with pytest.raises(ck.DatasetError):
            ck.fit_mnl_mle(data)
