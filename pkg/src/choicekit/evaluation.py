"""Experiment pipelines, report tables and model diagnostics.

Each experiment draws every random quantity from one root seed through
``numpy`` seed-sequence spawning, stores per-trial values next to the
aggregated means, and can emit CSV/aligned-text reports plus a JSON manifest
sufficient to replay the run.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (CapacityConstraint, ChoiceDataset, ChoiceModel, RevenueSpec,
                   Universe, ce_loss)
from .estimators import EmConfig, MleConfig, fit_feature_mnl_mle, fit_mccm_em, fit_mnl_mle
from .mip import (OptResult, adxopt, brute_force_opt, build_nn_mip,
                  mccm_bellman_opt, mnl_milp_opt, np_milp_opt, opt_ratio,
                  revenue_ordered, solve_nn_mip)
from .neural import (FeatureEncoderParams, NetworkParams, NeuralChoiceModel,
                     TrainConfig, dataset_ce, forward_feature, train,
                     warm_start_augment)
from .synthetic import (AssortmentSampler, MccmModel, MnlModel, NpModel,
                        gen_dataset, gen_instance)


class UniformModel(ChoiceModel):
    """Baseline that spreads probability evenly over the offered options."""

    def __init__(self, universe: Universe):
        self.universe = universe

    def choice_probs(self, mask, product_features=None, customer_features=None):
        mask = np.asarray(mask, dtype=bool)
        return mask / mask.sum()

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        masks = np.asarray(masks, dtype=bool)
        return masks / masks.sum(axis=1, keepdims=True)


@dataclass
class ExperimentSpec:
    """Settings of a synthetic experiment; seeds are part of the record."""

    truth_kinds: Sequence[str] = ("mnl",)
    n: int = 20
    sampler_kind: str = "uniform-size"
    m_train: int = 100_000
    m_val: int = 5_000
    m_test: int = 10_000
    estimators: Sequence[str] = ("uniform", "mnl-mle", "gasn-1", "oracle")
    trials: int = 10
    seed: int = 0
    epochs: int = 100
    # optimization-experiment settings
    pipelines: Sequence[str] = ("mnl-mle:ro", "mnl-mle:milp", "gasn-1:mip")
    n_instances: int = 5
    n_draws: int = 4
    settings: Sequence[str] = ("unconstrained", "constrained")
    mip_time_limit: float = 300.0
    jobs: int = 1

    def __post_init__(self):
        if self.trials <= 0 or self.n < 2 or min(self.m_train, self.m_test) <= 0:
            raise ValueError("experiment sizes must be positive")


@dataclass
class ReportTable:
    """Labelled grid of per-trial values with their mean as the cell value."""

    name: str
    metric: str
    row_labels: list
    col_labels: list
    values: np.ndarray          # trials x rows x cols, nan for failed fits
    meta: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return self.values.shape[0]

    def mean(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(self.values, axis=0)

    def counts(self) -> np.ndarray:
        return np.sum(~np.isnan(self.values), axis=0)

    def cell(self, row: str, col) -> float:
        r = self.row_labels.index(row)
        c = self.col_labels.index(col)
        return float(self.mean()[r, c])

    def to_csv(self, path) -> None:
        mean = self.mean()
        counts = self.counts()
        with open(path, "w") as fh:
            fh.write("row," + ",".join(str(c) for c in self.col_labels) + ",trials\n")
            for r, label in enumerate(self.row_labels):
                cells = ",".join(repr(float(v)) for v in mean[r])
                fh.write(f"{label},{cells},{int(counts[r].max(initial=0))}\n")

    def trials_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("trial,row,col,value\n")
            for t in range(self.trials):
                for r, rl in enumerate(self.row_labels):
                    for c, cl in enumerate(self.col_labels):
                        fh.write(f"{t},{rl},{cl},{self.values[t, r, c]!r}\n")

    def to_text(self) -> str:
        mean = self.mean()
        width = max([len(str(r)) for r in self.row_labels] + [10])
        cols = [f"{c!s:>10}" for c in self.col_labels]
        lines = [f"{self.name}  ({self.metric}; {self.trials} trials)",
                 " " * width + " " + " ".join(cols)]
        for r, label in enumerate(self.row_labels):
            cells = " ".join(f"{v:10.4f}" for v in mean[r])
            lines.append(f"{label!s:>{width}} {cells}")
        return "\n".join(lines)


def spec_manifest(spec: ExperimentSpec, extra: Optional[dict] = None) -> dict:
    doc = asdict(spec)
    doc = {k: (list(v) if isinstance(v, tuple) else v) for k, v in doc.items()}
    payload = json.dumps(doc, sort_keys=True).encode()
    doc["content_hash"] = hashlib.sha256(payload).hexdigest()
    if extra:
        doc.update(extra)
    return doc


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _spawn_rngs(seed, k: int) -> list:
    return [np.random.default_rng(s) for s in _as_seedseq(seed).spawn(k)]


# ---------------------------------------------------------------------------
# Estimator registry.
# ---------------------------------------------------------------------------

def _fit_estimator(name: str, truth: ChoiceModel, data: ChoiceDataset,
                   val: Optional[ChoiceDataset], epochs: int, seed: int) -> ChoiceModel:
    if name == "uniform":
        return UniformModel(data.universe)
    if name == "oracle":
        return truth
    if name == "mnl-mle":
        return fit_mnl_mle(data)
    if name == "mnl-f-mle":
        return fit_feature_mnl_mle(data)
    if name == "mccm-em":
        return fit_mccm_em(data, EmConfig(seed=seed))
    parts = name.split("-")
    if parts[0] in ("gasn", "rasn"):
        use_features = len(parts) == 3 and parts[1] == "f"
        L = int(parts[-1])
        cfg = TrainConfig(seed=seed, epochs=epochs)
        result = train(parts[0], data, cfg, val_data=val, L=L,
                       use_features=use_features)
        return NeuralChoiceModel(data.universe, result.params, result.enc)
    raise ValueError(f"unknown estimator {name!r}")


def _prediction_trial(spec: ExperimentSpec, trial_seed) -> np.ndarray:
    """One trial of the prediction experiment: CE per (estimator, truth)."""
    out = np.full((len(spec.estimators), len(spec.truth_kinds)), np.nan)
    streams = _as_seedseq(trial_seed).spawn(len(spec.truth_kinds))
    for c, kind in enumerate(spec.truth_kinds):
        sub = streams[c].spawn(5)
        truth = gen_instance(kind, spec.n, np.random.default_rng(sub[0]))
        sampler = AssortmentSampler(truth.universe, spec.sampler_kind)
        data = gen_dataset(truth, sampler, spec.m_train, np.random.default_rng(sub[1]))
        val = gen_dataset(truth, sampler, spec.m_val, np.random.default_rng(sub[2])) \
            if spec.m_val else None
        test = gen_dataset(truth, sampler, spec.m_test, np.random.default_rng(sub[3]))
        fit_seed = int(np.random.default_rng(sub[4]).integers(2 ** 31))
        for r, est in enumerate(spec.estimators):
            try:
                model = _fit_estimator(est, truth, data, val, spec.epochs, fit_seed)
                out[r, c] = ce_loss(model, test)
            except Exception as exc:  # fit failures are recorded, not fatal
                warnings.warn(f"estimator {est} failed on {kind}: {exc}")
    return out


def _run_trials(worker: Callable, args_list: list, jobs: int) -> list:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, *zip(*args_list)))
    return [worker(*a) for a in args_list]


def run_prediction_experiment(spec: ExperimentSpec) -> ReportTable:
    """Out-of-sample CE of each estimator under each synthetic truth."""
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    results = _run_trials(_prediction_trial, [(spec, s) for s in seeds], spec.jobs)
    values = np.stack(results)
    return ReportTable("prediction", "test cross-entropy",
                       list(spec.estimators), list(spec.truth_kinds), values,
                       meta=spec_manifest(spec))


# ---------------------------------------------------------------------------
# Joint estimation + optimization experiment.
# ---------------------------------------------------------------------------

def gen_revenue(universe: Universe, rng) -> RevenueSpec:
    """Product revenues uniform on [10, 50]; the no-purchase slot earns zero."""
    mu = rng.uniform(10.0, 50.0, size=universe.n)
    if universe.no_purchase_index is not None:
        mu[universe.no_purchase_index] = 0.0
    return RevenueSpec(mu, universe)


def gen_capacity(universe: Universe, rng) -> CapacityConstraint:
    """Budget row with U[10, 50] coefficients and the max-bracket budget rule.

    The budget lies between max(|a|_1/n, |a|_inf) and max(4 |a|_1/n, |a|_inf),
    so every single product fits on its own.
    """
    a = rng.uniform(10.0, 50.0, size=universe.n)
    if universe.no_purchase_index is not None:
        a[universe.no_purchase_index] = 0.0
    n = universe.n
    lo = max(a.sum() / n, a.max())
    hi = max(4.0 * a.sum() / n, a.max())
    c = rng.uniform(lo, hi) if hi > lo else lo
    return CapacityConstraint(a, float(c), universe)


def _run_pipeline(pipeline: str, fitted: dict, rev: RevenueSpec,
                  cap: Optional[CapacityConstraint],
                  time_limit: float) -> OptResult:
    est_name, opt_name = pipeline.split(":")
    model = fitted[est_name]
    if opt_name == "ro":
        return revenue_ordered(model, rev, cap)
    if opt_name == "milp":
        if isinstance(model, MnlModel):
            return mnl_milp_opt(model, rev, cap)
        if isinstance(model, NpModel):
            return np_milp_opt(model, rev, cap)
        raise ValueError(f"no MILP for {type(model).__name__}")
    if opt_name == "adxopt":
        return adxopt(model, rev, cap)
    if opt_name == "bellman":
        return mccm_bellman_opt(model, rev, cap)
    if opt_name == "brute":
        return brute_force_opt(model, rev, cap)
    if opt_name == "mip":
        mip = build_nn_mip(model.params, rev, cap)
        return solve_nn_mip(mip, time_limit_s=time_limit)
    raise ValueError(f"unknown optimizer {opt_name!r}")


def _opt_trial(spec: ExperimentSpec, trial_seed, constrained: bool) -> np.ndarray:
    """One instance: fit all pipelines once, evaluate spec.n_draws ratios."""
    out = np.full((len(spec.pipelines), len(spec.truth_kinds), spec.n_draws), np.nan)
    streams = _as_seedseq(trial_seed).spawn(len(spec.truth_kinds))
    for c, kind in enumerate(spec.truth_kinds):
        sub = streams[c].spawn(3 + spec.n_draws)
        truth = gen_instance(kind, spec.n, np.random.default_rng(sub[0]))
        sampler = AssortmentSampler(truth.universe, spec.sampler_kind)
        data = gen_dataset(truth, sampler, spec.m_train, np.random.default_rng(sub[1]))
        val = gen_dataset(truth, sampler, spec.m_val, np.random.default_rng(sub[2])) \
            if spec.m_val else None
        fitted = {}
        for pipeline in spec.pipelines:
            est = pipeline.split(":")[0]
            if est not in fitted:
                try:
                    fitted[est] = _fit_estimator(
                        est, truth, data, val, spec.epochs,
                        int(_as_seedseq(trial_seed).generate_state(1)[0] % (2 ** 31)))
                except Exception as exc:
                    warnings.warn(f"estimator {est} failed: {exc}")
                    fitted[est] = None
        for d in range(spec.n_draws):
            rng = np.random.default_rng(sub[3 + d])
            rev = gen_revenue(truth.universe, rng)
            cap = gen_capacity(truth.universe, rng) if constrained else None
            truth_opt = brute_force_opt(truth, rev, cap)
            for p, pipeline in enumerate(spec.pipelines):
                est = pipeline.split(":")[0]
                if fitted.get(est) is None:
                    continue
                try:
                    res = _run_pipeline(pipeline, fitted, rev, cap, spec.mip_time_limit)
                    out[p, c, d] = opt_ratio(res, truth, rev, cap,
                                             truth_optimum=truth_opt)
                except Exception as exc:
                    warnings.warn(f"pipeline {pipeline} failed: {exc}")
    return out


def run_opt_experiment(spec: ExperimentSpec) -> dict:
    """Mean optimality ratios per pipeline and truth, with and without capacity.

    Returns one ReportTable per entry of ``spec.settings``; cell means run
    over instances x revenue draws.
    """
    tables = {}
    root = np.random.SeedSequence(spec.seed).spawn(len(spec.settings))
    for s, setting in enumerate(spec.settings):
        seeds = root[s].spawn(spec.n_instances)
        results = _run_trials(_opt_trial,
                              [(spec, seed, setting == "constrained") for seed in seeds],
                              spec.jobs)
        values = np.concatenate([r.transpose(2, 0, 1) for r in results], axis=0)
        tables[setting] = ReportTable(
            f"optimality-{setting}", "optimality ratio",
            list(spec.pipelines), list(spec.truth_kinds), values,
            meta=spec_manifest(spec, {"setting": setting}))
    return tables


# ---------------------------------------------------------------------------
# Diagnostics.
# ---------------------------------------------------------------------------

def ace_calibration(model: ChoiceModel, data: ChoiceDataset, bins: int = 25) -> float:
    """Adaptive expected calibration error with per-product equal-mass bins.

    For each product, samples offering it are sorted by predicted
    probability and split into ``bins`` equal-mass bins; the weighted mean
    absolute gap between predicted and empirical frequencies is averaged as
    sum_i n_i sum_b |acc - conf| / (m * B).
    """
    if data.m == 0:
        raise ValueError("calibration needs a nonempty dataset")
    probs = model.choice_probs_batch(data.masks, data.product_features,
                                     data.customer_features)
    total = 0.0
    for i in range(data.universe.n):
        rows = np.flatnonzero(data.masks[:, i])
        if len(rows) == 0:
            continue
        preds = probs[rows, i]
        hits = (data.chosen[rows] == i).astype(float)
        # equal-mass boundaries taken from the empirical quantiles; assigning
        # by value keeps tied predictions together, which makes the metric
        # exactly invariant under dataset duplication
        sorted_preds = np.sort(preds, kind="stable")
        edges = sorted_preds[(np.arange(1, bins) * len(rows)) // bins]
        bin_id = np.searchsorted(edges, preds, side="right")
        gap = 0.0
        for b in np.unique(bin_id):
            sel = bin_id == b
            gap += abs(hits[sel].mean() - preds[sel].mean())
        total += len(rows) * gap
    return total / (data.m * bins)


def _minmax_normalise(values: np.ndarray, offered: np.ndarray) -> np.ndarray:
    v = values[offered]
    span = v.max() - v.min()
    if span <= 1e-12:
        return np.zeros(offered.sum())
    return (v - v.min()) / span


def assortment_effect_delta(params: NetworkParams, enc: FeatureEncoderParams,
                            data: ChoiceDataset, sample_count: int = 200,
                            seed=0) -> np.ndarray:
    """Within-assortment normalised shift between latent and output utilities.

    For each sampled transaction, the latent utilities entering the network
    and the logits leaving it are min-max normalised over the offered
    products; the per-product differences (in [-1, 1]) measure how much the
    fully connected layers re-rank the options.  Rows whose utilities are
    constant across the assortment normalise to zero shift.
    """
    rng = np.random.default_rng(seed)
    take = min(sample_count, data.m)
    rows = rng.choice(data.m, size=take, replace=False)
    deltas = []
    for k in rows:
        mask = data.masks[k]
        cf = None if data.customer_features is None else data.customer_features[k]
        _, detail = forward_feature(params, enc, mask, data.product_features, cf)
        offered = mask.astype(bool)
        tin = _minmax_normalise(detail["latent"], offered)
        tout = _minmax_normalise(detail["logits"], offered)
        deltas.append(tout - tin)
    return np.concatenate(deltas) if deltas else np.zeros(0)


# ---------------------------------------------------------------------------
# Focused experiment harnesses.
# ---------------------------------------------------------------------------

SHIFT_SAMPLERS = ("uniform-size", "bernoulli-half", "half-blocked", "window-third")
SHIFT_LABELS = ("D-1", "D-2", "D-3", "D-4")


def distribution_shift_experiment(truth: MccmModel, m_train: int = 20_000,
                                  m_val: int = 2_000, m_test: int = 10_000,
                                  seed=0, epochs: int = 100, L: int = 1) -> ReportTable:
    """Train-on-one-sampler, test-on-another CE grid plus Mix and Oracle rows."""
    universe = truth.universe
    rngs = _spawn_rngs(seed, 3 * len(SHIFT_SAMPLERS) + 2)
    samplers = [AssortmentSampler(universe, k) for k in SHIFT_SAMPLERS]
    tests = [gen_dataset(truth, s, m_test, rngs[i])
             for i, s in enumerate(samplers)]
    trains = [gen_dataset(truth, s, m_train, rngs[len(samplers) + i])
              for i, s in enumerate(samplers)]
    vals = [gen_dataset(truth, s, m_val, rngs[2 * len(samplers) + i])
            for i, s in enumerate(samplers)]
    per = m_train // len(samplers)
    mix = trains[0].subset(np.arange(per))
    for t in trains[1:]:
        mix = mix.concat(t.subset(np.arange(per)))
    mix_val = vals[0].subset(np.arange(m_val // len(samplers)))
    for v in vals[1:]:
        mix_val = mix_val.concat(v.subset(np.arange(m_val // len(samplers))))
    rows = list(SHIFT_LABELS) + ["Mix", "Oracle"]
    values = np.full((1, len(rows), len(SHIFT_LABELS)), np.nan)
    fit_seed = int(rngs[-1].integers(2 ** 31))
    for r, label in enumerate(rows):
        if label == "Oracle":
            for c, test in enumerate(tests):
                values[0, r, c] = ce_loss(truth, test)
            continue
        data = mix if label == "Mix" else trains[r]
        val = mix_val if label == "Mix" else vals[r]
        result = train("gasn", data, TrainConfig(seed=fit_seed, epochs=epochs),
                       val_data=val, L=L)
        net = NeuralChoiceModel(universe, result.params)
        for c, test in enumerate(tests):
            values[0, r, c] = ce_loss(net, test)
    return ReportTable("distribution-shift", "test cross-entropy", rows,
                       list(SHIFT_LABELS), values)


def em_assortment_size_experiment(n: int = 20, m: int = 10_000,
                                  sizes: Sequence[int] = (2, 4, 6, 8, 10),
                                  trials: int = 10, seed=0) -> ReportTable:
    """Mean absolute parameter error of the EM fit versus assortment size.

    ``sizes`` count offered purchasable products; the error averages
    |lambda - lambda_hat| and |rho - rho_hat| over all n + n^2 entries.
    """
    values = np.full((trials, 1, len(sizes)), np.nan)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for t, s in enumerate(seeds):
        sub = s.spawn(len(sizes) + 1)
        truth = gen_instance("mccm", n, np.random.default_rng(sub[0]))
        for c, size in enumerate(sizes):
            rng = np.random.default_rng(sub[1 + c])
            sampler = AssortmentSampler(truth.universe, "fixed-size", k=size)
            data = gen_dataset(truth, sampler, m, rng)
            fitted = fit_mccm_em(data, EmConfig(seed=int(rng.integers(2 ** 31))))
            err = (np.abs(fitted.lam - truth.lam).sum()
                   + np.abs(fitted.rho - truth.rho).sum()) / (n + n * n)
            values[t, 0, c] = err
    return ReportTable("em-assortment-size", "mean parameter error",
                       ["em-error"], list(sizes), values)


def meta_learn(train_data: ChoiceDataset, val_data: ChoiceDataset,
               candidates: Sequence[tuple], m_prime: int = 100_000,
               seed=0, arch: str = "gasn", L: int = 1, epochs: int = 100):
    """Best-of-the-bests selection around a neural choice model.

    ``candidates`` are (name, fit_fn) pairs for the classical models; the
    neural model is always candidate number one.  If a classical candidate
    validates best, ``m_prime`` synthetic samples drawn from it retrain the
    network, the real data fine-tunes it, and the better of the two on
    validation is returned.  By construction the final validation CE is
    never worse than the best candidate's.
    """
    rng_master = np.random.SeedSequence(seed)
    s_fit, s_synth, s_retrain, s_tune = rng_master.spawn(4)
    fit_seed = int(np.random.default_rng(s_fit).integers(2 ** 31))
    cfg = TrainConfig(seed=fit_seed, epochs=epochs)
    neural = train(arch, train_data, cfg, val_data=val_data, L=L)
    models = {"neural": NeuralChoiceModel(train_data.universe, neural.params, neural.enc)}
    for name, fit_fn in candidates:
        try:
            models[name] = fit_fn(train_data)
        except Exception as exc:
            warnings.warn(f"candidate {name} failed: {exc}")
    val_ce = {name: ce_loss(m, val_data) for name, m in models.items()}
    k_star = min(val_ce, key=val_ce.get)
    info = {"val_ce": val_ce, "k_star": k_star}
    if k_star == "neural":
        info["final"] = "neural"
        info["final_val_ce"] = val_ce["neural"]
        return models["neural"], info
    best = models[k_star]
    sampler = AssortmentSampler(train_data.universe, "uniform-size")
    synth = gen_dataset(best, sampler, m_prime, np.random.default_rng(s_synth),
                        product_features=train_data.product_features)
    retrain_cfg = TrainConfig(seed=int(np.random.default_rng(s_retrain).integers(2 ** 31)),
                              epochs=epochs)
    retrained = train(arch, synth, retrain_cfg, val_data=val_data, L=L)
    tune_cfg = TrainConfig(seed=int(np.random.default_rng(s_tune).integers(2 ** 31)),
                           epochs=epochs)
    tuned = train(arch, train_data, tune_cfg, val_data=val_data, L=L,
                  init=retrained.params, init_enc=retrained.enc)
    tuned_model = NeuralChoiceModel(train_data.universe, tuned.params, tuned.enc)
    tuned_ce = ce_loss(tuned_model, val_data)
    info["tuned_val_ce"] = tuned_ce
    if tuned_ce <= val_ce[k_star]:
        info["final"] = "neural-meta"
        info["final_val_ce"] = tuned_ce
        return tuned_model, info
    info["final"] = k_star
    info["final_val_ce"] = val_ce[k_star]
    return best, info


def depth_width_sweep(spec: ExperimentSpec, depths: Sequence[int],
                      widths: Sequence[int], arch: str = "gasn") -> ReportTable:
    """Test CE across network depths and hidden-width multipliers."""
    values = np.full((spec.trials, len(depths), len(widths)), np.nan)
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    kind = spec.truth_kinds[0]
    for t, s in enumerate(seeds):
        sub = s.spawn(5)
        truth = gen_instance(kind, spec.n, np.random.default_rng(sub[0]))
        sampler = AssortmentSampler(truth.universe, spec.sampler_kind)
        data = gen_dataset(truth, sampler, spec.m_train, np.random.default_rng(sub[1]))
        val = gen_dataset(truth, sampler, spec.m_val, np.random.default_rng(sub[2]))
        test = gen_dataset(truth, sampler, spec.m_test, np.random.default_rng(sub[3]))
        fit_seed = int(np.random.default_rng(sub[4]).integers(2 ** 31))
        for r, depth in enumerate(depths):
            for c, mult in enumerate(widths):
                hidden = [mult * spec.n] * (depth - 1) if arch == "gasn" else None
                result = train(arch, data, TrainConfig(seed=fit_seed, epochs=spec.epochs),
                               val_data=val, L=depth, hidden=hidden)
                net = NeuralChoiceModel(truth.universe, result.params)
                values[t, r, c] = ce_loss(net, test)
    return ReportTable("depth-width", "test cross-entropy", list(depths),
                       list(widths), values, meta=spec_manifest(spec))


def _fold_no_purchase(model: MccmModel, n_keep: int) -> MccmModel:
    """Shrink a chain by folding the trailing products into no-purchase."""
    n = model.universe.n
    keep = list(range(n_keep - 1))         # surviving products
    fold = list(range(n_keep - 1, n - 1))  # products absorbed into no-purchase
    lam = np.zeros(n_keep)
    lam[:-1] = model.lam[keep]
    lam[-1] = model.lam[n - 1] + model.lam[fold].sum()
    rho = np.zeros((n_keep, n_keep))
    rho[:-1, :-1] = model.rho[np.ix_(keep, keep)]
    rho[:-1, -1] = model.rho[np.ix_(keep, fold)].sum(axis=1) + model.rho[keep, n - 1]
    rho[-1, :-1] = model.rho[n - 1, keep]
    rho[-1, -1] = model.rho[n - 1, fold].sum() + model.rho[n - 1, n - 1]
    return MccmModel(Universe.with_no_purchase(n_keep), lam, rho)


def warm_start_experiment(n_old: int = 21, n_new: int = 26, m_pretrain: int = 50_000,
                          m_retrain: int = 2_000, m_val: int = 2_000,
                          n_seeds: int = 10, epochs: int = 100, hidden: int = 50,
                          seed=0) -> dict:
    """Warm versus cold start when new products join the universe.

    A ground-truth chain over the large universe is folded down to the small
    one; a net pretrained on the small universe initialises (warm start) the
    net for the large one.  Returns per-seed epoch logs of validation CE for
    both starts.
    """
    master = np.random.SeedSequence(seed)
    s_truth, s_rest = master.spawn(2)
    rng = np.random.default_rng(s_truth)
    mu = rng.normal(size=n_new)
    lam = np.exp(mu - mu.max())
    lam /= lam.sum()
    nu = rng.normal(size=(n_new, n_new))
    e = np.exp(nu - nu.max(axis=1, keepdims=True))
    rho = e / e.sum(axis=1, keepdims=True)
    big = MccmModel(Universe.with_no_purchase(n_new), lam, rho)
    small = _fold_no_purchase(big, n_old)
    runs = []
    for s in s_rest.spawn(n_seeds):
        sub = s.spawn(5)
        sampler_small = AssortmentSampler(small.universe, "uniform-size")
        sampler_big = AssortmentSampler(big.universe, "uniform-size")
        pre = gen_dataset(small, sampler_small, m_pretrain, np.random.default_rng(sub[0]))
        pre_val = gen_dataset(small, sampler_small, m_val, np.random.default_rng(sub[1]))
        retrain = gen_dataset(big, sampler_big, m_retrain, np.random.default_rng(sub[2]))
        retrain_val = gen_dataset(big, sampler_big, m_val, np.random.default_rng(sub[3]))
        fit_seed = int(np.random.default_rng(sub[4]).integers(2 ** 31))
        cfg = TrainConfig(seed=fit_seed, epochs=epochs)
        pretrained = train("gasn", pre, cfg, val_data=pre_val, L=2, hidden=[hidden])
        warm_init = warm_start_augment(pretrained.params, n_new, seed=fit_seed)
        warm = train("gasn", retrain, cfg, val_data=retrain_val, L=2,
                     hidden=[hidden], init=warm_init)
        cold = train("gasn", retrain, cfg, val_data=retrain_val, L=2, hidden=[hidden])
        runs.append({"warm": [rec["val_ce"] for rec in warm.log],
                     "cold": [rec["val_ce"] for rec in cold.log]})
    return {"runs": runs, "n_old": n_old, "n_new": n_new}
