"""Ground-truth choice models, parameter generators and assortment samplers.

The four classical families (MNL, Markov-chain, rank-list, mixed logit) are
implemented with exact probability oracles so synthetic experiments can
compare estimators against the true entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (Assortment, ChoiceDataset, ChoiceModel, ModelInvariantError,
                   Universe)


def masked_softmax(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Softmax restricted to the offered entries, exact zeros elsewhere.

    Uses max-subtraction so large-magnitude utilities (e.g. the -50 fillers
    of the mixed-logit generator) do not overflow.
    """
    z = np.where(masks, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class MnlModel(ChoiceModel):
    """Multinomial logit with mean-utility vector ``u``."""

    def __init__(self, universe: Universe, u: np.ndarray):
        self.universe = universe
        self.u = np.asarray(u, dtype=float)
        if self.u.shape != (universe.n,):
            raise ValueError("utility vector length mismatch")

    def choice_probs(self, mask, product_features=None, customer_features=None):
        return masked_softmax(self.u, np.asarray(mask, dtype=bool))

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        return masked_softmax(self.u[None, :], np.asarray(masks, dtype=bool))


def mnl_prob(model: MnlModel, assortment: Assortment) -> np.ndarray:
    return model.choice_probs(assortment.mask)


class MccmModel(ChoiceModel):
    """Markov-chain choice: arrival distribution ``lam``, transitions ``rho``.

    The choice probability is the absorption distribution of the walk with
    offered products absorbing.
    """

    def __init__(self, universe: Universe, lam: np.ndarray, rho: np.ndarray):
        self.universe = universe
        self.lam = np.asarray(lam, dtype=float)
        self.rho = np.asarray(rho, dtype=float)
        n = universe.n
        if self.lam.shape != (n,) or self.rho.shape != (n, n):
            raise ValueError("parameter shapes inconsistent with universe")
        if np.any(self.lam < -1e-12) or abs(self.lam.sum() - 1.0) > 1e-9:
            raise ValueError("arrival probabilities must form a distribution")
        if np.any(self.rho < -1e-12) or np.any(np.abs(self.rho.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition matrix must be row-stochastic")

    def absorption_matrix(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (transient indices T, |T| x n matrix of absorption probs).

        Row ``t`` is the distribution of the absorbing product for a walk
        started at transient state ``T[t]``.  If a closed class of
        non-offered products exists the linear solve is singular; the walk
        is then resolved iteratively and any unabsorbed mass is assigned to
        the no-purchase option (which is always offered under our
        convention, so this is a totality safeguard rather than a modelling
        choice).
        """
        mask = np.asarray(mask, dtype=bool)
        T = np.flatnonzero(~mask)
        S = np.flatnonzero(mask)
        n = self.universe.n
        A = np.zeros((len(T), n))
        if len(T) == 0:
            return T, A
        Q = self.rho[np.ix_(T, T)]
        R = self.rho[np.ix_(T, S)]
        try:
            X = np.linalg.solve(np.eye(len(T)) - Q, R)
            ok = np.all(np.isfinite(X)) and np.all(X > -1e-8) \
                and np.all(X.sum(axis=1) <= 1.0 + 1e-8)
        except np.linalg.LinAlgError:
            ok = False
        if not ok:
            X = self._iterative_absorption(Q, R)
        A[:, S] = np.clip(X, 0.0, 1.0)
        deficit = 1.0 - A.sum(axis=1)
        if np.any(deficit > 1e-10):
            npi = self.universe.no_purchase_index
            if npi is None:
                closed = [int(t) for t, d in zip(T, deficit) if d > 1e-10]
                raise ModelInvariantError(
                    "walk never absorbs: closed class of non-offered products "
                    f"reachable from states {closed}")
            A[:, npi] += np.maximum(deficit, 0.0)
        return T, A

    @staticmethod
    def _iterative_absorption(Q: np.ndarray, R: np.ndarray,
                              tol: float = 1e-10, max_iters: int = 100000) -> np.ndarray:
        """Bellman-style fallback for a (near-)singular transient block."""
        X = np.zeros_like(R)
        for _ in range(max_iters):
            X_new = R + Q @ X
            if np.abs(X_new - X).max() < tol:
                return X_new
            X = X_new
        return X

    def choice_probs(self, mask, product_features=None, customer_features=None):
        mask = np.asarray(mask, dtype=bool)
        p = np.where(mask, self.lam, 0.0)
        T, A = self.absorption_matrix(mask)
        if len(T):
            p = p + self.lam[T] @ A
        p[~mask] = 0.0
        s = p.sum()
        if s > 0:
            p = p / s
        return p


def mccm_prob(model: MccmModel, assortment: Assortment) -> np.ndarray:
    return model.choice_probs(assortment.mask)


class NpModel(ChoiceModel):
    """Rank-list model: each customer type buys its first offered product."""

    def __init__(self, universe: Universe, perms: np.ndarray, weights: np.ndarray):
        self.universe = universe
        self.perms = np.asarray(perms, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=float)
        n = universe.n
        if self.perms.ndim != 2 or self.perms.shape[1] != n:
            raise ValueError("permutations must be rows of length n")
        if np.any(np.sort(self.perms, axis=1) != np.arange(n)):
            raise ValueError("each row must be a permutation of 0..n-1")
        if len(self.weights) != len(self.perms) or np.any(self.weights < 0) \
                or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must form a distribution over permutations")

    def choice_probs(self, mask, product_features=None, customer_features=None):
        mask = np.asarray(mask, dtype=bool)
        p = np.zeros(self.universe.n)
        offered = mask[self.perms]                      # rank positions that are offered
        first = offered.argmax(axis=1)                  # first offered rank per type
        items = self.perms[np.arange(len(self.perms)), first]
        np.add.at(p, items, self.weights)
        return p


def np_prob(model: NpModel, assortment: Assortment) -> np.ndarray:
    return model.choice_probs(assortment.mask)


class MmnlModel(ChoiceModel):
    """Finite mixture of MNL segments with weights ``alpha``."""

    def __init__(self, universe: Universe, alpha: np.ndarray, u: np.ndarray):
        self.universe = universe
        self.alpha = np.asarray(alpha, dtype=float)
        self.u = np.asarray(u, dtype=float)
        if self.u.ndim != 2 or self.u.shape[1] != universe.n:
            raise ValueError("segment utilities must be |C| x n")
        if len(self.alpha) != len(self.u) or np.any(self.alpha < 0) \
                or abs(self.alpha.sum() - 1.0) > 1e-9:
            raise ValueError("segment weights must form a distribution")

    def choice_probs(self, mask, product_features=None, customer_features=None):
        mask = np.asarray(mask, dtype=bool)
        p = masked_softmax(self.u, mask[None, :])
        return self.alpha @ p

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        masks = np.asarray(masks, dtype=bool)
        p = masked_softmax(self.u[None, :, :], masks[:, None, :])
        return np.einsum("c,mcn->mn", self.alpha, p)


def mmnl_prob(model: MmnlModel, assortment: Assortment) -> np.ndarray:
    return model.choice_probs(assortment.mask)


class FeatureMnlModel(ChoiceModel):
    """Linear-in-attributes MNL: utility of product i is beta . z_i."""

    def __init__(self, universe: Universe, beta: np.ndarray):
        self.universe = universe
        self.beta = np.asarray(beta, dtype=float)
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")

    def utilities(self, product_features, customer_features=None) -> np.ndarray:
        z = feature_matrix(product_features, customer_features)
        return z @ self.beta

    def choice_probs(self, mask, product_features=None, customer_features=None):
        if product_features is None:
            raise ValueError("feature-based MNL needs product features")
        u = self.utilities(product_features, customer_features)
        return masked_softmax(u, np.asarray(mask, dtype=bool))

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        masks = np.asarray(masks, dtype=bool)
        if customer_features is None:
            u = self.utilities(product_features)
            return masked_softmax(u[None, :], masks)
        out = np.zeros(masks.shape, dtype=float)
        for k in range(masks.shape[0]):
            out[k] = self.choice_probs(masks[k], product_features, customer_features[k])
        return out


class FeatureMccmModel(ChoiceModel):
    """Markov-chain choice with feature-driven arrivals and transitions."""

    def __init__(self, universe: Universe, beta: np.ndarray, A: np.ndarray):
        self.universe = universe
        self.beta = np.asarray(beta, dtype=float)
        self.A = np.asarray(A, dtype=float)
        if self.A.shape[0] != universe.n:
            raise ValueError("transition coefficient matrix must have n rows")

    def realise(self, product_features: np.ndarray) -> MccmModel:
        """Instantiate the parametric chain for a concrete feature matrix."""
        z = np.asarray(product_features, dtype=float)
        lam_logit = z @ self.beta
        lam = np.exp(lam_logit - lam_logit.max())
        lam = lam / lam.sum()
        logits = z @ self.A.T                # (i, j) entry: A_j . z_i
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        rho = e / e.sum(axis=1, keepdims=True)
        return MccmModel(self.universe, lam, rho)

    def choice_probs(self, mask, product_features=None, customer_features=None):
        if product_features is None:
            raise ValueError("feature-based MCCM needs product features")
        return self.realise(product_features).choice_probs(mask)

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        chain = self.realise(product_features)
        return chain.choice_probs_batch(np.asarray(masks, dtype=bool))


class TabularModel(ChoiceModel):
    """Lookup model defined on an explicit set of assortments.

    Used for the behavioural vignette fixtures where the truth is stated
    per assortment rather than generated from a parametric family.
    """

    def __init__(self, universe: Universe, table: dict[str, np.ndarray]):
        self.universe = universe
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def choice_probs(self, mask, product_features=None, customer_features=None):
        key = "".join("1" if b else "0" for b in np.asarray(mask, dtype=bool))
        if key not in self.table:
            raise KeyError(f"assortment {key} not covered by the fixture table")
        return self.table[key]


def feature_matrix(product_features: np.ndarray,
                   customer_features: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-product attribute rows; customer features are shared across rows."""
    z = np.asarray(product_features, dtype=float)
    if customer_features is None:
        return z
    cf = np.broadcast_to(np.asarray(customer_features, dtype=float), (z.shape[0], len(customer_features)))
    return np.hstack([z, cf])


# ---------------------------------------------------------------------------
# Assortment samplers.  Every sampler forces the no-purchase bit on.
# ---------------------------------------------------------------------------

SAMPLER_KINDS = ("uniform-size", "bernoulli-half", "half-blocked", "window-third",
                 "fixed-size")


@dataclass(frozen=True)
class AssortmentSampler:
    """Assortment-generating distribution used to build training sets.

    ``uniform-size`` draws |S| uniformly from {1..n} then picks products at
    random (the D-1 distribution); ``bernoulli-half`` includes each product
    independently with probability 1/2 (D-2); ``half-blocked`` bans one half
    of the product range per sample (D-3, n even); ``window-third`` restricts
    |S| to {n/3, n/3+1} (D-4, n divisible by 3); ``fixed-size`` offers exactly
    ``k`` purchasable products.
    """

    universe: Universe
    kind: str
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        n = self.universe.n
        if self.kind == "half-blocked" and n % 2 != 0:
            raise ValueError("half-blocked sampler needs an even universe size")
        if self.kind == "window-third" and n % 3 != 0:
            raise ValueError("window-third sampler needs n divisible by 3")
        if self.kind == "fixed-size":
            reals = n - (1 if self.universe.has_no_purchase else 0)
            if self.k is None or not (1 <= self.k <= reals):
                raise ValueError("fixed-size sampler needs 1 <= k <= number of products")

    def sample(self, m: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        n = self.universe.n
        npi = self.universe.no_purchase_index
        masks = np.zeros((m, n), dtype=bool)
        if self.kind == "uniform-size":
            sizes = rng.integers(1, n + 1, size=m)
            for k in range(m):
                masks[k, rng.choice(n, size=sizes[k], replace=False)] = True
        elif self.kind == "bernoulli-half":
            masks = rng.random((m, n)) < 0.5
        elif self.kind == "half-blocked":
            half = n // 2
            block_first = rng.random(m) < 0.5
            sizes = rng.integers(1, half + 1, size=m)
            for k in range(m):
                lo = half if block_first[k] else 0
                masks[k, lo + rng.choice(half, size=sizes[k], replace=False)] = True
        elif self.kind == "window-third":
            sizes = n // 3 + rng.integers(0, 2, size=m)
            for k in range(m):
                masks[k, rng.choice(n, size=sizes[k], replace=False)] = True
        else:  # fixed-size
            reals = self.universe.real_products()
            for k in range(m):
                masks[k, rng.choice(reals, size=self.k, replace=False)] = True
        if npi is not None:
            masks[:, npi] = True
        bad = ~masks.any(axis=1)
        if bad.any():  # only possible without a no-purchase slot
            for k in np.flatnonzero(bad):
                masks[k, rng.integers(0, n)] = True
        return masks


def sample_assortments(sampler: AssortmentSampler, m: int, seed) -> list[Assortment]:
    masks = sampler.sample(m, seed)
    return [Assortment(sampler.universe, row) for row in masks]


# ---------------------------------------------------------------------------
# Instance generators.  The presets follow the published recipes for
# n in {20, 50}; other sizes scale the knobs as documented below.
# ---------------------------------------------------------------------------

def _mccm_knobs(n: int) -> tuple[float, int]:
    # presets: (2.5, 4) at n=20 and (4.0, 10) at n=50; linear in between,
    # cluster count ~ n/5 elsewhere
    if n <= 20:
        sigma = 2.5
    elif n >= 50:
        sigma = 4.0
    else:
        sigma = 2.5 + 1.5 * (n - 20) / 30.0
    c_num = {20: 4, 50: 10}.get(n, max(1, round(n / 5)))
    return sigma, c_num


def _np_knobs(n: int) -> int:
    return {20: 10, 50: 20}.get(n, max(2, round(n / 2.5)))


def gen_instance(kind: str, n: int, seed, sigma: Optional[float] = None,
                 c_num: Optional[int] = None, n_perm: Optional[int] = None,
                 n_segments: int = 5) -> ChoiceModel:
    """Draw a random ground-truth model of the requested family.

    ``n`` counts all options including the no-purchase slot at index n-1.

    * ``mnl``: n i.i.d. standard-normal mean utilities.
    * ``mccm``: arrivals are a softmax of N(0, sigma^2) draws; transition
      rows are softmaxes with a 2*sigma in-group bump over ``c_num``
      contiguous clusters (sigma=2.5, c_num=4 at n=20; sigma=4, c_num=10 at
      n=50).  ``c_num=1`` removes the cluster structure, which is the
      recipe used by the distribution-shift experiments.
    * ``np``: ``n_perm`` uniformly random permutations with equal weights
      (10 at n=20, 20 at n=50).
    * ``mmnl``: 5 equally likely segments; each segment favours its own
      contiguous window of products with utilities N(c + n/5, 1), keeps the
      no-purchase utility at 0 and assigns -50 elsewhere.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    universe = Universe.with_no_purchase(n)
    if kind == "mnl":
        return MnlModel(universe, rng.normal(size=n))
    if kind == "mccm":
        sig, cn = _mccm_knobs(n)
        sig = sig if sigma is None else sigma
        cn = cn if c_num is None else c_num
        mu = rng.normal(0.0, sig, size=n)
        lam = np.exp(mu - mu.max())
        lam /= lam.sum()
        group = (np.arange(n) * cn) // n
        base = np.where(group[:, None] == group[None, :], 2.0 * sig, 0.0)
        nu = rng.normal(base, sig)
        e = np.exp(nu - nu.max(axis=1, keepdims=True))
        rho = e / e.sum(axis=1, keepdims=True)
        return MccmModel(universe, lam, rho)
    if kind == "np":
        k = _np_knobs(n) if n_perm is None else n_perm
        perms = np.asarray([rng.permutation(n) for _ in range(k)])
        return NpModel(universe, perms, np.full(k, 1.0 / k))
    if kind == "mmnl":
        reals = universe.real_products()
        u = np.full((n_segments, n), -50.0)
        u[:, universe.no_purchase_index] = 0.0
        nr = len(reals)
        for c in range(n_segments):
            lo, hi = (c * nr) // n_segments, ((c + 1) * nr) // n_segments
            u[c, reals[lo:hi]] = rng.normal(c + 1 + n / 5.0, 1.0, size=hi - lo)
        return MmnlModel(universe, np.full(n_segments, 1.0 / n_segments), u)
    raise ValueError(f"unknown model kind {kind!r}")


def gen_feature_instance(kind: str, n: int, d: int, seed):
    """Feature-based truth plus its static n x d feature matrix (all N(0,1))."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    universe = Universe.with_no_purchase(n)
    features = rng.normal(size=(n, d))
    if kind == "mnl-f":
        return FeatureMnlModel(universe, rng.normal(size=d)), features
    if kind == "mccm-f":
        return FeatureMccmModel(universe, rng.normal(size=d), rng.normal(size=(n, d))), features
    raise ValueError(f"unknown feature model kind {kind!r}")


def gen_dataset(model: ChoiceModel, sampler: AssortmentSampler, m: int, seed,
                product_features: Optional[np.ndarray] = None) -> ChoiceDataset:
    """Sample ``m`` transactions from a ground-truth model.

    Choices are drawn by inverse CDF from the exact oracle probabilities, so
    the dataset is deterministic under the seed.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    masks = sampler.sample(m, rng)
    if m == 0:
        return ChoiceDataset(model.universe, np.zeros(0, dtype=np.int64), masks,
                             None, product_features)
    probs = model.choice_probs_batch(masks, product_features)
    cdf = np.cumsum(probs, axis=1)
    draws = rng.random(m)
    chosen = (draws[:, None] > cdf).sum(axis=1)
    chosen = np.minimum(chosen, model.universe.n - 1)
    return ChoiceDataset(model.universe, chosen, masks, None, product_features)


def augment_no_purchase(data: ChoiceDataset, copies: int = 4) -> ChoiceDataset:
    """Append ``copies`` synthetic no-purchase records per original sample.

    Mirrors the preprocessing used for purchase-only transaction logs: each
    original assortment is replicated with the no-purchase option chosen.
    """
    npi = data.universe.no_purchase_index
    if npi is None:
        raise ValueError("universe declares no no-purchase option")
    if copies == 0 or data.m == 0:
        return data
    rep_masks = np.repeat(data.masks, copies, axis=0)
    rep_chosen = np.full(len(rep_masks), npi, dtype=np.int64)
    cf = None
    if data.customer_features is not None:
        cf = np.vstack([data.customer_features,
                        np.repeat(data.customer_features, copies, axis=0)])
    return ChoiceDataset(data.universe,
                         np.concatenate([data.chosen, rep_chosen]),
                         np.vstack([data.masks, rep_masks]),
                         cf, data.product_features)


# ---------------------------------------------------------------------------
# Behavioural vignette fixtures (duplicate product, decoy option, preference
# cycle).  Each fixture lists its case assortments with the true choice
# probabilities; training samples draw a case uniformly at random.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixtureTable:
    name: str
    universe: Universe
    truth: TabularModel
    case_masks: tuple
    case_names: tuple

    def sample_dataset(self, m: int = 8000, seed=0) -> ChoiceDataset:
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, len(self.case_masks), size=m)
        masks = np.asarray([self.case_masks[p] for p in picks], dtype=bool)
        probs = np.asarray([self.truth.choice_probs(row) for row in masks])
        cdf = np.cumsum(probs, axis=1)
        chosen = (rng.random(m)[:, None] > cdf).sum(axis=1)
        return ChoiceDataset(self.universe, chosen, masks)


def _mask(bits: str) -> np.ndarray:
    return np.asarray([c == "1" for c in bits], dtype=bool)


def fixture_tables() -> dict[str, FixtureTable]:
    """The three behavioural vignettes used to probe non-IIA behaviour.

    ``duplicate``: adding a clone splits the original product's share while
    the no-purchase share stays put.  ``decoy``: an inferior decoy flips the
    ranking of the two real options.  ``cycle``: pairwise preferences over
    three gambles form a cycle (this universe has no no-purchase option).
    """
    # products: [A, A', no-purchase]
    u_dup = Universe.with_no_purchase(3)
    dup = FixtureTable(
        "duplicate", u_dup,
        TabularModel(u_dup, {"101": [0.60, 0.0, 0.40], "111": [0.30, 0.30, 0.40]}),
        (_mask("101"), _mask("111")), ("case1", "case2"))
    # products: [internet-only, print-and-internet, print-only, no-purchase]
    u_dec = Universe.with_no_purchase(4)
    dec = FixtureTable(
        "decoy", u_dec,
        TabularModel(u_dec, {"1101": [0.57, 0.29, 0.0, 0.14],
                             "1111": [0.29, 0.57, 0.00, 0.14]}),
        (_mask("1101"), _mask("1111")), ("case1", "case2"))
    # gambles: [A, B, C]; no no-purchase option in this vignette
    u_cyc = Universe(3, None)
    cyc = FixtureTable(
        "cycle", u_cyc,
        TabularModel(u_cyc, {"110": [0.75, 0.25, 0.0],
                             "011": [0.0, 0.75, 0.25],
                             "101": [0.20, 0.0, 0.80]}),
        (_mask("110"), _mask("011"), _mask("101")), ("case1", "case2", "case3"))
    return {"duplicate": dup, "decoy": dec, "cycle": cyc}


# ---------------------------------------------------------------------------
# JSON persistence.  One document per model with a ``kind`` tag; floats
# round-trip exactly through Python's shortest-repr encoding.
# ---------------------------------------------------------------------------

def model_to_dict(model: ChoiceModel) -> dict:
    npi = model.universe.no_purchase_index
    base = {"n": model.universe.n, "no_purchase_index": npi}
    if isinstance(model, MnlModel):
        return {"kind": "mnl", **base, "u": model.u.tolist()}
    if isinstance(model, MccmModel):
        return {"kind": "mccm", **base, "lambda": model.lam.tolist(),
                "rho": model.rho.tolist()}
    if isinstance(model, NpModel):
        return {"kind": "np", **base, "perms": model.perms.tolist(),
                "weights": model.weights.tolist()}
    if isinstance(model, MmnlModel):
        return {"kind": "mmnl", **base, "alpha": model.alpha.tolist(),
                "u": model.u.tolist()}
    if isinstance(model, FeatureMnlModel):
        return {"kind": "feature_mnl", **base, "beta": model.beta.tolist()}
    if isinstance(model, FeatureMccmModel):
        return {"kind": "feature_mccm", **base, "beta": model.beta.tolist(),
                "A": model.A.tolist()}
    if isinstance(model, TabularModel):
        return {"kind": "tabular", **base,
                "table": {k: v.tolist() for k, v in model.table.items()}}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(doc: dict) -> ChoiceModel:
    universe = Universe(doc["n"], doc.get("no_purchase_index"))
    kind = doc["kind"]
    if kind == "mnl":
        return MnlModel(universe, np.asarray(doc["u"]))
    if kind == "mccm":
        return MccmModel(universe, np.asarray(doc["lambda"]), np.asarray(doc["rho"]))
    if kind == "np":
        return NpModel(universe, np.asarray(doc["perms"]), np.asarray(doc["weights"]))
    if kind == "mmnl":
        return MmnlModel(universe, np.asarray(doc["alpha"]), np.asarray(doc["u"]))
    if kind == "feature_mnl":
        return FeatureMnlModel(universe, np.asarray(doc["beta"]))
    if kind == "feature_mccm":
        return FeatureMccmModel(universe, np.asarray(doc["beta"]), np.asarray(doc["A"]))
    if kind == "tabular":
        return TabularModel(universe, {k: np.asarray(v) for k, v in doc["table"].items()})
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(path, model: ChoiceModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> ChoiceModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
