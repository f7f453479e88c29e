"""Classical benchmark estimators: MNL maximum likelihood and EM for the
Markov-chain choice model."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ChoiceDataset, DatasetError
from .synthetic import (FeatureMnlModel, MccmModel, MnlModel, feature_matrix,
                        masked_softmax)

NEG_INF = float("-inf")


@dataclass
class MleConfig:
    max_iters: int = 1000
    tol: float = 1e-6          # sup-norm of the mean-likelihood gradient

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class EmConfig:
    max_iters: int = 500
    tol: float = 0.01          # mean absolute parameter change at which EM stops
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("threshold must be positive")


def _ascend(objective_and_grad, x0: np.ndarray, cfg: MleConfig):
    """Maximise a smooth concave objective with an analytic gradient.

    Runs L-BFGS to the sup-norm gradient tolerance; plain gradient ascent
    crawls on the nearly flat directions the behavioural fixtures produce.
    Returns (x, info) with convergence, iterations and the final gradient
    norm.
    """
    from scipy.optimize import minimize

    if x0.size == 0:
        return x0, {"converged": True, "iters": 0, "grad_norm": 0.0}

    def neg(x):
        f, g = objective_and_grad(x)
        return -f, -g

    res = minimize(neg, x0, jac=True, method="L-BFGS-B",
                   options={"gtol": cfg.tol / 10, "maxiter": cfg.max_iters,
                            "ftol": 1e-14})
    gnorm = float(np.abs(objective_and_grad(res.x)[1]).max())
    return res.x, {"converged": gnorm <= cfg.tol, "iters": int(res.nit),
                   "grad_norm": gnorm}


def fit_mnl_mle(data: ChoiceDataset, cfg: Optional[MleConfig] = None) -> MnlModel:
    """Maximum-likelihood MNL fit, gauge-fixed at the no-purchase utility.

    Products that never appear in any assortment are unidentified and get a
    -inf utility sentinel (with a warning).  Non-convergence (e.g. a
    separable likelihood pushing a utility to +inf) is flagged on the
    returned model's ``fit_info``.
    """
    cfg = cfg or MleConfig()
    if data.m == 0:
        raise DatasetError("cannot fit on an empty dataset")
    n = data.universe.n
    gauge = data.universe.no_purchase_index
    if gauge is None:
        gauge = n - 1
    offered_ever = data.masks.any(axis=0)
    free = np.flatnonzero(offered_ever & (np.arange(n) != gauge))
    counts = np.bincount(data.chosen, minlength=n).astype(float)

    def objective_and_grad(theta):
        u = np.zeros(n)
        u[free] = theta
        u[~offered_ever] = 0.0  # irrelevant: excluded by every mask
        p = masked_softmax(u[None, :], data.masks)
        ll = float(np.log(np.maximum(p[np.arange(data.m), data.chosen], 1e-300)).mean())
        grad_full = (counts - p.sum(axis=0)) / data.m
        return ll, grad_full[free]

    theta, info = _ascend(objective_and_grad, np.zeros(len(free)), cfg)
    u = np.zeros(n)
    u[free] = theta
    never = np.flatnonzero(~offered_ever)
    if len(never):
        warnings.warn(f"products never offered, utilities unidentified: {never.tolist()}")
        u[never] = NEG_INF
    # separable likelihood: a product chosen every time it is offered drives
    # its utility to +infinity (the optimiser stalls at a large finite value)
    offered_count = data.masks.sum(axis=0)
    always = np.flatnonzero((counts == offered_count) & offered_ever
                            & (np.arange(n) != gauge))
    if len(always):
        info["diverged"] = always.tolist()
        info["converged"] = False
        warnings.warn(f"utilities diverging for products {always.tolist()}; "
                      "the likelihood is separable")
    model = MnlModel(data.universe, u)
    model.fit_info = info
    if not info["converged"] and "diverged" not in info:
        warnings.warn(f"MNL MLE did not converge (grad norm {info['grad_norm']:.2e})")
    return model


def fit_feature_mnl_mle(data: ChoiceDataset, cfg: Optional[MleConfig] = None) -> FeatureMnlModel:
    """MLE for the linear-in-attributes MNL.

    Customer features, when present, are concatenated to each product's
    feature row.  A rank-deficient design still converges (the objective is
    concave); the result is flagged non-unique.
    """
    cfg = cfg or MleConfig()
    if data.product_features is None:
        raise DatasetError("feature-based MLE needs product features")
    pf = data.product_features
    m, n = data.masks.shape
    if data.customer_features is None:
        designs = np.broadcast_to(pf, (m,) + pf.shape)
    else:
        cf = data.customer_features
        designs = np.concatenate([
            np.broadcast_to(pf, (m,) + pf.shape),
            np.broadcast_to(cf[:, None, :], (m, n, cf.shape[1]))], axis=2)
    d = designs.shape[2]
    rows = np.arange(m)

    def objective_and_grad(beta):
        u = designs @ beta
        p = masked_softmax(u, data.masks)
        ll = float(np.log(np.maximum(p[rows, data.chosen], 1e-300)).mean())
        grad = (designs[rows, data.chosen] - np.einsum("mn,mnd->md", p, designs)).mean(axis=0)
        return ll, grad

    beta, info = _ascend(objective_and_grad, np.zeros(d), cfg)
    stacked = designs.reshape(-1, d)[:min(10 * d * n, m * n)]
    if np.linalg.matrix_rank(stacked) < d:
        info["non_unique"] = True
        warnings.warn("feature matrix is rank deficient; MLE optimum is not unique")
    model = FeatureMnlModel(data.universe, beta)
    model.fit_info = info
    return model


# ---------------------------------------------------------------------------
# EM for the Markov-chain choice model.
#
# E-step, for one observation (i, S) under current (lam, rho): let T be the
# non-offered states, Q = rho[T, T], R = rho[T, S],
#   X = (I - Q)^{-1} R      (absorption probabilities from each transient)
#   v^T = lam[T]^T (I-Q)^{-1}   (expected visits to each transient state)
#   P(i|S) = lam_i + (lam[T]^T X)_i.
# Conditioning on absorption at i,
#   E[arrivals at j]        = lam_j X_{j,i} / P(i|S)   (delta_{ji} if j offered)
#   E[transitions j -> j']  = v_j rho_{jj'} X_{j',i} / P(i|S)   for j,j' in T
#   E[transitions j -> i]   = v_j rho_{j,i} / P(i|S)            for j in T,
# all other transition counts being zero.  The M-step normalises the
# accumulated expected counts.  With full assortments there are no transient
# states, so one M-step returns the empirical choice frequencies exactly;
# that closed form anchors the implementation's correctness.
# ---------------------------------------------------------------------------

def _group_by_mask(data: ChoiceDataset):
    """Group samples by assortment; per mask, count choices per product."""
    groups: dict[bytes, dict] = {}
    packed = np.packbits(data.masks, axis=1)
    for k in range(data.m):
        key = packed[k].tobytes()
        g = groups.get(key)
        if g is None:
            g = {"mask": data.masks[k], "counts": {}}
            groups[key] = g
        c = int(data.chosen[k])
        g["counts"][c] = g["counts"].get(c, 0) + 1
    return list(groups.values())


def fit_mccm_em(data: ChoiceDataset, cfg: Optional[EmConfig] = None) -> MccmModel:
    """Expectation-maximisation fit of the Markov-chain choice model.

    Starts from uniformly random normalised parameters and stops when the
    mean absolute change across all entries of (lam, rho) falls below
    ``cfg.tol`` (or at ``cfg.max_iters``).  Training log-likelihood is
    non-decreasing across iterations; per-iteration values are recorded on
    the returned model's ``fit_info``.
    """
    cfg = cfg or EmConfig()
    if data.m == 0:
        raise DatasetError("cannot fit on an empty dataset")
    n = data.universe.n
    rng = np.random.default_rng(cfg.seed)
    lam = rng.random(n)
    lam /= lam.sum()
    rho = rng.random((n, n))
    rho /= rho.sum(axis=1, keepdims=True)
    groups = _group_by_mask(data)
    # precompute index arrays per group
    for g in groups:
        mask = g["mask"]
        g["S"] = np.flatnonzero(mask)
        g["T"] = np.flatnonzero(~mask)
        items = sorted(g["counts"].items())
        g["chosen_cols"] = np.asarray([g["S"].tolist().index(i) for i, _ in items])
        g["chosen_idx"] = np.asarray([i for i, _ in items])
        g["chosen_cnt"] = np.asarray([c for _, c in items], dtype=float)

    ll_trace = []
    iters_done = 0
    for it in range(cfg.max_iters):
        arrivals = np.zeros(n)
        trans = np.zeros((n, n))
        ll = 0.0
        for g in groups:
            S, T = g["S"], g["T"]
            cols, idx, cnt = g["chosen_cols"], g["chosen_idx"], g["chosen_cnt"]
            if len(T) == 0:
                p = lam[idx]
                w = cnt / np.maximum(p, 1e-300)
                arrivals[idx] += lam[idx] * w
                ll += float(cnt @ np.log(np.maximum(p, 1e-300)))
                continue
            Q = rho[np.ix_(T, T)]
            R = rho[np.ix_(T, S)]
            I_Q = np.eye(len(T)) - Q
            X = np.linalg.solve(I_Q, R)
            v = np.linalg.solve(I_Q.T, lam[T])
            p_S = lam[S] + v @ R  # equals lam_S + lam_T X
            p = p_S[cols]
            w = cnt / np.maximum(p, 1e-300)  # per chosen product: count / P(i|S)
            ll += float(cnt @ np.log(np.maximum(p, 1e-300)))
            arrivals[idx] += lam[idx] * w
            Xw = X[:, cols] @ w
            arrivals[T] += lam[T] * Xw
            trans[np.ix_(T, T)] += (v[:, None] * Q) * Xw[None, :]
            wS = np.zeros(len(S))
            wS[cols] = w
            trans[np.ix_(T, S)] += (v[:, None] * R) * wS[None, :]
        ll_trace.append(ll / data.m)
        lam_new = arrivals / arrivals.sum()
        rho_new = rho.copy()
        row_tot = trans.sum(axis=1)
        nonzero = row_tot > 0
        rho_new[nonzero] = trans[nonzero] / row_tot[nonzero, None]
        delta = (np.abs(lam_new - lam).sum() + np.abs(rho_new - rho).sum()) / (n + n * n)
        lam, rho = lam_new, rho_new
        iters_done = it + 1
        if delta < cfg.tol:
            break
    model = MccmModel(data.universe, lam, rho)
    model.fit_info = {"iters": iters_done, "loglik_trace": ll_trace,
                      "converged": iters_done < cfg.max_iters}
    return model
