"""Assortment optimization: exact oracles, heuristics and MIP encodings.

The mixed-integer instances built here are plain linear variable/row
descriptions.  The gated-net encoding follows the big-M scheme for ReLU
units with per-unit constants tightened by interval propagation; its
fractional objective (a ratio of quadratic surrogates of the exponential)
is kept structural and solved natively by a Dinkelbach outer loop around a
depth-first branch-and-bound, or exported to LP text after linearisation at
a fixed ratio level.
"""

from __future__ import annotations

import re
import time
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .core import (Assortment, CapacityConstraint, ChoiceModel, RevenueSpec,
                   Universe, expected_revenue)
from .neural import NetworkParams, _forward_batch
from .synthetic import MccmModel, MnlModel, NpModel

BRUTE_FORCE_LIMIT = 25          # universe size cap: 2^24 evaluations budget
NODE_LIMIT = 10_000_000


@dataclass
class Variable:
    name: str
    kind: str                   # "binary" | "continuous"
    lb: float
    ub: float


@dataclass
class LinearRow:
    coefs: list                 # [(var_index, coefficient), ...]
    sense: str                  # "<=", ">=", "="
    rhs: float
    name: str = ""


@dataclass
class MipInstance:
    """Variables, linear rows and an objective descriptor.

    ``objective`` is either ``{"type": "linear", "coefs": [...]}`` or
    ``{"type": "ratio", "num": [...], "den": [...]}`` (both maximised).
    ``big_m`` records the tightened per-unit constants; ``meta`` carries
    builder-specific structure (variable maps, source model arrays) used by
    the native solver and by tests.
    """

    variables: list
    constraints: list
    objective: dict
    big_m: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def var_index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise KeyError(name)


@dataclass
class OptResult:
    """Recommended assortment plus bookkeeping about how it was found."""

    mask: np.ndarray
    objective: float
    method: str
    exact: bool
    nodes: int = 0
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"assortment": "".join("1" if b else "0" for b in self.mask),
                "objective": self.objective, "method": self.method,
                "exact": self.exact, "nodes": self.nodes,
                "seconds": self.seconds, **self.extra}


def _mask_key(mask: np.ndarray) -> tuple:
    return (int(mask.sum()),) + tuple(int(b) for b in mask)


def _enumerate_masks(universe: Universe, chunk: int = 1 << 14):
    """Yield chunks of all candidate masks (no-purchase forced on)."""
    reals = universe.real_products()
    r = len(reals)
    npi = universe.no_purchase_index
    total = 1 << r
    shifts = np.arange(r)
    start = 0 if npi is not None else 1   # without a no-purchase slot, skip empty
    for lo in range(start, total, chunk):
        ints = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        masks = np.zeros((len(ints), universe.n), dtype=bool)
        masks[:, reals] = ((ints[:, None] >> shifts) & 1).astype(bool)
        if npi is not None:
            masks[:, npi] = True
        yield masks


def _best_mask(masks: np.ndarray, values: np.ndarray, best):
    """Fold a chunk into the incumbent with the smaller-then-lexicographic tie rule."""
    vmax = values.max()
    if best is None or vmax > best[0] + 1e-12:
        cand = np.flatnonzero(values >= vmax - 1e-12)
        pick = min(cand, key=lambda k: _mask_key(masks[k]))
        return (float(values[pick]), masks[pick].copy())
    if vmax >= best[0] - 1e-12:
        cand = np.flatnonzero(values >= best[0] - 1e-12)
        pick = min(cand, key=lambda k: _mask_key(masks[k]))
        if _mask_key(masks[pick]) < _mask_key(best[1]):
            return (best[0], masks[pick].copy())
    return best


def brute_force_opt(model: ChoiceModel, rev: RevenueSpec,
                    cap: Optional[CapacityConstraint] = None,
                    product_features: Optional[np.ndarray] = None) -> OptResult:
    """Exact optimum by enumeration; ties break toward smaller assortments.

    Refuses universes beyond ``BRUTE_FORCE_LIMIT`` options; use the MIP
    export for anything larger.
    """
    universe = model.universe
    if universe.n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"n={universe.n} exceeds the enumeration budget "
                         f"({BRUTE_FORCE_LIMIT}); export a MIP instead")
    start = time.perf_counter()
    best = None
    count = 0
    for masks in _enumerate_masks(universe):
        if cap is not None:
            keep = masks @ cap.a <= cap.c + 1e-9
            masks = masks[keep]
            if not len(masks):
                continue
        probs = model.choice_probs_batch(masks, product_features)
        values = probs @ rev.mu
        count += len(masks)
        best = _best_mask(masks, values, best)
    return OptResult(best[1], best[0], "brute-force", True, nodes=count,
                     seconds=time.perf_counter() - start)


def revenue_ordered(model: ChoiceModel, rev: RevenueSpec,
                    cap: Optional[CapacityConstraint] = None,
                    product_features: Optional[np.ndarray] = None) -> OptResult:
    """Best feasible nested assortment by decreasing revenue."""
    universe = model.universe
    start = time.perf_counter()
    reals = universe.real_products()
    order = reals[np.argsort(-rev.mu[reals], kind="stable")]
    mask = np.zeros(universe.n, dtype=bool)
    if universe.no_purchase_index is not None:
        mask[universe.no_purchase_index] = True
        best = (float(rev.mu @ model.choice_probs(mask, product_features)), mask.copy())
    else:
        best = None
    for i in order:
        mask[i] = True
        if cap is not None and not cap.satisfied(mask):
            break  # coefficients are nonnegative, so larger prefixes stay infeasible
        value = float(rev.mu @ model.choice_probs(mask, product_features))
        if best is None or value > best[0] + 1e-12:
            best = (value, mask.copy())
    if best is None:
        raise ValueError("no feasible nested assortment under the constraint")
    return OptResult(best[1], best[0], "revenue-ordered", False,
                     seconds=time.perf_counter() - start)


def adxopt(model: ChoiceModel, rev: RevenueSpec,
           cap: Optional[CapacityConstraint] = None, removal_limit: int = 5,
           product_features: Optional[np.ndarray] = None) -> OptResult:
    """Greedy add/delete/exchange local search with a per-product removal cap.

    Repeatedly applies the feasible move with the greatest revenue gain;
    a product may be removed (deleted or swapped out) at most
    ``removal_limit`` times.
    """
    universe = model.universe
    start = time.perf_counter()
    reals = set(universe.real_products().tolist())
    mask = np.zeros(universe.n, dtype=bool)
    if universe.no_purchase_index is not None:
        mask[universe.no_purchase_index] = True
    removals = np.zeros(universe.n, dtype=int)

    def value(m):
        return float(rev.mu @ model.choice_probs(m, product_features))

    if not mask.any():  # no no-purchase slot: seed with the best feasible singleton
        best_seed = None
        for i in sorted(reals):
            cand = np.zeros(universe.n, dtype=bool)
            cand[i] = True
            if cap is not None and not cap.satisfied(cand):
                continue
            v = value(cand)
            if best_seed is None or v > best_seed[0]:
                best_seed = (v, cand)
        if best_seed is None:
            raise ValueError("no feasible singleton assortment")
        mask = best_seed[1]
    current = value(mask)
    moves = 0
    while True:
        best_gain, best_mask, removed = 0.0, None, None
        inside = [i for i in reals if mask[i]]
        outside = [i for i in reals if not mask[i]]
        for i in outside:                                   # add
            cand = mask.copy()
            cand[i] = True
            if cap is not None and not cap.satisfied(cand):
                continue
            gain = value(cand) - current
            if gain > best_gain + 1e-12:
                best_gain, best_mask, removed = gain, cand, None
        for i in inside:                                    # delete
            if removals[i] >= removal_limit:
                continue
            cand = mask.copy()
            cand[i] = False
            if not cand.any():
                continue
            gain = value(cand) - current
            if gain > best_gain + 1e-12:
                best_gain, best_mask, removed = gain, cand, i
        for i in inside:                                    # exchange
            if removals[i] >= removal_limit:
                continue
            for j in outside:
                cand = mask.copy()
                cand[i] = False
                cand[j] = True
                if cap is not None and not cap.satisfied(cand):
                    continue
                gain = value(cand) - current
                if gain > best_gain + 1e-12:
                    best_gain, best_mask, removed = gain, cand, i
        if best_mask is None:
            break
        if removed is not None:
            removals[removed] += 1
        mask = best_mask
        current += best_gain
        moves += 1
    return OptResult(mask, current, "adxopt", False, nodes=moves,
                     seconds=time.perf_counter() - start)


def mccm_bellman_opt(model: MccmModel, rev: RevenueSpec,
                     cap: Optional[CapacityConstraint] = None,
                     tol: float = 1e-10, max_iters: int = 1_000_000) -> OptResult:
    """Exact unconstrained optimum of the Markov-chain model.

    Iterates the value operator g_i <- max(mu_i, sum_j rho_ij g_j) to its
    fixed point (no-purchase pinned at zero) and offers every product whose
    immediate revenue beats its continuation value.
    """
    if cap is not None:
        raise ValueError("the Bellman method is unconstrained only; "
                         "use adxopt or the MIP for capacity constraints")
    universe = model.universe
    start = time.perf_counter()
    npi = universe.no_purchase_index
    mu = rev.mu
    g = mu.copy()
    if npi is not None:
        g[npi] = 0.0
    iters = 0
    for iters in range(max_iters):
        cont = model.rho @ g
        g_new = np.maximum(mu, cont)
        if npi is not None:
            g_new[npi] = 0.0
        if np.abs(g_new - g).max() < tol:
            g = g_new
            break
        g = g_new
    cont = model.rho @ g
    mask = mu >= cont - 1e-12
    if npi is not None:
        mask[npi] = True
    assortment = Assortment(universe, mask)
    val = expected_revenue(model, assortment, rev)
    return OptResult(mask, val, "bellman", True, nodes=iters,
                     seconds=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Gated-net MIP.
# ---------------------------------------------------------------------------

def _interval_propagate(net: NetworkParams, lo0: np.ndarray, hi0: np.ndarray):
    """Pre-activation intervals per layer for inputs in [lo0, hi0]."""
    pre_bounds = []
    lo, hi = lo0, hi0
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
        pre_lo = b + wp @ lo + wn @ hi
        pre_hi = b + wp @ hi + wn @ lo
        pre_bounds.append((pre_lo, pre_hi))
        if l < net.depth - 1:
            lo, hi = np.maximum(pre_lo, 0.0), np.maximum(pre_hi, 0.0)
    return pre_bounds


def quad_exp(x):
    """Second-order surrogate of the exponential used in the MIP objective."""
    return 1.0 + x + 0.5 * x * x


def _quad_bounds(lo: np.ndarray, hi: np.ndarray):
    """Range of quad_exp over [lo, hi]; the minimum sits at -1."""
    qlo = np.where((lo <= -1.0) & (hi >= -1.0), 0.5,
                   np.minimum(quad_exp(lo), quad_exp(hi)))
    qhi = np.maximum(quad_exp(lo), quad_exp(hi))
    return qlo, qhi


def surrogate_shift(net: NetworkParams, universe: Universe) -> float:
    """Logit offset applied before the quadratic surrogate.

    Gated-softmax probabilities are invariant to adding a constant to every
    logit, but the quadratic surrogate is not: it is decreasing below -1, so
    strongly negative logits would receive large phantom weights.  Shifting
    the propagated logit interval to start at -1 keeps the surrogate on its
    monotone branch with the best relative fit near zero.
    """
    lo0 = np.zeros(universe.n)
    hi0 = np.ones(universe.n)
    if universe.no_purchase_index is not None:
        lo0[universe.no_purchase_index] = 1.0
    final_lo, _ = _interval_propagate(net, lo0, hi0)[-1]
    return float(final_lo.min() + 1.0)


def build_nn_mip(net: NetworkParams, rev: RevenueSpec,
                 cap: Optional[CapacityConstraint] = None) -> MipInstance:
    """Big-M encoding of a trained gated net's assortment problem.

    Hidden ReLU units get the split z - z~ = pre, 0 <= z <= M+ zeta,
    0 <= z~ <= M- (1 - zeta) with per-unit constants from interval
    propagation over z0 in [0,1]^n (no-purchase pinned to 1); a unit whose
    pre-activation interval is one-sided has a zero constant on the
    impossible side, which fixes its indicator.  The final layer is affine,
    matching the forward pass.  The fractional objective over the quadratic
    exponential surrogate is stored structurally; the bilinear products of
    assortment bits and surrogate values enter through standard
    binary-times-bounded-continuous envelope rows.
    """
    if net.arch != "gasn":
        raise ValueError("the MIP encoder covers the gated architecture only")
    universe = rev.universe
    n = universe.n
    if net.input_dim != n or net.output_dim != n:
        raise ValueError("network dimensions do not match the universe")
    npi = universe.no_purchase_index
    lo0 = np.zeros(n)
    hi0 = np.ones(n)
    if npi is not None:
        lo0[npi] = 1.0
    pre_bounds = _interval_propagate(net, lo0, hi0)

    variables: list[Variable] = []
    rows: list[LinearRow] = []
    big_m = {}

    def add_var(name, kind, lb, ub):
        variables.append(Variable(name, kind, lb, ub))
        return len(variables) - 1

    z0 = [add_var(f"z0_{i}", "binary", 1.0 if i == npi else 0.0, 1.0)
          for i in range(n)]
    prev = z0
    L = net.depth
    for l in range(L - 1):
        pre_lo, pre_hi = pre_bounds[l]
        w, b = net.weights[l], net.biases[l]
        layer_vars = []
        for u in range(w.shape[0]):
            m_pos = float(max(pre_hi[u], 0.0))
            m_neg = float(max(-pre_lo[u], 0.0))
            z = add_var(f"z{l + 1}_{u}", "continuous", 0.0, m_pos)
            zt = add_var(f"zt{l + 1}_{u}", "continuous", 0.0, m_neg)
            # one-sided units have a degenerate interval: pin the indicator
            zeta_lb = 1.0 if pre_lo[u] >= 0.0 else 0.0
            zeta_ub = 0.0 if pre_hi[u] <= 0.0 else 1.0
            zeta = add_var(f"zeta{l + 1}_{u}", "binary", zeta_lb, zeta_ub)
            big_m[f"z{l + 1}_{u}"] = (m_pos, m_neg)
            coefs = [(z, 1.0), (zt, -1.0)] + [(prev[j], -float(w[u, j]))
                                              for j in range(w.shape[1]) if w[u, j] != 0.0]
            rows.append(LinearRow(coefs, "=", float(b[u]), f"relu{l + 1}_{u}"))
            rows.append(LinearRow([(z, 1.0), (zeta, -m_pos)], "<=", 0.0,
                                  f"on{l + 1}_{u}"))
            rows.append(LinearRow([(zt, 1.0), (zeta, m_neg)], "<=", m_neg,
                                  f"off{l + 1}_{u}"))
            layer_vars.append(z)
        prev = layer_vars
    final_lo, final_hi = pre_bounds[L - 1]
    w, b = net.weights[-1], net.biases[-1]
    zL = []
    for u in range(n):
        zv = add_var(f"zL_{u}", "continuous", float(final_lo[u]), float(final_hi[u]))
        coefs = [(zv, 1.0)] + [(prev[j], -float(w[u, j]))
                               for j in range(w.shape[1]) if w[u, j] != 0.0]
        rows.append(LinearRow(coefs, "=", float(b[u]), f"out_{u}"))
        zL.append(zv)
    shift = surrogate_shift(net, universe)
    qlo, qhi = _quad_bounds(final_lo - shift, final_hi - shift)
    qv, wv = [], []
    for i in range(n):
        q = add_var(f"q_{i}", "continuous", float(qlo[i]), float(qhi[i]))
        wvar = add_var(f"w_{i}", "continuous", 0.0, float(qhi[i]))
        # envelope of w = z0 * q for binary z0 and q in [qlo, qhi]
        rows.append(LinearRow([(wvar, 1.0), (z0[i], -float(qlo[i]))], ">=", 0.0,
                              f"env1_{i}"))
        rows.append(LinearRow([(wvar, 1.0), (z0[i], -float(qhi[i]))], "<=", 0.0,
                              f"env2_{i}"))
        rows.append(LinearRow([(wvar, 1.0), (q, -1.0), (z0[i], -float(qhi[i]))],
                              ">=", -float(qhi[i]), f"env3_{i}"))
        rows.append(LinearRow([(wvar, 1.0), (q, -1.0), (z0[i], -float(qlo[i]))],
                              "<=", -float(qlo[i]), f"env4_{i}"))
        qv.append(q)
        wv.append(wvar)
    if cap is not None:
        coefs = [(z0[i], float(cap.a[i])) for i in range(n) if cap.a[i] != 0.0]
        rows.append(LinearRow(coefs, "<=", float(cap.c), "capacity"))
    objective = {"type": "ratio",
                 "num": [(wv[i], float(rev.mu[i])) for i in range(n)],
                 "den": [(wv[i], 1.0) for i in range(n)]}
    meta = {"tag": "nn-gasn", "n": n, "z0": z0, "zL": zL, "q": qv, "w": wv,
            "net": net, "mu": rev.mu, "cap": cap, "universe": universe,
            "pre_bounds": pre_bounds, "q_bounds": (qlo, qhi), "shift": shift}
    return MipInstance(variables, rows, objective, big_m, meta)


def surrogate_value(net: NetworkParams, mask: np.ndarray, mu: np.ndarray,
                    shift: float = 0.0):
    """Numerator and denominator of the surrogate objective for one mask."""
    logits = _forward_batch(net, mask.astype(float)[None, :])["logits"][0]
    wgt = np.where(mask, quad_exp(logits - shift), 0.0)
    return float(mu @ wgt), float(wgt.sum())


def surrogate_ratio(net: NetworkParams, mask: np.ndarray, mu: np.ndarray,
                    shift: float = 0.0) -> float:
    num, den = surrogate_value(net, mask, mu, shift)
    return num / den


def surrogate_brute_force(net: NetworkParams, rev: RevenueSpec,
                          cap: Optional[CapacityConstraint] = None) -> OptResult:
    """Enumeration oracle for the surrogate ratio objective (test ally)."""
    universe = rev.universe
    if universe.n > BRUTE_FORCE_LIMIT:
        raise ValueError("universe too large to enumerate")
    shift = surrogate_shift(net, universe)
    best = None
    for masks in _enumerate_masks(universe):
        if cap is not None:
            masks = masks[masks @ cap.a <= cap.c + 1e-9]
            if not len(masks):
                continue
        logits = _forward_batch(net, masks.astype(float))["logits"]
        wgt = np.where(masks, quad_exp(logits - shift), 0.0)
        values = (wgt @ rev.mu) / wgt.sum(axis=1)
        best = _best_mask(masks, values, best)
    return OptResult(best[1], best[0], "surrogate-brute-force", True)


def _ro_warm_start(net: NetworkParams, rev: RevenueSpec,
                   cap: Optional[CapacityConstraint], shift: float) -> tuple:
    universe = rev.universe
    npi = universe.no_purchase_index
    reals = universe.real_products()
    order = reals[np.argsort(-rev.mu[reals], kind="stable")]
    mask = np.zeros(universe.n, dtype=bool)
    if npi is not None:
        mask[npi] = True
        best = (surrogate_ratio(net, mask, rev.mu, shift), mask.copy())
    else:
        best = None
    for i in order:
        mask[i] = True
        if cap is not None and not cap.satisfied(mask):
            break
        val = surrogate_ratio(net, mask, rev.mu, shift)
        if best is None or val > best[0] + 1e-12:
            best = (val, mask.copy())
    return best


def solve_nn_mip(mip: MipInstance, time_limit_s: float = 300.0,
                 node_limit: int = NODE_LIMIT, tol: float = 1e-9) -> OptResult:
    """Native solver for the gated-net instance.

    Dinkelbach outer loop on the ratio objective; each inner problem
    maximises sum_i (mu_i - t) z0_i q(zL_i) by depth-first branch-and-bound
    over the assortment bits, pruning with interval-propagation bounds.
    The revenue-ordered sweep seeds the incumbent; with a zero time limit
    that incumbent is returned unsolved.
    """
    if mip.meta.get("tag") != "nn-gasn":
        raise ValueError("solve_nn_mip expects an instance from build_nn_mip")
    net: NetworkParams = mip.meta["net"]
    mu: np.ndarray = mip.meta["mu"]
    cap: Optional[CapacityConstraint] = mip.meta["cap"]
    universe: Universe = mip.meta["universe"]
    n = universe.n
    npi = universe.no_purchase_index
    shift = mip.meta.get("shift", 0.0)
    start = time.perf_counter()
    deadline = start + max(time_limit_s, 0.0)
    best_ratio, best_mask = _ro_warm_start(net, RevenueSpec(mu, universe), cap, shift)
    if time_limit_s <= 0:
        return OptResult(best_mask, best_ratio, "nn-mip", False,
                         seconds=time.perf_counter() - start,
                         extra={"warm_start": True})
    reals = universe.real_products()
    order = reals[np.argsort(-mu[reals], kind="stable")]
    nodes_total = 0
    exact = True

    def inner_max(t: float):
        """Maximise g(z0) = sum (mu_i - t) z0_i q_i by DFS branch and bound."""
        nonlocal nodes_total, exact
        c = mu - t
        assign = np.full(n, -1, dtype=np.int8)
        if npi is not None:
            assign[npi] = 1
        best_g = -np.inf
        best_z = None

        def node_bound(a):
            lo = (a == 1).astype(float)
            hi = (a != 0).astype(float)
            pre = _interval_propagate_cached(net, lo, hi)
            qlo, qhi = _quad_bounds(pre[0] - shift, pre[1] - shift)
            fixed1 = a == 1
            free = a == -1
            ub = np.where(c >= 0, c * qhi, c * qlo)          # value if offered
            contrib = np.where(fixed1, ub, np.where(free, np.maximum(ub, 0.0), 0.0))
            return float(contrib.sum())

        def leaf_value(a):
            mask = a == 1
            num, den = surrogate_value(net, mask, mu, shift)
            return num - t * den, mask

        stack = [(assign, 0)]
        complete = True
        while stack:
            if nodes_total >= node_limit or time.perf_counter() > deadline:
                complete = False
                exact = False
                break
            a, depth = stack.pop()
            nodes_total += 1
            if cap is not None and float(cap.a @ (a == 1)) > cap.c + 1e-9:
                continue
            while depth < len(order) and a[order[depth]] != -1:
                depth += 1
            if depth == len(order):
                g, mask = leaf_value(a)
                if g > best_g + 1e-15:
                    best_g, best_z = g, mask
                continue
            if node_bound(a) <= best_g + tol:
                continue
            i = order[depth]
            a_on = a.copy()
            a_on[i] = 1
            a_off = a.copy()
            a_off[i] = 0
            stack.append((a_off, depth + 1))
            if cap is None or float(cap.a @ (a_on == 1)) <= cap.c + 1e-9:
                stack.append((a_on, depth + 1))   # explored first (LIFO)
        return best_g, best_z, complete

    t = best_ratio
    for _ in range(100):
        g, z, complete = inner_max(t)
        if not complete:
            if z is not None and surrogate_ratio(net, z, mu, shift) > best_ratio:
                best_ratio, best_mask = surrogate_ratio(net, z, mu, shift), z
            break
        if z is None or g <= tol * max(1.0, abs(t)):
            break
        new_ratio = surrogate_ratio(net, z, mu, shift)
        if new_ratio <= best_ratio + 1e-12:
            break
        best_ratio, best_mask = new_ratio, z
        t = new_ratio
    return OptResult(best_mask, best_ratio, "nn-mip", exact, nodes=nodes_total,
                     seconds=time.perf_counter() - start)


def _interval_propagate_cached(net: NetworkParams, lo: np.ndarray, hi: np.ndarray):
    """Final-layer pre-activation interval for box-bounded inputs."""
    bounds = _interval_propagate(net, lo, hi)
    return bounds[-1]


# ---------------------------------------------------------------------------
# Exact MILPs for the classical models.
# ---------------------------------------------------------------------------

def build_mnl_milp(model: MnlModel, rev: RevenueSpec,
                   cap: Optional[CapacityConstraint] = None) -> MipInstance:
    """Exact MILP for the MNL assortment problem.

    Uses choice-probability variables y_i tied to the offer bits x_i through
    the attraction ratios r_i = exp(u_i - u_np): offered products satisfy
    y_i = r_i y_np, unoffered ones are forced to zero, and the y's sum to
    one, which pins y_np to the MNL denominator.
    """
    universe = model.universe
    n = universe.n
    npi = universe.no_purchase_index
    if npi is None:
        npi = n - 1  # gauge product doubles as the always-offered anchor
    u = np.clip(model.u, -700.0, 700.0)
    r = np.exp(u - u[npi])
    variables: list[Variable] = []
    rows: list[LinearRow] = []

    def add_var(name, kind, lb, ub):
        variables.append(Variable(name, kind, lb, ub))
        return len(variables) - 1

    x = [add_var(f"x_{i}", "binary", 1.0 if i == npi else 0.0, 1.0) for i in range(n)]
    y = [add_var(f"y_{i}", "continuous", 0.0, 1.0) for i in range(n)]
    rows.append(LinearRow([(y[i], 1.0) for i in range(n)], "=", 1.0, "normalise"))
    for i in range(n):
        if i == npi:
            continue
        rows.append(LinearRow([(y[i], 1.0), (y[npi], -float(r[i]))], "<=", 0.0,
                              f"ratio_ub_{i}"))
        rows.append(LinearRow([(y[i], 1.0), (y[npi], -float(r[i])),
                               (x[i], -float(r[i]))], ">=", -float(r[i]),
                              f"ratio_lb_{i}"))
        rows.append(LinearRow([(y[i], 1.0), (x[i], -1.0)], "<=", 0.0, f"gate_{i}"))
    if cap is not None:
        rows.append(LinearRow([(x[i], float(cap.a[i])) for i in range(n)
                               if cap.a[i] != 0.0], "<=", float(cap.c), "capacity"))
    objective = {"type": "linear",
                 "coefs": [(y[i], float(rev.mu[i])) for i in range(n)]}
    meta = {"tag": "mnl-milp", "n": n, "x": x, "y": y, "universe": universe,
            "model": model, "mu": rev.mu, "cap": cap}
    return MipInstance(variables, rows, objective, meta=meta)


def build_np_milp(model: NpModel, rev: RevenueSpec,
                  cap: Optional[CapacityConstraint] = None,
                  max_perms: int = 50) -> MipInstance:
    """Exact MILP for the rank-list model's assortment problem.

    Per permutation j, s~_j mirrors the offer bits in rank order and eta_j
    is pushed onto the first offered rank: eta is bounded by s~ and by
    1 - s~ at every earlier rank, and the objective rewards it with the
    rank-ordered revenues.
    """
    if len(model.perms) > max_perms:
        raise ValueError(f"too many permutations ({len(model.perms)} > {max_perms})")
    universe = model.universe
    n = universe.n
    npi = universe.no_purchase_index
    variables: list[Variable] = []
    rows: list[LinearRow] = []

    def add_var(name, kind, lb, ub):
        variables.append(Variable(name, kind, lb, ub))
        return len(variables) - 1

    s = [add_var(f"s_{i}", "binary", 1.0 if i == npi else 0.0, 1.0) for i in range(n)]
    obj = []
    for j, (perm, weight) in enumerate(zip(model.perms, model.weights)):
        st = [add_var(f"st_{j}_{k}", "continuous", 0.0, 1.0) for k in range(n)]
        eta = [add_var(f"eta_{j}_{k}", "continuous", 0.0, 1.0) for k in range(n)]
        for k in range(n):
            rows.append(LinearRow([(st[k], 1.0), (s[perm[k]], -1.0)], "=", 0.0,
                                  f"pos_{j}_{k}"))
            rows.append(LinearRow([(eta[k], 1.0), (st[k], -1.0)], "<=", 0.0,
                                  f"first_{j}_{k}"))
            for kp in range(k):
                rows.append(LinearRow([(eta[k], 1.0), (st[kp], 1.0)], "<=", 1.0,
                                      f"block_{j}_{k}_{kp}"))
            obj.append((eta[k], float(weight * rev.mu[perm[k]])))
    if cap is not None:
        rows.append(LinearRow([(s[i], float(cap.a[i])) for i in range(n)
                               if cap.a[i] != 0.0], "<=", float(cap.c), "capacity"))
    meta = {"tag": "np-milp", "n": n, "s": s, "universe": universe,
            "model": model, "mu": rev.mu, "cap": cap}
    return MipInstance(variables, rows, {"type": "linear", "coefs": obj}, meta=meta)


def solve_milp(mip: MipInstance, time_limit_s: Optional[float] = None):
    """Solve a linear-objective instance with scipy's HiGHS MILP backend.

    Returns (status, x, objective_value); status 0 means proven optimal.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    if mip.objective["type"] != "linear":
        raise ValueError("solve_milp handles linear objectives; apply "
                         "Dinkelbach linearisation to ratio instances first")
    import scipy.sparse as sp

    nv = len(mip.variables)
    c = np.zeros(nv)
    for idx, coef in mip.objective["coefs"]:
        c[idx] += coef
    lb = np.array([v.lb for v in mip.variables])
    ub = np.array([v.ub for v in mip.variables])
    integrality = np.array([1 if v.kind == "binary" else 0 for v in mip.variables])
    nr = len(mip.constraints)
    data, rows_ix, cols_ix = [], [], []
    row_lb = np.full(nr, -np.inf)
    row_ub = np.full(nr, np.inf)
    for k, row in enumerate(mip.constraints):
        for idx, coef in row.coefs:
            rows_ix.append(k)
            cols_ix.append(idx)
            data.append(coef)
        if row.sense in ("<=", "="):
            row_ub[k] = row.rhs
        if row.sense in (">=", "="):
            row_lb[k] = row.rhs
    A = sp.csr_matrix((data, (rows_ix, cols_ix)), shape=(nr, nv))
    options = {}
    if time_limit_s is not None:
        options["time_limit"] = time_limit_s
    res = milp(-c, constraints=[LinearConstraint(A, row_lb, row_ub)] if nr else [],
               integrality=integrality, bounds=Bounds(lb, ub), options=options)
    x = res.x if res.x is not None else None
    value = -res.fun if res.fun is not None else np.nan
    return res.status, x, value


def mnl_milp_opt(model: MnlModel, rev: RevenueSpec,
                 cap: Optional[CapacityConstraint] = None) -> OptResult:
    start = time.perf_counter()
    mip = build_mnl_milp(model, rev, cap)
    status, x, _ = solve_milp(mip)
    if x is None:
        raise RuntimeError(f"MILP solve failed with status {status}")
    mask = np.array([x[i] > 0.5 for i in mip.meta["x"]])
    value = float(rev.mu @ model.choice_probs(mask))
    return OptResult(mask, value, "mnl-milp", status == 0,
                     seconds=time.perf_counter() - start)


def np_milp_opt(model: NpModel, rev: RevenueSpec,
                cap: Optional[CapacityConstraint] = None) -> OptResult:
    start = time.perf_counter()
    mip = build_np_milp(model, rev, cap)
    status, x, _ = solve_milp(mip)
    if x is None:
        raise RuntimeError(f"MILP solve failed with status {status}")
    mask = np.array([x[i] > 0.5 for i in mip.meta["s"]])
    value = float(rev.mu @ model.choice_probs(mask))
    return OptResult(mask, value, "np-milp", status == 0,
                     seconds=time.perf_counter() - start)


def opt_ratio(candidate: OptResult, truth_model: ChoiceModel, rev: RevenueSpec,
              cap: Optional[CapacityConstraint] = None,
              product_features: Optional[np.ndarray] = None,
              truth_optimum: Optional[OptResult] = None) -> float:
    """Revenue of the candidate under the truth, relative to the true optimum.

    ``truth_optimum`` may be supplied to amortise the enumeration across
    candidates.  A zero-revenue optimum makes the ratio undefined (nan).
    """
    if truth_optimum is None:
        truth_optimum = brute_force_opt(truth_model, rev, cap, product_features)
    denom = truth_optimum.objective
    if denom <= 0.0:
        warnings.warn("true optimal revenue is zero; optimality ratio undefined")
        return float("nan")
    value = float(rev.mu @ truth_model.choice_probs(candidate.mask, product_features))
    return value / denom


# ---------------------------------------------------------------------------
# LP-format text export / import.
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _sanitize_names(names: list) -> list:
    out = []
    seen = set()
    for name in names:
        cand = name if _NAME_RE.match(name) else "v_" + re.sub(r"[^A-Za-z0-9_]", "_", name)
        base = cand
        k = 1
        while cand in seen:
            cand = f"{base}_{k}"
            k += 1
        seen.add(cand)
        out.append(cand)
    return out


def _fmt_terms(coefs, names) -> str:
    parts = []
    for idx, coef in coefs:
        coef = float(coef)
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef)!r} {names[idx]}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(mip: MipInstance, path, t: Optional[float] = None) -> None:
    """Write the instance as LP-format text.

    A ratio objective must be linearised first by supplying the Dinkelbach
    level ``t`` (the written objective is numerator - t * denominator).
    """
    if mip.objective["type"] == "ratio":
        if t is None:
            raise ValueError("ratio objective: supply the Dinkelbach level t "
                             "to linearise before export")
        coefs: dict[int, float] = {}
        for idx, c in mip.objective["num"]:
            coefs[idx] = coefs.get(idx, 0.0) + c
        for idx, c in mip.objective["den"]:
            coefs[idx] = coefs.get(idx, 0.0) - t * c
        obj = sorted(coefs.items())
    else:
        obj = mip.objective["coefs"]
    names = _sanitize_names([v.name for v in mip.variables])
    lines = ["\\ LP export", "Maximize", f" obj: {_fmt_terms(obj, names)}",
             "Subject To"]
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for k, row in enumerate(mip.constraints):
        rname = row.name if _NAME_RE.match(row.name or "") else f"c{k}"
        lines.append(f" {rname}: {_fmt_terms(row.coefs, names)} "
                     f"{sense_txt[row.sense]} {float(row.rhs)!r}")
    lines.append("Bounds")
    for v, name in zip(mip.variables, names):
        if v.lb == -np.inf and v.ub == np.inf:
            lines.append(f" {name} free")
        else:
            lines.append(f" {float(v.lb)!r} <= {name} <= {float(v.ub)!r}")
    binaries = [name for v, name in zip(mip.variables, names) if v.kind == "binary"]
    if binaries:
        lines.append("Binary")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_lp(path) -> MipInstance:
    """Read back an LP file written by :func:`export_lp`."""
    with open(path) as fh:
        raw = [ln.rstrip() for ln in fh]
    lines = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    obj_text = ""
    con_texts = []
    bound_lines = []
    binary_names = []
    for ln in lines:
        word = ln.strip().lower()
        if word in ("maximize", "minimize", "subject to", "bounds", "binary",
                    "general", "end"):
            section = word
            continue
        if section == "maximize":
            obj_text += " " + ln.strip()
        elif section == "subject to":
            con_texts.append(ln.strip())
        elif section == "bounds":
            bound_lines.append(ln.strip())
        elif section == "binary":
            binary_names.extend(ln.split())

    var_index: dict[str, int] = {}
    variables: list[Variable] = []

    def get_var(name):
        if name not in var_index:
            var_index[name] = len(variables)
            variables.append(Variable(name, "continuous", 0.0, np.inf))
        return var_index[name]

    term_re = re.compile(r"([+-])?\s*([0-9.eE+-]+)\s+([A-Za-z_][A-Za-z0-9_]*)")

    def parse_terms(text):
        coefs = []
        for sign, num, name in term_re.findall(text):
            coef = float(num)
            if sign == "-":
                coef = -coef
            coefs.append((get_var(name), coef))
        return coefs

    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    objective = {"type": "linear", "coefs": parse_terms(obj_text)}
    constraints = []
    for text in con_texts:
        name = ""
        if ":" in text:
            name, text = text.split(":", 1)
            name = name.strip()
        m = re.search(r"(<=|>=|=)", text)
        sense = m.group(1)
        lhs, rhs = text.split(sense, 1)
        constraints.append(LinearRow(parse_terms(lhs), sense, float(rhs), name))
    for ln in bound_lines:
        if ln.endswith(" free"):
            idx = get_var(ln.split()[0])
            variables[idx].lb, variables[idx].ub = -np.inf, np.inf
            continue
        m = re.match(r"(\S+)\s*<=\s*([A-Za-z_][A-Za-z0-9_]*)\s*<=\s*(\S+)", ln)
        if m:
            idx = get_var(m.group(2))
            variables[idx].lb = float(m.group(1))
            variables[idx].ub = float(m.group(3))
    for name in binary_names:
        variables[get_var(name)].kind = "binary"
    return MipInstance(variables, constraints, objective)
