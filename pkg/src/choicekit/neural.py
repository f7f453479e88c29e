"""Gated and residual assortment networks with hand-derived backpropagation.

Both architectures map an input vector (the assortment mask, or latent
utilities in the feature-based variants) to logits that a gated softmax
turns into choice probabilities: offered products share a softmax, everything
else is exactly zero.

Layer conventions: in the gated net, hidden layers are ReLU and the final
layer is affine, so a one-layer zero-weight net with bias ``u`` is exactly an
MNL with utilities ``u``.  Residual blocks compute ``relu(W z + b) + z``;
a trailing affine layer is added only when the block width differs from the
number of products (the feature-based concat case).  The ReLU subgradient at
zero is taken to be zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ChoiceDataset, ChoiceModel, Universe
from .synthetic import masked_softmax


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


@dataclass
class NetworkParams:
    """Weights of a gated ('gasn') or residual ('rasn') assortment net."""

    arch: str
    weights: list
    biases: list
    out_w: Optional[np.ndarray] = None   # trailing affine, rasn feature variant only
    out_b: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.arch not in ("gasn", "rasn"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != len(b):
                raise ValueError("weight/bias shape mismatch")
        if self.arch == "rasn":
            for w in self.weights:
                if w.shape[0] != w.shape[1]:
                    raise ValueError("residual blocks need square weights")
        else:
            for w_prev, w in zip(self.weights, self.weights[1:]):
                if w.shape[1] != w_prev.shape[0]:
                    raise ValueError("consecutive layer dims inconsistent")
        if self.out_w is not None:
            self.out_w = np.asarray(self.out_w, dtype=float)
            self.out_b = np.asarray(self.out_b, dtype=float)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        if self.weights:
            return self.weights[0].shape[1]
        return self.out_w.shape[1] if self.out_w is not None else 0

    @property
    def output_dim(self) -> int:
        if self.out_w is not None:
            return self.out_w.shape[0]
        if self.weights:
            return self.weights[-1].shape[0]
        return self.input_dim

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases],
                             None if self.out_w is None else self.out_w.copy(),
                             None if self.out_b is None else self.out_b.copy())


@dataclass
class FeatureEncoderParams:
    """Shared product encoder and customer encoder producing latent utilities.

    Product features (d) and customer features (d') are encoded to a common
    latent dimension h; the inner product of the two codes is the latent
    utility of a product for a customer.
    """

    product_layers: list   # [(W, b), ...] mapping d -> ... -> h
    customer_layers: list  # [(W, b), ...] mapping d' -> ... -> h

    def __post_init__(self):
        self.product_layers = [(np.asarray(w, float), np.asarray(b, float))
                               for w, b in self.product_layers]
        self.customer_layers = [(np.asarray(w, float), np.asarray(b, float))
                                for w, b in self.customer_layers]
        if self.product_layers and self.customer_layers:
            if self.product_layers[-1][0].shape[0] != self.customer_layers[-1][0].shape[0]:
                raise ValueError("product and customer latent dimensions differ")

    @property
    def h(self) -> int:
        return self.product_layers[-1][0].shape[0]

    def copy(self) -> "FeatureEncoderParams":
        return FeatureEncoderParams(
            [(w.copy(), b.copy()) for w, b in self.product_layers],
            [(w.copy(), b.copy()) for w, b in self.customer_layers])


def _glorot(rng, n_out: int, n_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def init_params(arch: str, n: int, L: int = 1, hidden: Optional[list] = None,
                input_dim: Optional[int] = None, rng=None) -> NetworkParams:
    """Fresh network: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    d_in = n if input_dim is None else input_dim
    if arch == "gasn":
        dims = [d_in] + list(hidden or [n] * (L - 1)) + [n]
        if len(dims) != L + 1:
            raise ValueError("hidden widths inconsistent with depth")
        weights = [_glorot(rng, dims[l + 1], dims[l]) for l in range(L)]
        biases = [np.zeros(dims[l + 1]) for l in range(L)]
        return NetworkParams("gasn", weights, biases)
    weights = [_glorot(rng, d_in, d_in) for _ in range(L)]
    biases = [np.zeros(d_in) for _ in range(L)]
    out_w = out_b = None
    if d_in != n:
        out_w = _glorot(rng, n, d_in)
        out_b = np.zeros(n)
    return NetworkParams("rasn", weights, biases, out_w, out_b)


def init_encoder(d: int, d_customer: int = 1, h: int = 1,
                 product_hidden: tuple = (), customer_hidden: tuple = (),
                 rng=None) -> FeatureEncoderParams:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng

    def build(d_in, hidden_dims):
        dims = [d_in] + list(hidden_dims) + [h]
        return [(_glorot(rng, dims[i + 1], dims[i]), np.zeros(dims[i + 1]))
                for i in range(len(dims) - 1)]

    return FeatureEncoderParams(build(d, product_hidden), build(d_customer, customer_hidden))


# ---------------------------------------------------------------------------
# Forward / backward.  All internals are batch-first (B x dim); the public
# single-sample ops wrap a batch of one.
# ---------------------------------------------------------------------------

def _forward_batch(params: NetworkParams, z0: np.ndarray) -> dict:
    """Run the net on a batch; returns activations needed for backprop."""
    acts = {"post": [z0], "pre": []}
    a = z0
    if params.arch == "gasn":
        for l, (w, b) in enumerate(zip(params.weights, params.biases)):
            pre = a @ w.T + b
            acts["pre"].append(pre)
            a = np.maximum(pre, 0.0) if l < params.depth - 1 else pre
            acts["post"].append(a)
    else:
        for w, b in zip(params.weights, params.biases):
            pre = a @ w.T + b
            acts["pre"].append(pre)
            a = np.maximum(pre, 0.0) + a
            acts["post"].append(a)
        if params.out_w is not None:
            a = a @ params.out_w.T + params.out_b
            acts["post"].append(a)
    acts["logits"] = a
    return acts


def _backward_batch(params: NetworkParams, acts: dict, dlogits: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(logits); also returns dZ0."""
    gw = [np.zeros_like(w) for w in params.weights]
    gb = [np.zeros_like(b) for b in params.biases]
    g_out_w = g_out_b = None
    d = dlogits
    if params.arch == "gasn":
        for l in range(params.depth - 1, -1, -1):
            if l < params.depth - 1:
                d = d * (acts["pre"][l] > 0)
            gw[l] = d.T @ acts["post"][l]
            gb[l] = d.sum(axis=0)
            d = d @ params.weights[l]
    else:
        if params.out_w is not None:
            g_out_w = d.T @ acts["post"][params.depth]
            g_out_b = d.sum(axis=0)
            d = d @ params.out_w
        for l in range(params.depth - 1, -1, -1):
            dp = d * (acts["pre"][l] > 0)
            gw[l] = dp.T @ acts["post"][l]
            gb[l] = dp.sum(axis=0)
            d = dp @ params.weights[l] + d
    return {"weights": gw, "biases": gb, "out_w": g_out_w, "out_b": g_out_b, "z0": d}


def gated_probs(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    return masked_softmax(logits, masks)


def forward_gasn(params: NetworkParams, mask: np.ndarray):
    """Gated net forward on one assortment; returns (probs, activations)."""
    if params.arch != "gasn":
        raise ValueError("forward_gasn needs a gasn parameter set")
    mask = np.asarray(mask, dtype=bool)
    acts = _forward_batch(params, mask.astype(float)[None, :])
    probs = gated_probs(acts["logits"], mask[None, :])[0]
    return probs, acts


def forward_rasn(params: NetworkParams, mask: np.ndarray):
    """Residual net forward on one assortment; returns (probs, activations)."""
    if params.arch != "rasn":
        raise ValueError("forward_rasn needs a rasn parameter set")
    mask = np.asarray(mask, dtype=bool)
    acts = _forward_batch(params, mask.astype(float)[None, :])
    probs = gated_probs(acts["logits"], mask[None, :])[0]
    return probs, acts


def forward_net(params: NetworkParams, mask: np.ndarray):
    return forward_gasn(params, mask) if params.arch == "gasn" else forward_rasn(params, mask)


def backward(params: NetworkParams, mask: np.ndarray, chosen: int):
    """Exact gradient of -log P(chosen | S) with respect to every parameter."""
    mask = np.asarray(mask, dtype=bool)
    if not mask[chosen]:
        raise ValueError("chosen product is not offered")
    acts = _forward_batch(params, mask.astype(float)[None, :])
    probs = gated_probs(acts["logits"], mask[None, :])
    d = probs.copy()
    d[0, chosen] -= 1.0
    d[0, ~mask] = 0.0
    return _backward_batch(params, acts, d)


# -- feature-based variants --------------------------------------------------

def _encode_stack(layers: list, x: np.ndarray):
    """MLP with ReLU between layers, affine last; caches for backprop."""
    acts = {"post": [x], "pre": []}
    a = x
    for i, (w, b) in enumerate(layers):
        pre = a @ w.T + b
        acts["pre"].append(pre)
        a = np.maximum(pre, 0.0) if i < len(layers) - 1 else pre
        acts["post"].append(a)
    return a, acts


def _encode_backward(layers: list, acts: dict, d_out: np.ndarray):
    grads = [None] * len(layers)
    d = d_out
    for i in range(len(layers) - 1, -1, -1):
        if i < len(layers) - 1:
            d = d * (acts["pre"][i] > 0)
        grads[i] = (d.T @ acts["post"][i], d.sum(axis=0))
        d = d @ layers[i][0]
    return grads, d


def compute_latent(enc: FeatureEncoderParams, masks: np.ndarray,
                   product_features: np.ndarray,
                   customer_features: Optional[np.ndarray]):
    """Latent utility of every product for every sample in the batch.

    Feature rows of unoffered products are zeroed before encoding, and a
    missing customer feature bundle is treated as the constant 1.
    """
    masks = np.asarray(masks, dtype=bool)
    B, n = masks.shape
    d = product_features.shape[1]
    pf = np.where(masks[:, :, None], product_features[None, :, :], 0.0)
    flat = pf.reshape(B * n, d)
    codes_p, acts_p = _encode_stack(enc.product_layers, flat)
    h = codes_p.shape[1]
    codes_p = codes_p.reshape(B, n, h)
    cf = customer_features if customer_features is not None else np.ones((B, 1))
    codes_c, acts_c = _encode_stack(enc.customer_layers, cf)
    latent = np.einsum("bnh,bh->bn", codes_p, codes_c)
    cache = {"acts_p": acts_p, "acts_c": acts_c, "codes_p": codes_p,
             "codes_c": codes_c, "pf": pf, "B": B, "n": n}
    return latent, cache


def _latent_backward(enc: FeatureEncoderParams, cache: dict, d_latent: np.ndarray):
    B, n = cache["B"], cache["n"]
    d_codes_p = np.einsum("bn,bh->bnh", d_latent, cache["codes_c"])
    d_codes_c = np.einsum("bn,bnh->bh", d_latent, cache["codes_p"])
    grads_p, _ = _encode_backward(enc.product_layers, cache["acts_p"],
                                  d_codes_p.reshape(B * n, -1))
    grads_c, _ = _encode_backward(enc.customer_layers, cache["acts_c"], d_codes_c)
    return grads_p, grads_c


def net_input_from_latent(arch: str, latent: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Gated nets read the latent utilities; residual nets also concat the mask."""
    if arch == "gasn":
        return latent
    return np.concatenate([latent, masks.astype(float)], axis=1)


def forward_feature(params: NetworkParams, enc: FeatureEncoderParams,
                    mask: np.ndarray, product_features: np.ndarray,
                    customer_features: Optional[np.ndarray] = None):
    """Feature-based forward pass for one sample; returns (probs, detail).

    ``detail`` carries the latent utilities and final logits, which the
    assortment-effect diagnostic reads.
    """
    mask = np.asarray(mask, dtype=bool)
    cf = None if customer_features is None else np.asarray(customer_features, float)[None, :]
    latent, cache = compute_latent(enc, mask[None, :], product_features, cf)
    z0 = net_input_from_latent(params.arch, latent, mask[None, :])
    acts = _forward_batch(params, z0)
    probs = gated_probs(acts["logits"], mask[None, :])[0]
    return probs, {"latent": latent[0], "logits": acts["logits"][0],
                   "acts": acts, "cache": cache}


def backward_feature(params: NetworkParams, enc: FeatureEncoderParams,
                     mask: np.ndarray, chosen: int, product_features: np.ndarray,
                     customer_features: Optional[np.ndarray] = None):
    """Gradient of -log P(chosen | S) through the net and both encoders."""
    mask = np.asarray(mask, dtype=bool)
    probs, detail = forward_feature(params, enc, mask, product_features,
                                    customer_features)
    d = detail["acts"]["logits"] * 0.0
    d[0] = probs
    d[0, chosen] -= 1.0
    d[0, ~mask] = 0.0
    net_grads = _backward_batch(params, detail["acts"], d)
    n = mask.shape[0]
    d_latent = net_grads["z0"][:, :n]
    grads_p, grads_c = _latent_backward(enc, detail["cache"], d_latent)
    net_grads["encoder_product"] = grads_p
    net_grads["encoder_customer"] = grads_c
    return net_grads


class NeuralChoiceModel(ChoiceModel):
    """Uniform-interface adapter over trained network parameters."""

    def __init__(self, universe: Universe, params: NetworkParams,
                 enc: Optional[FeatureEncoderParams] = None):
        self.universe = universe
        self.params = params
        self.enc = enc

    def choice_probs(self, mask, product_features=None, customer_features=None):
        return self.choice_probs_batch(
            np.asarray(mask, dtype=bool)[None, :], product_features,
            None if customer_features is None else np.asarray(customer_features)[None, :])[0]

    def choice_probs_batch(self, masks, product_features=None, customer_features=None):
        masks = np.asarray(masks, dtype=bool)
        if self.enc is None:
            z0 = masks.astype(float)
        else:
            latent, _ = compute_latent(self.enc, masks, product_features, customer_features)
            z0 = net_input_from_latent(self.params.arch, latent, masks)
        logits = _forward_batch(self.params, z0)["logits"]
        return gated_probs(logits, masks)


# ---------------------------------------------------------------------------
# Training: mini-batch Adam with per-epoch validation snapshots.
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch_size: int = 100
    lr: float = 0.0005
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    w_bound: Optional[float] = None   # Linf (max row abs-sum) projection bound
    b_bound: Optional[float] = None
    log_every: int = 1

    def __post_init__(self):
        if self.batch_size <= 0 or self.lr <= 0 or self.epochs < 0:
            raise ValueError("hyperparameters must be positive")


@dataclass
class TrainResult:
    params: NetworkParams
    enc: Optional[FeatureEncoderParams]
    log: list
    best_epoch: int
    final_params: NetworkParams = None
    final_enc: Optional[FeatureEncoderParams] = None


class _Adam:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, tensors: dict, grads: dict):
        self.t += 1
        c = self.cfg
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for key, g in grads.items():
            x = tensors[key]
            m = self.m.setdefault(key, np.zeros_like(x))
            v = self.v.setdefault(key, np.zeros_like(x))
            m += (1 - c.beta1) * (g - m)
            v += (1 - c.beta2) * (g * g - v)
            x -= c.lr * (m / corr1) / (np.sqrt(v / corr2) + c.eps)


def _collect_tensors(params: NetworkParams, enc: Optional[FeatureEncoderParams]) -> dict:
    t = {}
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        t[f"w{l}"] = w
        t[f"b{l}"] = b
    if params.out_w is not None:
        t["out_w"] = params.out_w
        t["out_b"] = params.out_b
    if enc is not None:
        for i, (w, b) in enumerate(enc.product_layers):
            t[f"pe_w{i}"] = w
            t[f"pe_b{i}"] = b
        for i, (w, b) in enumerate(enc.customer_layers):
            t[f"ce_w{i}"] = w
            t[f"ce_b{i}"] = b
    return t


def _grads_as_dict(params: NetworkParams, net_grads: dict) -> dict:
    g = {}
    for l in range(params.depth):
        g[f"w{l}"] = net_grads["weights"][l]
        g[f"b{l}"] = net_grads["biases"][l]
    if net_grads.get("out_w") is not None:
        g["out_w"] = net_grads["out_w"]
        g["out_b"] = net_grads["out_b"]
    if "encoder_product" in net_grads:
        for i, (gw, gb) in enumerate(net_grads["encoder_product"]):
            g[f"pe_w{i}"] = gw
            g[f"pe_b{i}"] = gb
        for i, (gw, gb) in enumerate(net_grads["encoder_customer"]):
            g[f"ce_w{i}"] = gw
            g[f"ce_b{i}"] = gb
    return g


def project_norms(params: NetworkParams, enc: Optional[FeatureEncoderParams],
                  w_bound: Optional[float], b_bound: Optional[float]) -> None:
    """Scale rows / clip biases so the Linf norms respect the bounds exactly."""
    mats = list(params.weights) + ([params.out_w] if params.out_w is not None else [])
    if enc is not None:
        mats += [w for w, _ in enc.product_layers] + [w for w, _ in enc.customer_layers]
    vecs = list(params.biases) + ([params.out_b] if params.out_b is not None else [])
    if enc is not None:
        vecs += [b for _, b in enc.product_layers] + [b for _, b in enc.customer_layers]
    if w_bound is not None:
        for w in mats:
            rows = np.abs(w).sum(axis=1)
            scale = np.where(rows > w_bound, w_bound / np.maximum(rows, 1e-300), 1.0)
            w *= scale[:, None]
    if b_bound is not None:
        for b in vecs:
            np.clip(b, -b_bound, b_bound, out=b)


def dataset_ce(params: NetworkParams, enc: Optional[FeatureEncoderParams],
               data: ChoiceDataset, batch: int = 8192) -> float:
    """Cross-entropy of the network on a dataset, evaluated in batches."""
    total = 0.0
    for lo in range(0, data.m, batch):
        hi = min(lo + batch, data.m)
        masks = data.masks[lo:hi]
        if enc is None:
            z0 = masks.astype(float)
        else:
            cf = None if data.customer_features is None else data.customer_features[lo:hi]
            latent, _ = compute_latent(enc, masks, data.product_features, cf)
            z0 = net_input_from_latent(params.arch, latent, masks)
        logits = _forward_batch(params, z0)["logits"]
        probs = gated_probs(logits, masks)
        rows = np.arange(hi - lo)
        total += -np.log(np.maximum(probs[rows, data.chosen[lo:hi]], 1e-12)).sum()
    return total / data.m


def train(arch: str, data: ChoiceDataset, cfg: TrainConfig,
          val_data: Optional[ChoiceDataset] = None, L: int = 1,
          hidden: Optional[list] = None, use_features: bool = False,
          h: int = 1, product_hidden: tuple = (), customer_hidden: tuple = (),
          init: Optional[NetworkParams] = None,
          init_enc: Optional[FeatureEncoderParams] = None) -> TrainResult:
    """Mini-batch Adam training of an assortment net.

    Deterministic under ``cfg.seed`` (initialisation and batch order).
    Returns the best-validation snapshot when validation data is supplied,
    the final parameters otherwise; the per-epoch train/validation CE log
    always covers the full run.  NaN loss aborts with the partial log.
    """
    if data.m == 0:
        raise ValueError("cannot train on an empty dataset")
    n = data.universe.n
    rng = np.random.default_rng(cfg.seed)
    enc = None
    if use_features:
        if data.product_features is None:
            raise ValueError("feature-based training needs product features")
        d = data.product_features.shape[1]
        d_cust = 1 if data.customer_features is None else data.customer_features.shape[1]
        enc = init_enc.copy() if init_enc is not None else init_encoder(
            d, d_cust, h, product_hidden, customer_hidden, rng)
        input_dim = n if arch == "gasn" else 2 * n
    else:
        input_dim = n
    params = init.copy() if init is not None else init_params(
        arch, n, L, hidden, input_dim if use_features or arch == "rasn" else None, rng)
    tensors = _collect_tensors(params, enc)
    adam = _Adam(cfg)
    log = []
    best = (np.inf, params.copy(), None if enc is None else enc.copy(), 0)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(data.m)
        epoch_loss = 0.0
        for lo in range(0, data.m, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            masks = data.masks[idx]
            chosen = data.chosen[idx]
            B = len(idx)
            if enc is None:
                z0 = masks.astype(float)
                cache = None
            else:
                cf = None if data.customer_features is None else data.customer_features[idx]
                latent, cache = compute_latent(enc, masks, data.product_features, cf)
                z0 = net_input_from_latent(arch, latent, masks)
            acts = _forward_batch(params, z0)
            probs = gated_probs(acts["logits"], masks)
            rows = np.arange(B)
            loss = -np.log(np.maximum(probs[rows, chosen], 1e-12)).mean()
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss diverged at epoch {epoch}", log)
            epoch_loss += loss * B
            d = probs.copy()
            d[rows, chosen] -= 1.0
            d[~masks] = 0.0
            d /= B
            net_grads = _backward_batch(params, acts, d)
            if enc is not None:
                d_latent = net_grads["z0"][:, :n]
                grads_p, grads_c = _latent_backward(enc, cache, d_latent)
                net_grads["encoder_product"] = grads_p
                net_grads["encoder_customer"] = grads_c
            adam.step(tensors, _grads_as_dict(params, net_grads))
            if cfg.w_bound is not None or cfg.b_bound is not None:
                project_norms(params, enc, cfg.w_bound, cfg.b_bound)
        record = {"epoch": epoch, "train_ce": epoch_loss / data.m}
        if val_data is not None:
            record["val_ce"] = dataset_ce(params, enc, val_data)
            if record["val_ce"] < best[0]:
                best = (record["val_ce"], params.copy(),
                        None if enc is None else enc.copy(), epoch)
        log.append(record)
    final_params, final_enc = params, enc
    if val_data is not None and best[1] is not None and np.isfinite(best[0]):
        params, enc, best_epoch = best[1], best[2], best[3]
    else:
        best_epoch = cfg.epochs
    return TrainResult(params, enc, log, best_epoch, final_params, final_enc)


# ---------------------------------------------------------------------------
# Warm start: grow a trained net to a larger universe.
# ---------------------------------------------------------------------------

def warm_start_augment(old: NetworkParams, n_new: int, seed=0,
                       scheme: str = "standard", n_old: Optional[int] = None) -> NetworkParams:
    """Enlarge a net from ``n_old`` to ``n_new`` options, keeping old weights.

    Every weight axis whose size equals the old universe size is remapped:
    old products keep their indices and the no-purchase slot moves to the new
    last position.  Fresh entries follow the standard initialisation
    (``scheme='zero'`` zeroes them instead, which preserves the old net's
    behaviour on assortments that exclude the new products).
    """
    n_old = old.output_dim if n_old is None else n_old
    if n_new <= n_old:
        raise ValueError("warm start only supports growing the universe")
    rng = np.random.default_rng(seed)
    idx_map = np.arange(n_old)
    idx_map[n_old - 1] = n_new - 1  # no-purchase moves to the new end

    def grow(mat: np.ndarray) -> np.ndarray:
        shape = tuple(n_new if s == n_old else s for s in mat.shape)
        if scheme == "zero":
            out = np.zeros(shape)
        elif mat.ndim == 2:
            out = _glorot(rng, *shape)
        else:
            out = np.zeros(shape)
        if mat.ndim == 1:
            src = idx_map if mat.shape[0] == n_old else np.arange(mat.shape[0])
            out[src] = mat
        else:
            rows = idx_map if mat.shape[0] == n_old else np.arange(mat.shape[0])
            cols = idx_map if mat.shape[1] == n_old else np.arange(mat.shape[1])
            out[np.ix_(rows, cols)] = mat
        return out

    return NetworkParams(old.arch, [grow(w) for w in old.weights],
                         [grow(b) for b in old.biases],
                         None if old.out_w is None else grow(old.out_w),
                         None if old.out_b is None else grow(old.out_b))


def generalization_bound(w_bound: float, b_bound: float, L: int, n: int, m: int,
                         delta: Optional[float] = None,
                         risk_bound: Optional[float] = None) -> float:
    """Excess-risk budget of the norm-bounded gated net family.

    Evaluates (4n/sqrt(m)) * (b_bound * g + (2 w_bound)^L * sqrt(2 log 2n))
    with g the geometric series sum_{k<L} (2 w_bound)^k, plus the
    5 C sqrt(2 log(8/delta)/m) confidence term when a risk bound C is given.
    """
    if m <= 0 or n <= 0 or L < 0:
        raise ValueError("inputs must be positive")
    two_w = 2.0 * w_bound
    if abs(two_w - 1.0) < 1e-12:
        geo = float(L)
    else:
        geo = (two_w ** L - 1.0) / (two_w - 1.0)
    val = (4.0 * n / np.sqrt(m)) * (b_bound * geo + two_w ** L * np.sqrt(2.0 * np.log(2 * n)))
    if risk_bound is not None:
        if delta is None or not (0 < delta < 1):
            raise ValueError("confidence term needs delta in (0, 1)")
        val += 5.0 * risk_bound * np.sqrt(2.0 * np.log(8.0 / delta) / m)
    return float(val)


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------

def network_to_dict(params: NetworkParams,
                    enc: Optional[FeatureEncoderParams] = None) -> dict:
    doc = {"arch": params.arch,
           "weights": [w.tolist() for w in params.weights],
           "biases": [b.tolist() for b in params.biases]}
    if params.out_w is not None:
        doc["out_w"] = params.out_w.tolist()
        doc["out_b"] = params.out_b.tolist()
    if enc is not None:
        doc["encoder"] = {
            "product_layers": [[w.tolist(), b.tolist()] for w, b in enc.product_layers],
            "customer_layers": [[w.tolist(), b.tolist()] for w, b in enc.customer_layers]}
    return doc


def network_from_dict(doc: dict):
    params = NetworkParams(doc["arch"],
                           [np.asarray(w) for w in doc["weights"]],
                           [np.asarray(b) for b in doc["biases"]],
                           np.asarray(doc["out_w"]) if "out_w" in doc else None,
                           np.asarray(doc["out_b"]) if "out_b" in doc else None)
    enc = None
    if "encoder" in doc:
        e = doc["encoder"]
        enc = FeatureEncoderParams(
            [(np.asarray(w), np.asarray(b)) for w, b in e["product_layers"]],
            [(np.asarray(w), np.asarray(b)) for w, b in e["customer_layers"]])
    return params, enc


def save_network(path, params: NetworkParams,
                 enc: Optional[FeatureEncoderParams] = None) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(params, enc), fh)


def load_network(path):
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def write_training_log(path, log: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_ce", "val_ce"])
        for rec in log:
            writer.writerow([rec["epoch"], repr(rec["train_ce"]),
                             repr(rec.get("val_ce", ""))])
