"""Shared test utilities: exhaustive assortments, finite differences,
and MIP row propagation."""

from itertools import combinations

import numpy as np

from choicekit.mip import MipInstance
from choicekit.neural import _collect_tensors


def all_assortments(universe):
    """Every valid assortment mask of a universe (no-purchase forced)."""
    reals = universe.real_products()
    npi = universe.no_purchase_index
    for r in range(len(reals) + 1):
        for combo in combinations(reals, r):
            mask = np.zeros(universe.n, dtype=bool)
            mask[list(combo)] = True
            if npi is not None:
                mask[npi] = True
            if mask.any():
                yield mask


def rel_err(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


def flatten_params(params, enc=None):
    """Enumerate every scalar parameter as (tensor key, index)."""
    tensors = _collect_tensors(params, enc)
    entries = []
    for key in sorted(tensors):
        arr = tensors[key]
        for idx in np.ndindex(arr.shape):
            entries.append((key, idx))
    return tensors, entries


def fd_gradient(loss_fn, tensors, entries, eps=1e-5):
    """Central finite differences over the enumerated parameters."""
    g = []
    for key, idx in entries:
        arr = tensors[key]
        orig = arr[idx]
        arr[idx] = orig + eps
        up = loss_fn()
        arr[idx] = orig - eps
        down = loss_fn()
        arr[idx] = orig
        g.append((up - down) / (2 * eps))
    return np.asarray(g)


def analytic_gradient_dict(params, grads, enc=None):
    out = {}
    for l in range(params.depth):
        out[f"w{l}"] = grads["weights"][l]
        out[f"b{l}"] = grads["biases"][l]
    if grads.get("out_w") is not None:
        out["out_w"] = grads["out_w"]
        out["out_b"] = grads["out_b"]
    if "encoder_product" in grads:
        for i, (gw, gb) in enumerate(grads["encoder_product"]):
            out[f"pe_w{i}"] = gw
            out[f"pe_b{i}"] = gb
        for i, (gw, gb) in enumerate(grads["encoder_customer"]):
            out[f"ce_w{i}"] = gw
            out[f"ce_b{i}"] = gb
    return out


def propagate_rows(mip: MipInstance, z0_values: np.ndarray) -> dict:
    """Solve the gated-net constraint system at fixed binaries, row by row.

    Each ReLU equality z - z~ = pre with the complementarity bounds forces
    z = max(pre, 0) (the indicator is free only when pre is exactly zero);
    output rows are plain equalities.
    """
    values = {}
    for i, idx in enumerate(mip.meta["z0"]):
        values[idx] = float(z0_values[i])
    for row in mip.constraints:
        if not (row.name.startswith("relu") or row.name.startswith("out_")):
            continue
        target = row.coefs[0][0]
        pre = row.rhs
        for idx, coef in row.coefs:
            if idx == target or mip.variables[idx].name.startswith("zt"):
                continue
            pre -= coef * values[idx]
        if row.name.startswith("relu"):
            values[target] = max(pre, 0.0)
            values[row.coefs[1][0]] = max(-pre, 0.0)
        else:
            values[target] = pre
    return values
