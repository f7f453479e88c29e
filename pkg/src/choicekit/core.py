"""Core types for discrete-choice data and the choice-model interface.

Conventions used throughout the package:

* A product universe has ``n`` options.  When a no-purchase option is
  declared it always sits at index ``n - 1`` and is present in every
  assortment.
* An assortment is a boolean mask of length ``n``.
* A choice-probability vector is a dense length-``n`` array that is exactly
  zero outside the assortment and sums to one (within 1e-9) inside it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

PROB_FLOOR = 1e-12  # floor applied inside logs; keeps degenerate predictions finite
PROB_SUM_TOL = 1e-9


class DatasetError(ValueError):
    """A dataset violates its invariants (e.g. chosen product not offered)."""


class ModelInvariantError(RuntimeError):
    """A choice model returned a vector that is not a valid gated distribution."""


@dataclass(frozen=True)
class Universe:
    """Product universe of ``n`` options, optionally with a no-purchase slot."""

    n: int
    no_purchase_index: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("universe needs at least two options")
        if self.no_purchase_index is not None and not (0 <= self.no_purchase_index < self.n):
            raise ValueError("no_purchase_index out of range")

    @staticmethod
    def with_no_purchase(n: int) -> "Universe":
        """Universe of ``n`` options where the last index is no-purchase."""
        return Universe(n=n, no_purchase_index=n - 1)

    @property
    def has_no_purchase(self) -> bool:
        return self.no_purchase_index is not None

    def real_products(self) -> np.ndarray:
        """Indices of purchasable products (everything except no-purchase)."""
        idx = np.arange(self.n)
        if self.no_purchase_index is None:
            return idx
        return idx[idx != self.no_purchase_index]


@dataclass(frozen=True)
class Assortment:
    """Offered subset of the universe, stored as a boolean mask."""

    universe: Universe
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.shape != (self.universe.n,):
            raise ValueError("mask length does not match universe")
        if not mask.any():
            raise ValueError("assortment must offer at least one option")
        npi = self.universe.no_purchase_index
        if npi is not None and not mask[npi]:
            raise ValueError("no-purchase option must be offered")

    @staticmethod
    def from_indices(universe: Universe, indices: Sequence[int]) -> "Assortment":
        mask = np.zeros(universe.n, dtype=bool)
        mask[list(indices)] = True
        if universe.no_purchase_index is not None:
            mask[universe.no_purchase_index] = True
        return Assortment(universe, mask)

    @staticmethod
    def full(universe: Universe) -> "Assortment":
        return Assortment(universe, np.ones(universe.n, dtype=bool))

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def to_string(self) -> str:
        """'0'/'1' encoding used by the transaction CSV format."""
        return "".join("1" if b else "0" for b in self.mask)


@dataclass
class ChoiceDataset:
    """Transactions ``(chosen, assortment)`` with optional feature bundles.

    ``chosen`` holds product indices, ``masks`` is an ``m x n`` boolean
    matrix, ``customer_features`` an optional ``m x d'`` matrix and
    ``product_features`` an optional static ``n x d`` matrix.
    """

    universe: Universe
    chosen: np.ndarray
    masks: np.ndarray
    customer_features: Optional[np.ndarray] = None
    product_features: Optional[np.ndarray] = None

    def __post_init__(self):
        self.chosen = np.asarray(self.chosen, dtype=np.int64).reshape(-1)
        self.masks = np.asarray(self.masks, dtype=bool)
        if self.masks.ndim != 2 or self.masks.shape != (len(self.chosen), self.universe.n):
            raise DatasetError("masks must be m x n with one row per sample")
        if self.customer_features is not None:
            self.customer_features = np.asarray(self.customer_features, dtype=float)
            if self.customer_features.ndim != 2 or len(self.customer_features) != len(self.chosen):
                raise DatasetError("customer_features must be m x d'")
        if self.product_features is not None:
            self.product_features = np.asarray(self.product_features, dtype=float)
            if self.product_features.shape[0] != self.universe.n:
                raise DatasetError("product_features must have one row per product")

    @property
    def m(self) -> int:
        return len(self.chosen)

    def __len__(self) -> int:
        return self.m

    def __iter__(self) -> Iterator[tuple]:
        for k in range(self.m):
            cf = None if self.customer_features is None else self.customer_features[k]
            yield int(self.chosen[k]), self.masks[k], cf

    def subset(self, idx: np.ndarray) -> "ChoiceDataset":
        cf = None if self.customer_features is None else self.customer_features[idx]
        return ChoiceDataset(self.universe, self.chosen[idx], self.masks[idx],
                             cf, self.product_features)

    def concat(self, other: "ChoiceDataset") -> "ChoiceDataset":
        if other.universe != self.universe:
            raise DatasetError("universes differ")
        if (self.customer_features is None) != (other.customer_features is None):
            raise DatasetError("feature presence differs")
        cf = None
        if self.customer_features is not None:
            cf = np.vstack([self.customer_features, other.customer_features])
        return ChoiceDataset(self.universe,
                             np.concatenate([self.chosen, other.chosen]),
                             np.vstack([self.masks, other.masks]),
                             cf, self.product_features)


@dataclass(frozen=True)
class RevenueSpec:
    """Per-unit revenues; the no-purchase slot earns zero."""

    mu: np.ndarray
    universe: Universe

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if mu.shape != (self.universe.n,):
            raise ValueError("revenue vector length mismatch")
        if not np.all(np.isfinite(mu)):
            raise ValueError("revenues must be finite")
        npi = self.universe.no_purchase_index
        if npi is not None and mu[npi] != 0.0:
            raise ValueError("no-purchase revenue must be zero")


@dataclass(frozen=True)
class CapacityConstraint:
    """Linear budget a^T z <= c over the assortment indicator."""

    a: np.ndarray
    c: float
    universe: Universe

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)
        if a.shape != (self.universe.n,):
            raise ValueError("coefficient vector length mismatch")
        if np.any(a < 0):
            raise ValueError("coefficients must be nonnegative")
        npi = self.universe.no_purchase_index
        if npi is not None and a[npi] != 0.0:
            raise ValueError("no-purchase coefficient must be zero")
        if self.c <= 0:
            raise ValueError("budget must be positive")

    def satisfied(self, mask: np.ndarray) -> bool:
        return float(self.a @ mask) <= self.c + 1e-9


class ChoiceModel:
    """Probability oracle P(i | S) shared by every model in the package.

    Subclasses implement :meth:`choice_probs`; vectorised models may
    override :meth:`choice_probs_batch` for speed.  Feature-based models
    consume the optional feature arguments, feature-free models ignore them.
    """

    universe: Universe

    def choice_probs(self, mask: np.ndarray,
                     product_features: Optional[np.ndarray] = None,
                     customer_features: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def choice_probs_batch(self, masks: np.ndarray,
                           product_features: Optional[np.ndarray] = None,
                           customer_features: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.zeros(masks.shape, dtype=float)
        for k in range(masks.shape[0]):
            cf = None if customer_features is None else customer_features[k]
            out[k] = self.choice_probs(masks[k], product_features, cf)
        return out


def validate_prob_vector(p: np.ndarray, mask: np.ndarray, tol: float = PROB_SUM_TOL) -> None:
    """Raise :class:`ModelInvariantError` unless ``p`` is a gated distribution."""
    p = np.asarray(p, dtype=float)
    if p.shape != mask.shape:
        raise ModelInvariantError("probability vector has wrong length")
    if np.any(p[~mask] != 0.0):
        raise ModelInvariantError("nonzero probability outside the assortment")
    if np.any(p < 0) or np.any(p > 1 + tol):
        raise ModelInvariantError("probabilities outside [0, 1]")
    s = p[mask].sum()
    if abs(s - 1.0) > tol:
        raise ModelInvariantError(f"in-assortment probabilities sum to {s!r}, not 1")


def ce_loss(model: ChoiceModel, data: ChoiceDataset, check: bool = True) -> float:
    """Average cross-entropy (negative log-likelihood) of ``model`` on ``data``.

    Probabilities are floored at ``PROB_FLOOR`` before the log so degenerate
    predictions yield a large but finite loss.
    """
    if data.m == 0:
        raise DatasetError("ce_loss needs a nonempty dataset")
    probs = model.choice_probs_batch(data.masks, data.product_features,
                                     data.customer_features)
    rows = np.arange(data.m)
    if np.any(~data.masks[rows, data.chosen]):
        bad = int(np.flatnonzero(~data.masks[rows, data.chosen])[0])
        raise DatasetError(f"sample {bad}: chosen product is not offered")
    if check:
        sums = np.where(data.masks, probs, 0.0).sum(axis=1)
        off = np.abs(np.where(data.masks, 0.0, probs)).max() if probs.size else 0.0
        if np.any(np.abs(sums - 1.0) > 1e-6) or off > 0.0:
            raise ModelInvariantError("model returned a non-normalised gated vector")
    p_chosen = np.maximum(probs[rows, data.chosen], PROB_FLOOR)
    return float(-np.log(p_chosen).mean())


def expected_revenue(model: ChoiceModel, assortment: Assortment, rev: RevenueSpec,
                     product_features: Optional[np.ndarray] = None) -> float:
    """Expected per-customer revenue of offering ``assortment``."""
    p = model.choice_probs(assortment.mask, product_features)
    return float(rev.mu @ p)


def sample_choice(model: ChoiceModel, assortment: Assortment, rng,
                  product_features: Optional[np.ndarray] = None,
                  customer_features: Optional[np.ndarray] = None) -> int:
    """Draw one choice from P(. | S); deterministic under a seeded generator."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    p = model.choice_probs(assortment.mask, product_features, customer_features)
    return int(rng.choice(assortment.universe.n, p=p / p.sum()))


def validate_dataset(data: ChoiceDataset) -> list[str]:
    """Collect invariant violations; an empty list means the dataset is valid.

    Validation never raises: each violation names the offending sample and
    the broken rule.
    """
    violations: list[str] = []
    n = data.universe.n
    npi = data.universe.no_purchase_index
    d_cf = None if data.customer_features is None else data.customer_features.shape[1]
    for k in range(data.m):
        chosen = int(data.chosen[k])
        if not (0 <= chosen < n):
            violations.append(f"sample {k}: chosen index {chosen} out of range")
            continue
        if not data.masks[k, chosen]:
            violations.append(f"sample {k}: chosen product {chosen} not in assortment")
        if not data.masks[k].any():
            violations.append(f"sample {k}: empty assortment")
        if npi is not None and not data.masks[k, npi]:
            violations.append(f"sample {k}: no-purchase bit unset")
        if d_cf is not None and not np.all(np.isfinite(data.customer_features[k])):
            violations.append(f"sample {k}: non-finite customer features")
    if data.product_features is not None and not np.all(np.isfinite(data.product_features)):
        violations.append("product features contain non-finite values")
    return violations


# ---------------------------------------------------------------------------
# CSV interchange.  Transaction files use the fixed header
# ``chosen,assortment[,cf_0..cf_{d'-1}]`` with the assortment encoded as a
# length-n '0'/'1' string; product-feature files use ``product,pf_0..pf_{d-1}``.
# ---------------------------------------------------------------------------

def write_transactions_csv(path, data: ChoiceDataset) -> None:
    d_cf = 0 if data.customer_features is None else data.customer_features.shape[1]
    header = ["chosen", "assortment"] + [f"cf_{j}" for j in range(d_cf)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(data.m):
            row = [int(data.chosen[k]),
                   "".join("1" if b else "0" for b in data.masks[k])]
            if d_cf:
                row += [repr(float(v)) for v in data.customer_features[k]]
            writer.writerow(row)


def read_transactions_csv(path, universe: Optional[Universe] = None,
                          product_features: Optional[np.ndarray] = None) -> ChoiceDataset:
    """Parse a transaction CSV; malformed rows raise with the line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file")
        if header[:2] != ["chosen", "assortment"]:
            raise DatasetError(f"{path}: line 1: expected header 'chosen,assortment,...'")
        d_cf = len(header) - 2
        chosen, masks, feats = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                chosen.append(int(row[0]))
                masks.append([c == "1" for c in row[1]])
                if d_cf:
                    feats.append([float(v) for v in row[2:2 + d_cf]])
            except (ValueError, IndexError) as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
    if not chosen:
        raise DatasetError(f"{path}: no samples")
    masks_arr = np.asarray(masks, dtype=bool)
    if universe is None:
        universe = Universe.with_no_purchase(masks_arr.shape[1])
    cf = np.asarray(feats, dtype=float) if d_cf else None
    return ChoiceDataset(universe, np.asarray(chosen), masks_arr, cf, product_features)


def write_product_features_csv(path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["product"] + [f"pf_{j}" for j in range(features.shape[1])])
        for i, row in enumerate(features):
            writer.writerow([i] + [repr(float(v)) for v in row])


def read_product_features_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "product":
            raise DatasetError(f"{path}: expected header 'product,pf_0,...'")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows[int(row[0])] = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc}") from exc
    n = max(rows) + 1
    return np.asarray([rows[i] for i in range(n)], dtype=float)
