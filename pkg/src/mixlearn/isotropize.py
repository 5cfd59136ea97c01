"""Reduction to the isotropic regime: estimate the mean distribution, drop
rare items, split heavy items into near-uniform copies, map snapshots into
the refined domain, and pull learned constituents back to the original one.

An item i with estimated mass rt_i below 2*sigma/n is eliminated; every kept
item is split into floor(n * rt_i / sigma) copies of equal mass.  Snapshots
containing an eliminated item are discarded; surviving items are relabeled to
a uniformly random copy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import InputError, MixtureSource
from .sampling import RngStream, SnapshotBatch

__all__ = [
    "ItemMap",
    "estimate_r",
    "build_refinement",
    "map_snapshot",
    "map_batch",
    "pull_back",
    "refine_source",
    "default_sigma",
]


def default_sigma(eps, zeta, k, w_min):
    """Split granularity eps*zeta^2/(32*k*w_min); override via config."""
    return eps * zeta**2 / (32.0 * k * w_min)


@dataclass(frozen=True)
class ItemMap:
    """Refinement plan: which items are eliminated, how kept ones split."""

    sigma: float
    splits: np.ndarray  # per-item copy count, 0 for eliminated items
    offsets: np.ndarray  # item -> start of its contiguous copy range

    def __post_init__(self):
        splits = np.asarray(self.splits, dtype=np.int64)
        offsets = np.asarray(self.offsets, dtype=np.int64)
        splits.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "offsets", offsets)

    @property
    def n(self):
        return self.splits.size

    @property
    def nprime(self):
        return int(self.splits.sum())

    @property
    def eliminated(self):
        return self.splits == 0

    def copy_owner(self):
        """Length-nprime array mapping each copy back to its original item."""
        return np.repeat(np.arange(self.n), self.splits)

    def to_json(self):
        return json.dumps(
            {
                "sigma": self.sigma,
                "splits": self.splits.tolist(),
                "nprime": self.nprime,
            }
        )


def estimate_r(batch: SnapshotBatch, n: int):
    """Empirical item frequencies from a 1-snapshot batch."""
    if batch.aperture != 1:
        raise InputError("estimate_r expects aperture-1 snapshots")
    if len(batch) == 0:
        raise InputError("estimate_r needs a nonempty batch")
    counts = np.bincount(batch.rows.ravel(), minlength=n)
    if counts.size > n:
        raise InputError("snapshot items exceed the stated domain size")
    return counts / len(batch)


def build_refinement(rtilde, sigma) -> ItemMap:
    """Eliminate rare items and split the rest per the floor formula."""
    rtilde = np.asarray(rtilde, dtype=float)
    n = rtilde.size
    if not 0.0 < sigma < 1.0:
        raise InputError("sigma must lie in (0, 1)")
    keep = rtilde >= 2.0 * sigma / n
    splits = np.where(keep, np.floor(n * rtilde / sigma).astype(np.int64), 0)
    if splits.sum() == 0:
        raise InputError("all items eliminated; sigma too large for this source")
    offsets = np.concatenate([[0], np.cumsum(splits)[:-1]])
    return ItemMap(sigma=float(sigma), splits=splits, offsets=offsets)


def map_snapshot(item_map: ItemMap, row, rng: RngStream):
    """Map one snapshot into the refined domain; None if it hits an eliminated item."""
    row = np.asarray(row, dtype=np.int64)
    splits = item_map.splits[row]
    if np.any(splits == 0):
        return None
    gen = rng.generator()
    return item_map.offsets[row] + gen.integers(0, splits)


def map_batch(item_map: ItemMap, batch: SnapshotBatch, rng: RngStream) -> SnapshotBatch:
    """Vectorized map_snapshot over a batch, dropping non-surviving rows."""
    rows = batch.rows
    if rows.size == 0:
        return SnapshotBatch(aperture=batch.aperture, rows=rows, n=item_map.nprime)
    splits = item_map.splits[rows]
    alive = ~np.any(splits == 0, axis=1)
    kept = rows[alive]
    gen = rng.generator()
    mapped = item_map.offsets[kept] + gen.integers(0, item_map.splits[kept])
    return SnapshotBatch(aperture=batch.aperture, rows=mapped, n=item_map.nprime)


def pull_back(item_map: ItemMap, learned: MixtureSource) -> MixtureSource:
    """Aggregate copy probabilities per original item and renormalize.

    Eliminated items get probability 0; each constituent is renormalized so
    the output is a valid mixture source (the lost mass is within the 4*sigma
    transport budget of the reduction).
    """
    if learned.n != item_map.nprime:
        raise InputError("learned source domain does not match the item map")
    owner = item_map.copy_owner()
    rows = []
    for t in range(learned.k):
        agg = np.bincount(owner, weights=learned.constituents[t], minlength=item_map.n)
        total = agg.sum()
        if total <= 0:
            raise InputError("constituent lost all mass under pull back")
        rows.append(agg / total)
    return MixtureSource(learned.weights.copy(), np.array(rows))


def refine_source(src: MixtureSource, item_map: ItemMap) -> MixtureSource:
    """The analytic refined source: restrict to kept items, renormalize, split.

    This is the distribution that mapped snapshots follow conditionally on
    survival (per constituent), used by tests and oracle-mode experiments.
    """
    if src.n != item_map.n:
        raise InputError("source domain does not match the item map")
    keep = ~item_map.eliminated
    owner = item_map.copy_owner()
    rows = []
    for t in range(src.k):
        p = src.constituents[t]
        kept_mass = p[keep].sum()
        if kept_mass <= 0:
            raise InputError("a constituent has no mass on kept items")
        per_copy = np.where(keep, p / np.maximum(item_map.splits, 1), 0.0) / kept_mass
        rows.append(per_copy[owner])
    return MixtureSource(src.weights.copy(), np.array(rows))
