"""Train/validation/test scenario construction.

Three sampling scenarios over a labeled scene:

* balanced (``B``): every class contributes an equal quota of training
  pixels, validation is stratified the same way, everything else is test.
* imbalanced (``IB``): training pixels are drawn uniformly from all
  labeled pixels, so class proportions in train track the scene prior.
* patched (``P``): the scene is tiled into a grid of rectangles and whole
  tiles go to train or test, which removes spatial adjacency between
  training and test pixels.

All constructors are pure functions of (labels, parameters, seed).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError, InsufficientClassError
from .hsio import LabelMap

Coord = tuple[int, int, int]


@dataclass(frozen=True)
class SplitSet:
    """Labeled pixel coordinates partitioned into train/val/test roles.

    Each record is (row, col, label). The three lists are pairwise
    disjoint by coordinate; ``scenario``/``seed``/``fold`` are provenance
    tags carried along for reporting.
    """

    train: list[Coord]
    val: list[Coord]
    test: list[Coord]
    scenario: str = ""
    seed: int | None = None
    fold: int = 0

    def __post_init__(self):
        for name in ("train", "val", "test"):
            coerced = [
                (int(r), int(c), int(l)) for r, c, l in getattr(self, name)
            ]
            object.__setattr__(self, name, coerced)
        seen: set[tuple[int, int]] = set()
        for name in ("train", "val", "test"):
            for r, c, _ in getattr(self, name):
                if (r, c) in seen:
                    raise DataError(f"coordinate ({r},{c}) appears in two roles")
                seen.add((r, c))

    def counts(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def per_class_counts(self, role: str = "train") -> dict[int, int]:
        out: dict[int, int] = {}
        for _, _, label in getattr(self, role):
            out[label] = out.get(label, 0) + 1
        return out


def _class_coords(labels: LabelMap, class_id: int) -> np.ndarray:
    # argwhere scans row-major, so the pre-shuffle order is deterministic
    return np.argwhere(labels.labels == class_id)


def _quotas(histogram: dict[int, int], total: int) -> dict[int, int]:
    """Per-class quotas: floor(total/C) each, remainder to the most
    numerous classes (ties broken by lower class id)."""
    base, rem = divmod(total, len(histogram))
    quota = {c: base for c in histogram}
    by_size = sorted(histogram, key=lambda c: (-histogram[c], c))
    for c in by_size[:rem]:
        quota[c] += 1
    return quota


def _records(coords: np.ndarray, label: int) -> list[Coord]:
    return [(int(r), int(c), label) for r, c in coords]


def split_balanced(
    labels: LabelMap, train_total: int, val_total: int, seed: int
) -> SplitSet:
    """Equal per-class training quotas; stratified validation; rest is test.

    For each class, quota(train) + quota(val) pixels are drawn uniformly
    without replacement, with both quota vectors computed independently by
    the remainder rule. Training counts per class therefore differ by at
    most one, and the final train size is exactly ``train_total``.
    """
    if train_total < 1 or val_total < 0:
        raise ConfigError("train_total must be >= 1 and val_total >= 0")
    hist = labels.class_histogram()
    if not hist:
        raise DataError("label map has no labeled pixels")
    quota_t = _quotas(hist, train_total)
    quota_v = _quotas(hist, val_total)
    for c in hist:
        need = quota_t[c] + quota_v[c]
        if hist[c] < need:
            raise InsufficientClassError(c, need, hist[c])
    rng = np.random.default_rng(seed)
    train: list[Coord] = []
    val: list[Coord] = []
    test: list[Coord] = []
    for c in sorted(hist):
        coords = _class_coords(labels, c)
        drawn = coords[rng.permutation(len(coords))]
        qt, qv = quota_t[c], quota_v[c]
        train.extend(_records(drawn[:qt], c))
        val.extend(_records(drawn[qt : qt + qv], c))
        test.extend(_records(drawn[qt + qv :], c))
    test.sort()
    return SplitSet(train=train, val=val, test=test, scenario="B", seed=seed)


def split_imbalanced(
    labels: LabelMap, train_total: int, val_total: int, seed: int
) -> SplitSet:
    """Uniform unstratified draw of the train+val pool; rest is test."""
    if train_total < 1 or val_total < 0:
        raise ConfigError("train_total must be >= 1 and val_total >= 0")
    coords = labels.labeled_coords()
    pool_size = train_total + val_total
    if pool_size > len(coords):
        raise DataError(
            f"pool of {pool_size} exceeds the {len(coords)} labeled pixels"
        )
    rng = np.random.default_rng(seed)
    drawn = coords[rng.permutation(len(coords))]
    lab = labels.labels

    def tag(rows: np.ndarray) -> list[Coord]:
        return [(int(r), int(c), int(lab[r, c])) for r, c in rows]

    train = tag(drawn[:train_total])
    val = tag(drawn[train_total:pool_size])
    test = tag(drawn[pool_size:])
    test.sort()
    if not test:
        warnings.warn("imbalanced split consumed every labeled pixel; test is empty")
    return SplitSet(train=train, val=val, test=test, scenario="IB", seed=seed)


def split_patched(
    labels: LabelMap,
    patch_rows: int,
    patch_cols: int,
    train_fraction: float,
    val_fraction: float,
    seed: int,
) -> SplitSet:
    """Tile the scene into a patch_rows x patch_cols grid and assign whole
    tiles to train or test, so no tile interior mixes the two roles.

    round(train_fraction * n_tiles) tiles (at least one) become training
    tiles; validation is drawn uniformly from training-tile pixels and
    removed from train.
    """
    if patch_rows < 1 or patch_cols < 1:
        raise ConfigError("patch grid dimensions must be >= 1")
    if not (0.0 <= train_fraction <= 1.0 and 0.0 <= val_fraction <= 1.0):
        raise ConfigError("train_fraction and val_fraction must lie in [0, 1]")
    h, w = labels.height, labels.width
    n_tiles = patch_rows * patch_cols
    n_train_tiles = min(n_tiles, max(1, int(round(train_fraction * n_tiles))))
    rng = np.random.default_rng(seed)
    tile_order = rng.permutation(n_tiles)
    train_tiles = set(tile_order[:n_train_tiles].tolist())

    coords = labels.labeled_coords()
    rows, cols = coords[:, 0], coords[:, 1]
    tile_of = (rows * patch_rows // h) * patch_cols + (cols * patch_cols // w)
    in_train_tile = np.isin(tile_of, list(train_tiles))
    lab = labels.labels

    def tag(rows_: np.ndarray) -> list[Coord]:
        return [(int(r), int(c), int(lab[r, c])) for r, c in rows_]

    pool = tag(coords[in_train_tile])
    test = tag(coords[~in_train_tile])
    n_val = int(round(val_fraction * len(pool)))
    order = rng.permutation(len(pool))
    val = [pool[i] for i in order[:n_val]]
    train = [pool[i] for i in sorted(order[n_val:])]

    if not test:
        warnings.warn("patched split assigned every tile to train; test is empty")
    present = {label for _, _, label in train}
    missing = sorted(set(labels.class_histogram()) - present)
    if missing:
        warnings.warn(f"classes {missing} have no pixels in any training tile")
    return SplitSet(train=train, val=val, test=test, scenario="P", seed=seed)


def monte_carlo(
    scenario: Callable[[int], SplitSet], runs: int, base_seed: int
) -> list[SplitSet]:
    """Run a split constructor at seeds base_seed..base_seed+runs-1.

    ``scenario`` is any callable mapping a seed to a SplitSet, typically a
    ``functools.partial`` over one of the split_* functions. Fold indices
    are stamped 0..runs-1.
    """
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    return [replace(scenario(base_seed + i), fold=i) for i in range(runs)]
