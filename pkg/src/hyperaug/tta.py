"""Test-time augmentation: ensemble voting over synthesized variants.

For each incoming sample, ``a`` synthetic variants are generated with an
augmenter fit on the original training set; the sample plus variants are
classified and the predictions are combined by majority vote. When two or
more classes tie for the top vote count, soft voting takes over: the
probability rows of all members are averaged and the argmax wins (lowest
class id on an exact float tie).

Per-sample RNGs are derived from (seed, run, sample index), so results
never depend on processing order or thread count.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .augment import Augmenter
from .errors import ConfigError, DimError
from .hsio import Spectrum
from .seeding import rng_for


class Classifier(Protocol):
    """Anything that maps a batch of spectra to class probability rows."""

    def predict_proba(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class TTAConfig:
    """``a`` is the number of synthetic members added per sample; a=0
    degrades to plain single-sample inference."""

    a: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.a < 0:
            raise ConfigError("a must be >= 0")


@dataclass(frozen=True)
class TTAResult:
    """Outcome of one voted classification.

    ``votes[c-1]`` counts members that predicted class c; ``member_labels``
    lists them in member order (original sample first).
    """

    label: int
    votes: tuple[int, ...]
    mean_proba: np.ndarray
    soft_vote_used: bool
    member_labels: tuple[int, ...]
    coord: tuple[int, int] | None = None
    true_label: int | None = None


def decide_vote(probs: np.ndarray) -> TTAResult:
    """Combine an (members, classes) probability table into one label.

    Majority vote over per-member argmax labels; a tie for the top count
    falls back to the argmax of the member-averaged probabilities.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise DimError(f"expected a (members, classes) table, got {probs.shape}")
    n_classes = probs.shape[1]
    member_labels = probs.argmax(axis=1) + 1
    votes = np.bincount(member_labels, minlength=n_classes + 1)[1:]
    mean_proba = probs.mean(axis=0)
    top = votes.max()
    if (votes == top).sum() == 1:
        label = int(votes.argmax()) + 1
        soft = False
    else:
        label = int(mean_proba.argmax()) + 1
        soft = True
    return TTAResult(
        label=label,
        votes=tuple(int(v) for v in votes),
        mean_proba=mean_proba,
        soft_vote_used=soft,
        member_labels=tuple(int(l) for l in member_labels),
    )


def tta_classify(
    classifier: Classifier,
    augmenter: Augmenter,
    x,
    config: TTAConfig,
    rng: np.random.Generator,
) -> TTAResult:
    """Classify one sample through the (a+1)-member ensemble.

    Synthesis sees the raw sample without a label (the true class is
    unknown at inference time); the classifier receives all members as a
    single batch.
    """
    vec = x.values if isinstance(x, Spectrum) else np.asarray(x, dtype=np.float64)
    members = np.empty((config.a + 1, vec.shape[0]))
    members[0] = vec
    for i in range(config.a):
        members[i + 1] = augmenter.synthesize(vec, None, rng)
    return decide_vote(classifier.predict_proba(members))


def tta_classify_set(
    classifier: Classifier,
    augmenter: Augmenter,
    test_values: np.ndarray,
    config: TTAConfig,
    coords: Sequence[tuple[int, int]] | None = None,
    true_labels: Sequence[int] | None = None,
    run: int = 0,
    workers: int = 1,
) -> tuple[list[TTAResult], float]:
    """Vote-classify a whole test set; returns (results, mean ms/sample).

    Each sample gets its own counter-derived RNG keyed by its pixel
    coordinate (or, without coords, its position), so the output is the
    same for any processing order and any ``workers`` count.
    """
    test_values = np.asarray(test_values, dtype=np.float64)
    n = len(test_values)
    if n == 0:
        return [], 0.0

    def classify_one(i: int) -> tuple[TTAResult, float]:
        key = tuple(int(v) for v in coords[i]) if coords is not None else i
        rng = rng_for(config.seed, run, "tta", key)
        started = time.perf_counter()
        result = tta_classify(classifier, augmenter, test_values[i], config, rng)
        elapsed = time.perf_counter() - started
        if coords is not None or true_labels is not None:
            result = TTAResult(
                label=result.label,
                votes=result.votes,
                mean_proba=result.mean_proba,
                soft_vote_used=result.soft_vote_used,
                member_labels=result.member_labels,
                coord=tuple(coords[i]) if coords is not None else None,
                true_label=int(true_labels[i]) if true_labels is not None else None,
            )
        return result, elapsed

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(classify_one, range(n)))
    else:
        pairs = [classify_one(i) for i in range(n)]
    results = [r for r, _ in pairs]
    mean_ms = 1000.0 * sum(t for _, t in pairs) / n
    return results, mean_ms


def export_results(results: Sequence[TTAResult], path: str | Path) -> None:
    """CSV rows: row,col,true_label,pred_label,soft_vote_used,votes_1..C."""
    if not results:
        Path(path).write_text("row,col,true_label,pred_label,soft_vote_used\n")
        return
    n_classes = len(results[0].votes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row", "col", "true_label", "pred_label", "soft_vote_used"]
            + [f"votes_{c}" for c in range(1, n_classes + 1)]
        )
        for r in results:
            row, col = r.coord if r.coord is not None else ("", "")
            writer.writerow(
                [
                    row,
                    col,
                    "" if r.true_label is None else r.true_label,
                    r.label,
                    int(r.soft_vote_used),
                    *r.votes,
                ]
            )
