"""Metrics, aggregation, the Wilcoxon signed-rank test, and report files.

Accuracy conventions: confusion rows are true classes, columns predicted;
per-class accuracy is recall; overall accuracy (OA) is the trace ratio;
average accuracy (AA) means per-class recall averaged over the classes
that actually occur (absent classes are excluded, not counted as zero).

Report files come in two flavors: a CSV with one row per augmentation
variant (per-class columns, then OA/AA), and a JSON document with full
per-run detail. Timings can be excluded so result files stay byte-stable
across reruns.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError, DimError

EXACT_LIMIT = 12  # largest n whose 2^n sign patterns are enumerated


@dataclass(frozen=True)
class EvaluationReport:
    """Scores of one trained model on one test set."""

    confusion: np.ndarray
    per_class_acc: np.ndarray  # recall per class; NaN when absent
    oa: float
    aa: float
    absent_classes: tuple[int, ...] = ()
    scenario: str = ""
    variant: str = ""
    seed: int | None = None
    fold: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]


@dataclass(frozen=True)
class AggregateReport:
    """Means and sample standard deviations over Monte-Carlo runs."""

    scenario: str
    variant: str
    n_runs: int
    per_class_mean: np.ndarray
    per_class_std: np.ndarray
    oa_mean: float
    oa_std: float
    aa_mean: float
    aa_std: float
    timings_mean: dict[str, float] = field(default_factory=dict)
    timings_std: dict[str, float] = field(default_factory=dict)


def score(
    true_labels,
    predicted_labels,
    n_classes: int,
    **metadata,
) -> EvaluationReport:
    """Confusion matrix, per-class recalls, OA and AA for one run.

    Metadata keywords (scenario, variant, seed, fold, timings) are stored
    on the report unchanged.
    """
    t = np.asarray(true_labels, dtype=int)
    p = np.asarray(predicted_labels, dtype=int)
    if t.shape != p.shape or t.ndim != 1 or len(t) == 0:
        raise DimError("need equal-length non-empty 1-D label arrays")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.min() < 1 or arr.max() > n_classes:
            raise DataError(f"{name} labels must lie in 1..{n_classes}")
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (t - 1, p - 1), 1)
    row_totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(
            row_totals > 0, np.diag(confusion) / np.maximum(row_totals, 1), np.nan
        )
    absent = tuple(int(c) + 1 for c in np.nonzero(row_totals == 0)[0])
    oa = float(np.trace(confusion) / confusion.sum())
    aa = float(np.nanmean(per_class))
    return EvaluationReport(
        confusion=confusion,
        per_class_acc=per_class,
        oa=oa,
        aa=aa,
        absent_classes=absent,
        **metadata,
    )


def aggregate(reports: Sequence[EvaluationReport]) -> AggregateReport:
    """Mean and sample std of accuracies and timings across runs.

    All reports must share the class count, scenario, and variant; NaN
    per-class entries (absent classes) are skipped per class.
    """
    if not reports:
        raise ConfigError("nothing to aggregate")
    scenarios = {r.scenario for r in reports}
    variants = {r.variant for r in reports}
    shapes = {r.confusion.shape for r in reports}
    if len(scenarios) > 1:
        raise ConfigError(f"cannot aggregate across scenarios {sorted(scenarios)}")
    if len(variants) > 1:
        raise ConfigError(f"cannot aggregate across variants {sorted(variants)}")
    if len(shapes) > 1:
        raise ConfigError("reports have different class counts")

    def sample_std(values: np.ndarray, axis=0):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] < 2:
            return np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
        # a class absent from every run yields an all-nan column; the
        # nan result is intended, so the all-nan RuntimeWarning is noise
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanstd(values, axis=axis, ddof=1)

    per_class = np.stack([r.per_class_acc for r in reports])
    oa = np.array([r.oa for r in reports])
    aa = np.array([r.aa for r in reports])
    timing_keys = sorted({k for r in reports for k in r.timings})
    timings = {
        k: np.array([r.timings[k] for r in reports if k in r.timings])
        for k in timing_keys
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        per_class_mean = np.nanmean(per_class, axis=0)
    return AggregateReport(
        scenario=reports[0].scenario,
        variant=reports[0].variant,
        n_runs=len(reports),
        per_class_mean=per_class_mean,
        per_class_std=np.asarray(sample_std(per_class)),
        oa_mean=float(oa.mean()),
        oa_std=float(sample_std(oa)),
        aa_mean=float(aa.mean()),
        aa_std=float(sample_std(aa)),
        timings_mean={k: float(v.mean()) for k, v in timings.items()},
        timings_std={k: float(sample_std(v)) for k, v in timings.items()},
    )


# ---------------- Wilcoxon signed-rank ----------------


@dataclass(frozen=True)
class WilcoxonResult:
    p: float
    statistic: float  # min(W+, W-)
    n: int  # pairs remaining after dropping zero differences
    exact: bool
    degenerate: bool = False


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def wilcoxon_two_tailed(x, y, mode: str = "auto") -> WilcoxonResult:
    """Two-tailed Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences get average
    ranks. With n <= 12 pairs the p-value is exact (all 2^n sign patterns
    enumerated); above that a normal approximation with tie and continuity
    corrections is used. ``mode`` can force either branch.
    """
    if mode not in ("auto", "exact", "approx"):
        raise ConfigError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimError("paired samples must be equal-length 1-D arrays")
    diff = x - y
    diff = diff[diff != 0.0]
    n = len(diff)
    if n == 0:
        return WilcoxonResult(p=1.0, statistic=0.0, n=0, exact=True, degenerate=True)
    ranks = _average_ranks(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    statistic = min(w_plus, w_minus)
    use_exact = n <= EXACT_LIMIT if mode == "auto" else mode == "exact"
    if use_exact:
        if n > 24:
            raise ConfigError(f"exact enumeration of 2^{n} patterns refused")
        patterns = np.arange(2**n, dtype=np.int64)
        bits = (patterns[:, None] >> np.arange(n)) & 1
        sums = bits @ ranks
        le = float((sums <= w_plus + 1e-9).mean())
        ge = float((sums >= w_plus - 1e-9).mean())
        p = min(1.0, 2.0 * min(le, ge))
        return WilcoxonResult(p=p, statistic=statistic, n=n, exact=True)
    mu = n * (n + 1) / 4.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(diff), return_counts=True)
    sigma2 -= float(((counts**3 - counts).sum())) / 48.0
    if sigma2 <= 0:
        return WilcoxonResult(p=1.0, statistic=statistic, n=n, exact=False,
                              degenerate=True)
    d = w_plus - mu
    z = (d - 0.5 * np.sign(d)) / math.sqrt(sigma2)
    p = min(1.0, max(0.0, 2.0 * (1.0 - _phi(abs(z)))))
    return WilcoxonResult(p=p, statistic=statistic, n=n, exact=False)


# ---------------- timing ----------------


def timed(fn: Callable[[], object]) -> tuple[object, float]:
    """Run fn() and return (result, wall seconds on the monotonic clock).

    Call without concurrent load when the number will be reported.
    """
    started = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - started


# ---------------- report files ----------------


def _cell(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.4f}"


def write_report_csv(aggregates: Sequence[AggregateReport], path: str | Path) -> None:
    """One row per variant: scenario, variant, runs, per-class means,
    OA/AA means and sample stds. Absent classes print as empty cells."""
    if not aggregates:
        raise ConfigError("no aggregates to write")
    n_classes = {len(a.per_class_mean) for a in aggregates}
    if len(n_classes) > 1:
        raise ConfigError("aggregates have different class counts")
    c = n_classes.pop()
    header = (
        ["scenario", "variant", "runs"]
        + [f"class_{i}" for i in range(1, c + 1)]
        + ["oa", "aa", "oa_std", "aa_std"]
    )
    lines = [",".join(header)]
    for a in aggregates:
        row = [a.scenario, a.variant, str(a.n_runs)]
        row += [_cell(v) for v in a.per_class_mean]
        row += [_cell(a.oa_mean), _cell(a.aa_mean), _cell(a.oa_std), _cell(a.aa_std)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def report_as_dict(report: EvaluationReport, include_timings: bool = True) -> dict:
    out = {
        "scenario": report.scenario,
        "variant": report.variant,
        "seed": report.seed,
        "fold": report.fold,
        "oa": report.oa,
        "aa": report.aa,
        "per_class_acc": [_clean(float(v)) for v in report.per_class_acc],
        "absent_classes": list(report.absent_classes),
        "confusion": report.confusion.tolist(),
    }
    if include_timings:
        out["timings"] = dict(report.timings)
    return out


def aggregate_as_dict(agg: AggregateReport, include_timings: bool = True) -> dict:
    out = {
        "scenario": agg.scenario,
        "variant": agg.variant,
        "n_runs": agg.n_runs,
        "oa_mean": agg.oa_mean,
        "oa_std": agg.oa_std,
        "aa_mean": agg.aa_mean,
        "aa_std": agg.aa_std,
        "per_class_mean": [_clean(float(v)) for v in agg.per_class_mean],
        "per_class_std": [_clean(float(v)) for v in agg.per_class_std],
    }
    if include_timings:
        out["timings_mean"] = dict(agg.timings_mean)
        out["timings_std"] = dict(agg.timings_std)
    return out


def write_report_json(
    runs: Sequence[EvaluationReport],
    aggregates: Sequence[AggregateReport],
    path: str | Path,
    include_timings: bool = True,
) -> None:
    doc = {
        "runs": [report_as_dict(r, include_timings) for r in runs],
        "aggregates": [aggregate_as_dict(a, include_timings) for a in aggregates],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
