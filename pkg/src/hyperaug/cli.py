"""Command-line surface wiring the library into experiment pipelines.

Stage subcommands (ingest, split, augment, train, infer, evaluate) wrap one
module each; the orchestrators (run, bench) chain them over Monte-Carlo
repetitions. Every number printed here comes from a library call: this
module parses arguments, moves arrays between stages and writes files, and
computes nothing itself.

Reports with scientific content are byte-stable across reruns of the same
config + seed; wall-clock timings go to separate files so that claim stays
checkable. The only environment variable read is HYPERAUG_THREADS (worker
count for voted inference).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import augment, cnn, evaluation, hsio, splits, tta
from .errors import ConfigError, FormatError, HyperAugError
from .seeding import rng_for, seed_sequence

SCENARIOS = ("B", "IB", "P")
VARIANTS = ("without", "noise", "pca", "noise-on", "pca-on", "pca/pca-on")
# variant -> synthesis method used to enlarge the training set beforehand
OFFLINE_METHOD = {"noise": "noise", "pca": "pca", "pca/pca-on": "pca"}
# variant -> synthesis method used for voted test-time augmentation
ONLINE_METHOD = {"noise-on": "noise", "pca-on": "pca", "pca/pca-on": "pca"}

PLAIN_CSV_HEADER = "row,col,true_label,pred_label"
TIMING_KEYS = ("offline_augment_s", "train_s", "infer_ms_per_sample")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: dataset, split scenario, variant, and module knobs.

    Config files are flat ``key = value`` lines ('#' starts a comment);
    keys are exactly these field names. ``variants`` is only consulted by
    bench, which times each listed variant (falling back to ``variant``).
    """

    cube: str = ""
    labels: str = ""
    out: str = ""
    scenario: str = "B"
    variant: str = "without"
    variants: tuple[str, ...] = ()
    runs: int = 1
    seed: int = 0
    train_total: int = 50
    val_total: int = 10
    patch_rows: int = 2
    patch_cols: int = 5
    train_fraction: float = 0.5
    val_fraction: float = 0.1
    cnn_kernels: int = 200
    cnn_kernel_len: int = 5
    cnn_pool_size: int = 2
    cnn_pool_stride: int = 2
    cnn_dense1: int = 512
    cnn_dense2: int = 128
    cnn_learning_rate: float = 1e-4
    cnn_beta1: float = 0.9
    cnn_beta2: float = 0.999
    cnn_adam_eps: float = 1e-8
    cnn_batch_size: int = 64
    cnn_patience: int = 15
    cnn_max_epochs: int = 1000
    cnn_bn_momentum: float = 0.1
    augment_alpha_min: float = 0.9
    augment_alpha_max: float = 1.1
    augment_noise_scale: float = 0.25
    augment_components: tuple[int, ...] = (1,)
    tta_a: int = 4


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(field: dataclasses.Field, text: str):
    if field.type.startswith("tuple[int"):
        return tuple(int(part) for part in text.split(",") if part.strip())
    if field.type.startswith("tuple[str"):
        return tuple(part.strip() for part in text.split(",") if part.strip())
    if field.type == "int":
        return int(text)
    if field.type == "float":
        return float(text)
    return text


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read a flat key=value config file; unknown or repeated keys fail."""
    values: dict[str, object] = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{ln}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{ln}: key {key!r} appears twice")
        try:
            values[key] = _convert(_FIELDS[key], text)
        except ValueError as exc:
            raise ConfigError(f"{path}:{ln}: bad value for {key!r}: {exc}") from exc
    config = ExperimentConfig(**values)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    if config.scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}")
    for name in (config.variant, *config.variants):
        if name not in VARIANTS:
            raise ConfigError(f"unknown variant {name!r}, expected one of {VARIANTS}")
    if config.runs < 1:
        raise ConfigError("runs must be >= 1")
    for key in ("cube", "labels", "out"):
        if not getattr(config, key):
            raise ConfigError(f"config key {key!r} is required")
    for key in ("cube", "labels"):
        path = getattr(config, key)
        if not Path(path).is_file():
            raise FileNotFoundError(f"{key} file not found: {path}")


def worker_count() -> int:
    text = os.environ.get("HYPERAUG_THREADS", "1")
    try:
        workers = int(text)
    except ValueError as exc:
        raise ConfigError(f"HYPERAUG_THREADS must be an integer, got {text!r}") from exc
    return max(1, workers)


def derive_seed(master: int, run: int, stage: str) -> int:
    """Collapse the counter scheme to one int for APIs that take a seed."""
    return int(seed_sequence(master, run=run, stage=stage).generate_state(1)[0])


@dataclass(frozen=True)
class ScaledClassifier:
    """Normalizes raw spectra with the training scaler before the network.

    Online synthesis runs in raw units while the network was trained on
    scaled inputs, so the scaler has to ride along into voting."""

    scaler: hsio.BandScaler
    model: cnn.CNNModel

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(self.scaler.transform(x))


def _make_split(config: ExperimentConfig, labels: hsio.LabelMap, run: int) -> splits.SplitSet:
    seed = derive_seed(config.seed, run, "split")
    if config.scenario == "B":
        split = splits.split_balanced(labels, config.train_total, config.val_total, seed)
    elif config.scenario == "IB":
        split = splits.split_imbalanced(labels, config.train_total, config.val_total, seed)
    else:
        split = splits.split_patched(
            labels,
            config.patch_rows,
            config.patch_cols,
            config.train_fraction,
            config.val_fraction,
            seed,
        )
    return replace(split, fold=run)


def _cnn_config(config: ExperimentConfig, bands: int, classes: int, seed: int) -> cnn.CNNConfig:
    return cnn.CNNConfig(
        bands=bands,
        classes=classes,
        kernels=config.cnn_kernels,
        kernel_len=config.cnn_kernel_len,
        pool_size=config.cnn_pool_size,
        pool_stride=config.cnn_pool_stride,
        dense1=config.cnn_dense1,
        dense2=config.cnn_dense2,
        learning_rate=config.cnn_learning_rate,
        beta1=config.cnn_beta1,
        beta2=config.cnn_beta2,
        adam_eps=config.cnn_adam_eps,
        batch_size=config.cnn_batch_size,
        patience=config.cnn_patience,
        max_epochs=config.cnn_max_epochs,
        bn_momentum=config.cnn_bn_momentum,
        seed=seed,
    )


def _augment_config(config: ExperimentConfig, method: str) -> augment.AugmentConfig:
    return augment.AugmentConfig(
        method=method,
        alpha_min=config.augment_alpha_min,
        alpha_max=config.augment_alpha_max,
        noise_scale=config.augment_noise_scale,
        components=config.augment_components,
        seed=config.seed,
    )


@dataclass(frozen=True)
class RunOutcome:
    report: evaluation.EvaluationReport
    split: splits.SplitSet
    tta_results: list[tta.TTAResult] | None
    predictions: np.ndarray
    true_labels: np.ndarray
    history: list[cnn.EpochRecord]


def execute_run(
    config: ExperimentConfig,
    run: int,
    cube: hsio.HSICube,
    labels: hsio.LabelMap,
    workers: int = 1,
) -> RunOutcome:
    """One Monte-Carlo repetition: split, enlarge, train, classify, score."""
    split = _make_split(config, labels, run)
    train_values, train_labels = hsio.extract_spectra(cube, split.train)
    val_values, val_labels = hsio.extract_spectra(cube, split.val)
    test_values, test_labels = hsio.extract_spectra(cube, split.test)
    if len(test_values) == 0:
        raise ConfigError("split produced an empty test set; nothing to score")

    offline = OFFLINE_METHOD.get(config.variant)
    online = ONLINE_METHOD.get(config.variant)
    augmenter = None
    aug_config = None
    if offline or online:
        # one model serves both stages, fit on the original training set
        aug_config = _augment_config(config, offline or online)
        augmenter = augment.build_augmenter(aug_config, train_values, train_labels)

    # normalization is defined by the original (pre-enlargement) pixels
    scaler = hsio.fit_band_scaler(train_values)

    augment_seconds = 0.0
    if offline:
        rng = rng_for(config.seed, run=run, stage="offline-augment")
        (train_values, train_labels, _), augment_seconds = evaluation.timed(
            lambda: augment.offline_enlarge(
                train_values, train_labels, aug_config, rng, augmenter
            )
        )

    model = cnn.CNNModel(
        _cnn_config(config, cube.bands, labels.n_classes, derive_seed(config.seed, run, "cnn"))
    )
    history, train_seconds = evaluation.timed(
        lambda: cnn.train(
            model,
            scaler.transform(train_values),
            train_labels,
            scaler.transform(val_values),
            val_labels,
        )
    )

    if online:
        classifier = ScaledClassifier(scaler, model)
        results, infer_ms = tta.tta_classify_set(
            classifier,
            augmenter,
            test_values,
            tta.TTAConfig(a=config.tta_a, seed=config.seed),
            coords=[(r, c) for r, c, _ in split.test],
            true_labels=test_labels,
            run=run,
            workers=workers,
        )
        predictions = np.array([r.label for r in results], dtype=int)
    else:
        results = None
        predictions, plain_seconds = evaluation.timed(
            lambda: model.predict(scaler.transform(test_values))
        )
        infer_ms = 1000.0 * plain_seconds / len(test_values)

    report = evaluation.score(
        test_labels,
        predictions,
        labels.n_classes,
        scenario=config.scenario,
        variant=config.variant,
        seed=config.seed,
        fold=run,
        timings={
            "offline_augment_s": augment_seconds,
            "train_s": train_seconds,
            "infer_ms_per_sample": infer_ms,
        },
    )
    return RunOutcome(report, split, results, predictions, test_labels, history)


def _write_plain_csv(
    path: Path,
    coords: list[tuple[int, int, int]],
    true_labels: np.ndarray,
    predictions: np.ndarray,
) -> None:
    lines = [PLAIN_CSV_HEADER]
    for (row, col, _), t, p in zip(coords, true_labels, predictions):
        lines.append(f"{row},{col},{t},{p}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_timings_csv(path: Path, rows: list[tuple[str, int, dict[str, float]]]) -> None:
    lines = ["variant,run," + ",".join(TIMING_KEYS)]
    for variant, run, timings in rows:
        cells = ",".join(f"{timings[k]:.6f}" for k in TIMING_KEYS)
        lines.append(f"{variant},{run},{cells}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _print_histogram(labels: hsio.LabelMap) -> None:
    for class_id, count in sorted(labels.class_histogram().items()):
        print(f"  class {class_id}: {count}")


# ---------------------------------------------------------------- commands


def _parse_kv(pairs: list[str], allowed: dict[str, type]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, text = pair.partition("=")
        if not sep or key not in allowed:
            raise ConfigError(
                f"expected key=value with key in {sorted(allowed)}, got {pair!r}"
            )
        out[key.replace("-", "_")] = allowed[key](text)
    return out


def cmd_ingest(args) -> int:
    if args.synthetic:
        spec = _parse_kv(
            args.synthetic,
            {"classes": int, "bands": int, "per-class": int, "spread": float},
        )
        cube, labels = hsio.generate_synthetic(seed=args.seed, **spec)
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        hsio.save_cube(cube, out / "synthetic.hsr")
        hsio.save_labels(labels, out / "synthetic.hsl")
        print(f"wrote {out / 'synthetic.hsr'} and {out / 'synthetic.hsl'}")
    elif args.cube:
        cube = hsio.load_cube(args.cube)
        labels = hsio.load_labels(args.labels) if args.labels else None
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            hsio.save_cube(cube, out / Path(args.cube).name)
            if labels is not None:
                hsio.save_labels(labels, out / Path(args.labels).name)
    else:
        raise ConfigError("ingest needs --synthetic or --cube")
    print(f"cube: {cube.height} x {cube.width} x {cube.bands} (rows x cols x bands)")
    if labels is not None:
        print(f"classes: {labels.n_classes}")
        _print_histogram(labels)
    return 0


def cmd_split(args) -> int:
    labels = hsio.load_labels(args.labels)
    config = ExperimentConfig(
        cube=args.labels,  # placeholder, not validated here
        labels=args.labels,
        out=".",
        scenario=args.scenario,
        train_total=args.train_total,
        val_total=args.val_total,
        patch_rows=args.patch_rows,
        patch_cols=args.patch_cols,
        train_fraction=args.train_fraction,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    split = _make_split(config, labels, run=args.run)
    hsio.save_split(split, args.out)
    n_train, n_val, n_test = split.counts()
    print(f"wrote {args.out}: train={n_train} val={n_val} test={n_test}")
    for class_id, count in sorted(split.per_class_counts("train").items()):
        print(f"  train class {class_id}: {count}")
    return 0


def cmd_augment(args) -> int:
    cube = hsio.load_cube(args.cube)
    split = hsio.load_split(args.split)
    values, labels = hsio.extract_spectra(cube, split.train)
    config = augment.AugmentConfig(
        method=args.method,
        alpha_min=args.alpha_min,
        alpha_max=args.alpha_max,
        noise_scale=args.noise_scale,
        components=tuple(args.components),
        seed=args.seed,
    )
    rng = rng_for(args.seed, run=args.run, stage="offline-augment")
    out_values, out_labels, flags = augment.offline_enlarge(values, labels, config, rng)
    hsio.save_samples(out_values, out_labels, flags, args.out)
    print(f"wrote {args.out}: {len(labels)} originals + {int(flags.sum())} synthetic")
    for class_id in sorted(set(out_labels.tolist())):
        total = int((out_labels == class_id).sum())
        print(f"  class {class_id}: {total}")
    return 0


def cmd_train(args) -> int:
    cube = hsio.load_cube(args.cube)
    labels = hsio.load_labels(args.labels)
    split = hsio.load_split(args.split)
    original_values, _ = hsio.extract_spectra(cube, split.train)
    if args.samples:
        train_values, train_labels, _ = hsio.load_samples(args.samples)
        if train_values.shape[1] != cube.bands:
            raise ConfigError(
                f"samples have {train_values.shape[1]} bands, cube has {cube.bands}"
            )
    else:
        train_values, train_labels = hsio.extract_spectra(cube, split.train)
    val_values, val_labels = hsio.extract_spectra(cube, split.val)
    scaler = hsio.fit_band_scaler(original_values)
    config = cnn.CNNConfig(
        bands=cube.bands,
        classes=labels.n_classes,
        kernels=args.kernels,
        dense1=args.dense1,
        dense2=args.dense2,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )
    model = cnn.CNNModel(config)
    history = cnn.train(
        model,
        scaler.transform(train_values),
        train_labels,
        scaler.transform(val_values),
        val_labels,
    )
    cnn.save_model(model, args.out)
    best = max(record.val_accuracy for record in history)
    print(f"wrote {args.out}: {len(history)} epochs, best val accuracy {best:.4f}")
    return 0


def cmd_infer(args) -> int:
    cube = hsio.load_cube(args.cube)
    split = hsio.load_split(args.split)
    model = cnn.load_model(args.model)
    train_values, train_labels = hsio.extract_spectra(cube, split.train)
    test_values, test_labels = hsio.extract_spectra(cube, split.test)
    if len(test_values) == 0:
        raise ConfigError("split has an empty test set")
    scaler = hsio.fit_band_scaler(train_values)
    out = Path(args.out)
    if args.tta:
        config = augment.AugmentConfig(
            method=args.tta,
            alpha_min=args.alpha_min,
            alpha_max=args.alpha_max,
            noise_scale=args.noise_scale,
            components=tuple(args.components),
            seed=args.seed,
        )
        augmenter = augment.build_augmenter(config, train_values, train_labels)
        results, _ = tta.tta_classify_set(
            ScaledClassifier(scaler, model),
            augmenter,
            test_values,
            tta.TTAConfig(a=args.a, seed=args.seed),
            coords=[(r, c) for r, c, _ in split.test],
            true_labels=test_labels,
            run=args.run,
            workers=worker_count(),
        )
        tta.export_results(results, out)
        predictions = np.array([r.label for r in results], dtype=int)
    else:
        predictions = model.predict(scaler.transform(test_values))
        _write_plain_csv(out, split.test, test_labels, predictions)
    n_classes = int(model.config.classes)
    report = evaluation.score(test_labels, predictions, n_classes)
    print(f"wrote {out}: {len(predictions)} samples, OA {report.oa:.4f}")
    return 0


def _read_results_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(PLAIN_CSV_HEADER):
        raise FormatError(f"{path}: missing '{PLAIN_CSV_HEADER}...' header")
    true_labels, predictions = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) < 4:
            raise FormatError(f"{path}:{ln}: expected at least 4 fields")
        try:
            true_labels.append(int(parts[2]))
            predictions.append(int(parts[3]))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer label field") from exc
    return np.array(true_labels, dtype=int), np.array(predictions, dtype=int)


def cmd_evaluate(args) -> int:
    if args.compare:
        import json

        docs = [json.loads(Path(p).read_text(encoding="utf-8")) for p in args.compare]
        oas = [[run["oa"] for run in doc["runs"]] for doc in docs]
        if len(oas[0]) != len(oas[1]):
            raise ConfigError(
                f"run counts differ: {len(oas[0])} vs {len(oas[1])}"
            )
        outcome = evaluation.wilcoxon_two_tailed(oas[0], oas[1])
        kind = "exact" if outcome.exact else "approximate"
        print(
            f"wilcoxon ({kind}, n={outcome.n}): statistic={outcome.statistic:.1f} "
            f"p={outcome.p:.6f}"
        )
        return 0
    if not args.results:
        raise ConfigError("evaluate needs --results or --compare")
    true_labels, predictions = _read_results_csv(args.results)
    n_classes = args.classes or int(max(true_labels.max(), predictions.max()))
    report = evaluation.score(true_labels, predictions, n_classes)
    print(f"samples: {len(true_labels)}")
    print(f"oa: {report.oa:.4f}")
    print(f"aa: {report.aa:.4f}")
    for class_id in range(1, n_classes + 1):
        acc = report.per_class_acc[class_id - 1]
        shown = "absent" if np.isnan(acc) else f"{acc:.4f}"
        print(f"  class {class_id}: {shown}")
    return 0


def cmd_run(args) -> int:
    config = parse_config(args.config)
    cube = hsio.load_cube(config.cube)
    labels = hsio.load_labels(config.labels)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count()

    reports: list[evaluation.EvaluationReport] = []
    timing_rows: list[tuple[str, int, dict[str, float]]] = []
    failures = 0
    for run in range(config.runs):
        try:
            outcome = execute_run(config, run, cube, labels, workers=workers)
        except HyperAugError as exc:
            failures += 1
            print(f"run {run} failed: {exc}", file=sys.stderr)
            continue
        results_path = out / f"run_{run}_results.csv"
        if outcome.tta_results is not None:
            tta.export_results(outcome.tta_results, results_path)
        else:
            _write_plain_csv(
                results_path, outcome.split.test, outcome.true_labels, outcome.predictions
            )
        reports.append(outcome.report)
        timing_rows.append((config.variant, run, outcome.report.timings))
        print(
            f"run {run}: OA {outcome.report.oa:.4f} AA {outcome.report.aa:.4f} "
            f"({len(outcome.history)} epochs)"
        )

    if reports:
        aggregated = evaluation.aggregate(reports)
        evaluation.write_report_csv([aggregated], out / "report.csv")
        evaluation.write_report_json(
            reports, [aggregated], out / "report.json", include_timings=False
        )
        _write_timings_csv(out / "timings.csv", timing_rows)
        print(
            f"aggregate over {aggregated.n_runs} runs: "
            f"OA {aggregated.oa_mean:.4f} +- {aggregated.oa_std:.4f}"
        )
    return 1 if failures else 0


def cmd_bench(args) -> int:
    config = parse_config(args.config)
    cube = hsio.load_cube(config.cube)
    labels = hsio.load_labels(config.labels)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count()

    names = config.variants or (config.variant,)
    rows: list[tuple[str, int, dict[str, float]]] = []
    print("variant," + ",".join(TIMING_KEYS) + ",oa")
    for name in names:
        outcome = execute_run(
            replace(config, variant=name), 0, cube, labels, workers=workers
        )
        timings = outcome.report.timings
        rows.append((name, 0, timings))
        cells = ",".join(f"{timings[k]:.6f}" for k in TIMING_KEYS)
        print(f"{name},{cells},{outcome.report.oa:.4f}")
    _write_timings_csv(out / "bench.csv", rows)
    return 0


# ------------------------------------------------------------------ parser


def _add_augment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--noise-scale", type=float, default=0.25)
    parser.add_argument("--alpha-min", type=float, default=0.9)
    parser.add_argument("--alpha-max", type=float, default=1.1)
    parser.add_argument("--components", type=int, nargs="+", default=[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperaug",
        description="Spectral-classification experiments with sample synthesis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate datasets or generate a toy scene")
    p.add_argument("--synthetic", nargs="+", metavar="KEY=VALUE")
    p.add_argument("--cube")
    p.add_argument("--labels")
    p.add_argument("--summary", action="store_true", help="print dims and histogram")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="draw a train/val/test split")
    p.add_argument("--labels", required=True)
    p.add_argument("--scenario", default="B", choices=SCENARIOS)
    p.add_argument("--train-total", type=int, default=50)
    p.add_argument("--val-total", type=int, default=10)
    p.add_argument("--patch-rows", type=int, default=2)
    p.add_argument("--patch-cols", type=int, default=5)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0, help="run index for seed derivation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="enlarge a training set offline")
    p.add_argument("--cube", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--method", required=True, choices=("noise", "pca"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    _add_augment_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the spectral classifier")
    p.add_argument("--cube", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--samples", help="enlarged sample file; defaults to split train")
    p.add_argument("--kernels", type=int, default=200)
    p.add_argument("--dense1", type=int, default=512)
    p.add_argument("--dense2", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--patience", type=int, default=15)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="classify a split's test pixels")
    p.add_argument("--cube", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tta", choices=("noise", "pca"), help="vote over synthetic copies")
    p.add_argument("--a", type=int, default=4, help="synthetic copies per sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    _add_augment_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score a results file or compare two reports")
    p.add_argument("--results", help="per-pixel results CSV")
    p.add_argument("--classes", type=int, help="class count; inferred when omitted")
    p.add_argument(
        "--compare",
        nargs=2,
        metavar="REPORT_JSON",
        help="two report.json files; paired test on per-run overall accuracy",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full Monte-Carlo experiment from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time each variant once, table output")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HyperAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
