"""Hyperspectral pixel classification with offline and online augmentation."""

from .errors import (
    ClassError,
    ConfigError,
    DataError,
    DegenerateError,
    DimError,
    FormatError,
    HyperAugError,
    InsufficientClassError,
    NumericError,
    TruncatedError,
)
from .augment import (
    AugmentConfig,
    ClassNoiseModel,
    NoiseAugmenter,
    PCAAugmenter,
    build_augmenter,
    draw_alpha,
    enlargement_quota,
    noise_augment,
    noise_fit,
    offline_enlarge,
    pca_augment,
)
from .cnn import CNNConfig, CNNModel, EpochRecord, load_model, save_model, train
from .evaluation import (
    AggregateReport,
    EvaluationReport,
    WilcoxonResult,
    aggregate,
    score,
    wilcoxon_two_tailed,
    write_report_csv,
    write_report_json,
)
from .hsio import (
    BandScaler,
    HSICube,
    LabelMap,
    Spectrum,
    compact_labels,
    extract_spectra,
    fit_band_scaler,
    generate_synthetic,
    load_cube,
    load_labels,
    load_samples,
    load_split,
    save_cube,
    save_labels,
    save_samples,
    save_split,
)
from .pca import (
    PCAModel,
    fit,
    jacobi_eigh,
    load_pca,
    reconstruction_error,
    save_pca,
)
from .seeding import rng_for, seed_sequence
from .splits import (
    SplitSet,
    monte_carlo,
    split_balanced,
    split_imbalanced,
    split_patched,
)
from .tta import (
    TTAConfig,
    TTAResult,
    decide_vote,
    export_results,
    tta_classify,
    tta_classify_set,
)

__version__ = "0.1.0"
