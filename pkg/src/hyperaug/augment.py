"""Sample synthesis: principal-component scaling and per-class noise.

Two ways to fabricate a plausible spectrum from a real one:

* ``pca_augment`` rescales the first principal-component coordinate by a
  random factor alpha ~ U(alpha_min, alpha_max) and maps back through the
  full basis, so only the dominant mode of variation moves.
* ``noise_augment`` adds zero-mean Gaussian noise with diagonal covariance
  noise_scale * sigma_c^2, where sigma_c is the per-band standard
  deviation of the sample's class in the training set.

``offline_enlarge`` applies either method to grow a training set before
learning; the same synthesis ops are reused online at inference time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import ClassError, ConfigError, DataError, DegenerateError, DimError
from .hsio import Spectrum
from .pca import PCAModel, backproject, project
from . import pca as _pca

METHODS = ("pca", "noise")


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for both synthesis methods; unused fields are ignored.

    ``components`` lists 1-based principal-component indices to rescale;
    the default touches only the first.
    """

    method: str = "pca"
    alpha_min: float = 0.9
    alpha_max: float = 1.1
    noise_scale: float = 0.25
    components: tuple[int, ...] = (1,)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (np.isfinite(self.alpha_min) and np.isfinite(self.alpha_max)):
            raise ConfigError("alpha bounds must be finite")
        if self.alpha_min > self.alpha_max:
            raise ConfigError("alpha_min must not exceed alpha_max")
        if not (np.isfinite(self.noise_scale) and self.noise_scale >= 0):
            raise ConfigError("noise_scale must be finite and >= 0")
        if not self.components or any(c < 1 for c in self.components):
            raise ConfigError("components are 1-based indices, at least one")
        object.__setattr__(self, "components", tuple(int(c) for c in self.components))


@dataclass(frozen=True)
class ClassNoiseModel:
    """Per-class per-band standard deviations, plus a pooled fallback
    vector (all training samples together) for unlabeled inputs."""

    sigmas: dict[int, np.ndarray]
    pooled: np.ndarray

    @property
    def classes(self) -> list[int]:
        return sorted(self.sigmas)

    @property
    def bands(self) -> int:
        return self.pooled.shape[0]

    def sigma_for(self, label: int | None) -> np.ndarray:
        if label is None:
            return self.pooled
        if label not in self.sigmas:
            raise ClassError(f"class {label} was not present in the training set")
        return self.sigmas[label]


def _values_labels(samples, labels) -> tuple[np.ndarray, np.ndarray]:
    if labels is None:
        rows = []
        labs = []
        for s in samples:
            if not isinstance(s, Spectrum) or s.label is None:
                raise DataError("training samples must be labeled spectra")
            rows.append(s.values)
            labs.append(s.label)
        return np.array(rows, dtype=np.float64), np.array(labs, dtype=int)
    values = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if values.ndim != 2 or values.shape[0] != labels.shape[0]:
        raise DimError("values must be (N, bands) with one label per row")
    return values, labels


def noise_fit(
    samples: Sequence[Spectrum] | np.ndarray, labels: np.ndarray | None = None
) -> ClassNoiseModel:
    """Population (1/N) per-band standard deviation for each class.

    A class with a single sample gets an all-zero vector and a warning;
    its perturbations will be identities.
    """
    values, labs = _values_labels(samples, labels)
    if values.shape[0] == 0:
        raise DegenerateError("cannot fit a noise model on an empty training set")
    sigmas: dict[int, np.ndarray] = {}
    for c in sorted(set(labs.tolist())):
        rows = values[labs == c]
        if len(rows) < 2:
            warnings.warn(
                f"class {c} has {len(rows)} training sample(s); "
                "its noise model is all-zero"
            )
        sigmas[c] = rows.std(axis=0)
    return ClassNoiseModel(sigmas=sigmas, pooled=values.std(axis=0))


def _unwrap(x) -> tuple[np.ndarray, Spectrum | None]:
    if isinstance(x, Spectrum):
        return x.values, x
    return np.asarray(x, dtype=np.float64), None


def _rewrap(values: np.ndarray, template: Spectrum | None):
    if template is None:
        return values
    return Spectrum(values=values, label=template.label, coord=template.coord)


def noise_augment(
    model: ClassNoiseModel,
    x,
    noise_scale: float,
    rng: np.random.Generator,
    label: int | None = None,
):
    """x plus per-band Gaussian noise of variance noise_scale * sigma^2.

    The sigma vector is the one of ``label`` (falling back to the label
    carried by a Spectrum input); with no label at all, the pooled sigma
    over the whole training set is used.
    """
    if noise_scale < 0:
        raise ConfigError("noise_scale must be >= 0")
    vec, template = _unwrap(x)
    if vec.shape != (model.bands,):
        raise DimError(f"expected {model.bands} bands, got shape {vec.shape}")
    if label is None and template is not None:
        label = template.label
    sigma = model.sigma_for(label)
    out = vec + rng.normal(0.0, np.sqrt(noise_scale) * sigma)
    return _rewrap(out, template)


def pca_augment(
    model: PCAModel, x, alpha: float, components: Sequence[int] = (1,)
):
    """Rescale chosen principal-component coordinates by alpha and map
    back through all components, so the rest of the spectrum is intact."""
    if not np.isfinite(alpha):
        raise ConfigError("alpha must be finite")
    if not components or any(not 1 <= c <= model.bands for c in components):
        raise ConfigError(
            f"components must be 1-based indices within [1, {model.bands}]"
        )
    vec, template = _unwrap(x)
    coords = project(model, vec)
    idx = np.array([c - 1 for c in components])
    coords[idx] *= alpha
    return _rewrap(backproject(model, coords), template)


def draw_alpha(config: AugmentConfig, rng: np.random.Generator) -> float:
    """One fresh uniform draw from [alpha_min, alpha_max]."""
    return float(rng.uniform(config.alpha_min, config.alpha_max))


class Augmenter(Protocol):
    """A fitted synthesizer: produces one variant of one sample."""

    method: str

    def synthesize(
        self, x: np.ndarray, label: int | None, rng: np.random.Generator
    ) -> np.ndarray: ...


class PCAAugmenter:
    method = "pca"

    def __init__(self, model: PCAModel, config: AugmentConfig):
        self.model = model
        self.config = config

    def synthesize(self, x, label, rng):
        alpha = draw_alpha(self.config, rng)
        return pca_augment(self.model, x, alpha, self.config.components)


class NoiseAugmenter:
    method = "noise"

    def __init__(self, model: ClassNoiseModel, config: AugmentConfig):
        self.model = model
        self.config = config

    def synthesize(self, x, label, rng):
        return noise_augment(self.model, x, self.config.noise_scale, rng, label=label)


def build_augmenter(
    config: AugmentConfig, train_values: np.ndarray, train_labels: np.ndarray
) -> PCAAugmenter | NoiseAugmenter:
    """Fit the model behind ``config.method`` on the original training set."""
    if config.method == "pca":
        return PCAAugmenter(_pca.fit(train_values), config)
    return NoiseAugmenter(noise_fit(train_values, train_labels), config)


def enlargement_quota(counts: dict[int, int]) -> dict[int, int]:
    """Synthetics to add per class: a class at the majority count doubles,
    any other class gains min(n_c, n_max - n_c), so no class ever exceeds
    max(n_max, 2 * n_c)."""
    if not counts:
        raise DegenerateError("no classes to enlarge")
    n_max = max(counts.values())
    return {
        c: n if n == n_max else min(n, n_max - n) for c, n in counts.items()
    }


def offline_enlarge(
    values: np.ndarray,
    labels: np.ndarray,
    config: AugmentConfig,
    rng: np.random.Generator,
    augmenter: Augmenter | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grow a training set by per-class quotas of synthetic samples.

    Source samples are drawn uniformly with replacement within each class.
    Returns (values, labels, synthetic flags) with the originals first, in
    their input order, then synthetics grouped by ascending class.

    ``augmenter`` defaults to one freshly fit on the given (original)
    samples; pass a prefit one to share it with online augmentation.
    """
    values, labels = _values_labels(values, labels)
    if values.shape[0] == 0:
        raise DegenerateError("cannot enlarge an empty training set")
    if augmenter is None:
        augmenter = build_augmenter(config, values, labels)
    counts = {c: int((labels == c).sum()) for c in sorted(set(labels.tolist()))}
    quota = enlargement_quota(counts)
    synth_rows = []
    synth_labels = []
    for c in sorted(quota):
        class_rows = values[labels == c]
        picks = rng.integers(0, len(class_rows), size=quota[c])
        for i in picks:
            synth_rows.append(augmenter.synthesize(class_rows[i], c, rng))
            synth_labels.append(c)
    if synth_rows:
        out_values = np.vstack([values, np.array(synth_rows)])
        out_labels = np.concatenate([labels, np.array(synth_labels, dtype=int)])
    else:
        out_values, out_labels = values.copy(), labels.copy()
    flags = np.zeros(len(out_labels), dtype=bool)
    flags[len(labels) :] = True
    return out_values, out_labels, flags
