"""Raw-format ingestion and persistence for cubes, labels, splits and samples.

All binary formats are little-endian and fixed-layout so they can be read
from any language:

* cube file:   ``HSR1`` magic, u32 height/width/bands, then
  height*width*bands float32 values, pixel-interleaved, row-major.
* label file:  ``HSL1`` magic, u32 height/width, then height*width u16
  labels (0 = unlabeled).
* sample file: ``HSS1`` magic, u32 count/bands, then per record a u16
  label, a u8 synthetic flag and ``bands`` float64 values.
* split file:  UTF-8 text, header line ``row,col,label,role`` and one
  ``row,col,label,role`` record per line.

In-memory types are immutable after construction; storage is float32 for
cubes while all computation downstream runs in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DimError, FormatError, TruncatedError

CUBE_MAGIC = b"HSR1"
LABEL_MAGIC = b"HSL1"
SAMPLE_MAGIC = b"HSS1"
SPLIT_HEADER = "row,col,label,role"
ROLES = ("train", "val", "test")


@dataclass(frozen=True)
class HSICube:
    """A hyperspectral raster with shape (height, width, bands), float32."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 3 or min(v.shape) < 1:
            raise DimError(f"cube must be (height, width, bands), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("cube contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    def spectrum_at(self, row: int, col: int) -> np.ndarray:
        """Pixel spectrum as a float64 vector."""
        return self.values[row, col].astype(np.float64)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class labels; 0 is background, classes run 1..n_classes.

    ``class_mapping`` records how raw file labels were compacted into the
    contiguous 1..C range (identity when the file was already contiguous).
    """

    labels: np.ndarray
    class_mapping: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.uint16)
        if lab.ndim != 2 or min(lab.shape) < 1:
            raise DimError(f"labels must be 2-D, got shape {lab.shape}")
        present = np.unique(lab[lab > 0])
        if present.size and not np.array_equal(
            present, np.arange(1, present.size + 1)
        ):
            raise DataError(
                "class ids must be contiguous from 1; compact with compact_labels()"
            )
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if not self.class_mapping:
            object.__setattr__(
                self, "class_mapping", {int(c): int(c) for c in present}
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())

    def labeled_coords(self) -> np.ndarray:
        """(N, 2) array of (row, col) for every nonzero-label pixel, row-major."""
        rows, cols = np.nonzero(self.labels)
        return np.stack([rows, cols], axis=1)

    def class_histogram(self) -> dict[int, int]:
        counts = np.bincount(self.labels.ravel(), minlength=self.n_classes + 1)
        return {c: int(counts[c]) for c in range(1, self.n_classes + 1)}


@dataclass(frozen=True)
class Spectrum:
    """One sample: a band vector plus optional label and pixel coordinate."""

    values: np.ndarray
    label: int | None = None
    coord: tuple[int, int] | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimError(f"spectrum must be 1-D, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def compact_labels(raw: np.ndarray) -> tuple[np.ndarray, dict[int, int]]:
    """Remap arbitrary positive label ids onto 1..C, preserving order.

    Returns the remapped grid and the original->compact mapping.
    """
    raw = np.asarray(raw)
    present = np.unique(raw[raw > 0])
    mapping = {int(orig): i + 1 for i, orig in enumerate(present)}
    lut = np.zeros(int(raw.max()) + 1 if raw.size else 1, dtype=np.uint16)
    for orig, compact in mapping.items():
        lut[orig] = compact
    return lut[raw], mapping


def _read_exact(buf: bytes, offset: int, size: int, what: str) -> bytes:
    if len(buf) < offset + size:
        raise TruncatedError(f"file ends inside {what}")
    return buf[offset : offset + size]


def save_cube(cube: HSICube, path: str | Path) -> None:
    header = CUBE_MAGIC + struct.pack("<III", cube.height, cube.width, cube.bands)
    payload = cube.values.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_cube(path: str | Path) -> HSICube:
    buf = Path(path).read_bytes()
    if _read_exact(buf, 0, 4, "magic") != CUBE_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {CUBE_MAGIC!r}")
    h, w, b = struct.unpack("<III", _read_exact(buf, 4, 12, "header"))
    if min(h, w, b) < 1:
        raise FormatError(f"{path}: non-positive dimension in header ({h},{w},{b})")
    expected = 16 + 4 * h * w * b
    if len(buf) != expected:
        raise TruncatedError(
            f"{path}: header promises {expected} bytes, file has {len(buf)}"
        )
    values = np.frombuffer(buf, dtype="<f4", offset=16).reshape(h, w, b)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite reflectance value")
    return HSICube(values=values)


def save_labels(labels: LabelMap, path: str | Path) -> None:
    header = LABEL_MAGIC + struct.pack("<II", labels.height, labels.width)
    Path(path).write_bytes(header + labels.labels.astype("<u2").tobytes())


def load_labels(path: str | Path) -> LabelMap:
    buf = Path(path).read_bytes()
    if _read_exact(buf, 0, 4, "magic") != LABEL_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {LABEL_MAGIC!r}")
    h, w = struct.unpack("<II", _read_exact(buf, 4, 8, "header"))
    if min(h, w) < 1:
        raise FormatError(f"{path}: non-positive dimension in header ({h},{w})")
    expected = 12 + 2 * h * w
    if len(buf) != expected:
        raise TruncatedError(
            f"{path}: header promises {expected} bytes, file has {len(buf)}"
        )
    raw = np.frombuffer(buf, dtype="<u2", offset=12).reshape(h, w)
    compacted, mapping = compact_labels(raw)
    return LabelMap(labels=compacted, class_mapping=mapping)


def save_split(split, path: str | Path) -> None:
    """Write a SplitSet as the text split format (one record per pixel)."""
    lines = [SPLIT_HEADER]
    for role in ROLES:
        for row, col, label in getattr(split, role):
            lines.append(f"{row},{col},{label},{role}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_split(path: str | Path):
    """Read a split file back into a SplitSet (scenario metadata is not stored)."""
    from .splits import SplitSet  # deferred: splits builds on hsio types

    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != SPLIT_HEADER:
        raise FormatError(f"{path}: missing '{SPLIT_HEADER}' header line")
    buckets: dict[str, list[tuple[int, int, int]]] = {r: [] for r in ROLES}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{ln}: expected 4 fields, got {len(parts)}")
        try:
            row, col, label = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer field") from exc
        role = parts[3].strip()
        if role not in ROLES:
            raise FormatError(f"{path}:{ln}: unknown role {role!r}")
        buckets[role].append((row, col, label))
    return SplitSet(train=buckets["train"], val=buckets["val"], test=buckets["test"])


def save_samples(
    values: np.ndarray,
    labels: Sequence[int],
    synthetic: Sequence[bool],
    path: str | Path,
) -> None:
    """Persist an (enlarged) sample list: spectra + labels + synthetic flags."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DimError("sample values must be (count, bands)")
    n, b = values.shape
    if len(labels) != n or len(synthetic) != n:
        raise DimError("labels/synthetic flags must match sample count")
    rec = np.dtype([("label", "<u2"), ("synthetic", "u1"), ("values", "<f8", (b,))])
    out = np.empty(n, dtype=rec)
    out["label"] = np.asarray(labels, dtype=np.uint16)
    out["synthetic"] = np.asarray(synthetic, dtype=np.uint8)
    out["values"] = values
    header = SAMPLE_MAGIC + struct.pack("<II", n, b)
    Path(path).write_bytes(header + out.tobytes())


def load_samples(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (values (N,b) float64, labels (N,) int, synthetic (N,) bool)."""
    buf = Path(path).read_bytes()
    if _read_exact(buf, 0, 4, "magic") != SAMPLE_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {SAMPLE_MAGIC!r}")
    n, b = struct.unpack("<II", _read_exact(buf, 4, 8, "header"))
    rec = np.dtype([("label", "<u2"), ("synthetic", "u1"), ("values", "<f8", (b,))])
    expected = 12 + n * rec.itemsize
    if len(buf) != expected:
        raise TruncatedError(
            f"{path}: header promises {expected} bytes, file has {len(buf)}"
        )
    out = np.frombuffer(buf, dtype=rec, offset=12)
    values = out["values"].astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite sample value")
    return values, out["label"].astype(int), out["synthetic"].astype(bool)


def generate_synthetic(
    classes: int,
    bands: int,
    per_class: int,
    seed: int,
    spread: float = 0.05,
) -> tuple[HSICube, LabelMap]:
    """Build a deterministic toy scene: one Gaussian blob per class.

    Class c occupies grid row c-1; class means are drawn uniformly in
    [0.25, 0.75] per band and samples scatter around them with the given
    per-band standard deviation. Pure in all arguments including seed.
    """
    if min(classes, bands, per_class) < 1:
        raise DimError("classes, bands and per_class must all be >= 1")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.25, 0.75, size=(classes, bands))
    values = np.empty((classes, per_class, bands), dtype=np.float64)
    for c in range(classes):
        values[c] = means[c] + rng.normal(0.0, spread, size=(per_class, bands))
    cube = HSICube(values=values.astype(np.float32))
    labels = np.repeat(
        np.arange(1, classes + 1, dtype=np.uint16)[:, None], per_class, axis=1
    )
    return cube, LabelMap(labels=labels)


def extract_spectra(
    cube: HSICube, coords: Iterable[tuple[int, int, int]]
) -> tuple[np.ndarray, np.ndarray]:
    """Gather (row, col, label) records into a float64 matrix + label vector."""
    coords = list(coords)
    if not coords:
        return np.empty((0, cube.bands)), np.empty(0, dtype=int)
    rows = np.array([r for r, _, _ in coords])
    cols = np.array([c for _, c, _ in coords])
    labels = np.array([l for _, _, l in coords], dtype=int)
    return cube.values[rows, cols].astype(np.float64), labels


@dataclass(frozen=True)
class BandScaler:
    """Per-band min-max scaling to [0, 1], fit on training pixels only.

    Constant bands (max == min) map to 0. Applying the scaler to pixels
    outside the training range can legitimately fall outside [0, 1].
    """

    band_min: np.ndarray
    band_max: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = self.band_max - self.band_min
        safe = np.where(span > 0.0, span, 1.0)
        return (x - self.band_min) / safe


def fit_band_scaler(train_values: np.ndarray) -> BandScaler:
    train_values = np.asarray(train_values, dtype=np.float64)
    if train_values.ndim != 2 or train_values.shape[0] < 1:
        raise DimError("scaler needs a non-empty (count, bands) matrix")
    return BandScaler(
        band_min=train_values.min(axis=0), band_max=train_values.max(axis=0)
    )
