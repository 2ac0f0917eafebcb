#!/usr/bin/env python3
"""Convert MATLAB-container benchmark scenes into HSR1/HSL1 raw files.

The public hyperspectral benchmarks ship as ``.mat`` containers, either
the classic v5 layout (read by :func:`scipy.io.loadmat`) or the v7.3
HDF5 layout (read by :mod:`h5py`).  MATLAB stores arrays column-major,
so v7.3 datasets appear with reversed axes when read as C-order; this
script restores (rows, cols, bands) order and records the transpose it
applied in the conversion manifest.

Usage::

    convert.py --in scene.mat --var data --out-cube x.hsr \
               [--labels-var gt --out-labels x.hsl] [--labels-in gt.mat]

Ground truth may live in the same container or, as the benchmarks are
actually distributed, in a second container passed via ``--labels-in``.
Integer reflectances are cast to float32 unchanged, so conversion is
lossless for every integer-valued source.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np
import scipy.io

from hyperaug.errors import HyperAugError
from hyperaug.hsio import HSICube, LabelMap, compact_labels, save_cube, save_labels

# h5py reads a MATLAB v7.3 (column-major) array with its axes reversed.
HDF5_CUBE_AXES = (2, 1, 0)
HDF5_LABEL_AXES = (1, 0)


class ConverterError(Exception):
    """Input does not satisfy the conversion contract."""


class VariableNotFoundError(ConverterError):
    """The requested variable is absent from the container."""


class RankError(ConverterError):
    """The variable has the wrong number of dimensions for its role."""


@dataclass(frozen=True)
class ConversionManifest:
    """What was converted, where it went and how to verify it."""

    source: str
    variable: str
    out_cube: str
    cube_shape: tuple[int, int, int]
    cube_axes: tuple[int, ...] | None
    cube_sha256: str
    labels_source: str | None = None
    labels_variable: str | None = None
    out_labels: str | None = None
    labels_shape: tuple[int, int] | None = None
    labels_axes: tuple[int, ...] | None = None
    labels_sha256: str | None = None
    class_histogram: dict[int, int] = field(default_factory=dict)
    class_mapping: dict[int, int] = field(default_factory=dict)


def read_matlab_array(path: str | Path, variable: str) -> tuple[np.ndarray, bool]:
    """Return ``(array, stored_transposed)`` for one container variable.

    ``stored_transposed`` is True when the container is v7.3/HDF5, whose
    column-major datasets come back axis-reversed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such container: {path}")
    try:
        contents = scipy.io.loadmat(path)
    except NotImplementedError:
        return _read_hdf5_variable(path, variable), True
    except (ValueError, TypeError) as exc:
        if h5py.is_hdf5(path):
            return _read_hdf5_variable(path, variable), True
        raise ConverterError(f"{path} is not a MATLAB container: {exc}") from exc
    available = sorted(k for k in contents if not k.startswith("__"))
    if variable not in contents:
        raise VariableNotFoundError(
            f"variable {variable!r} not in {path} (available: {', '.join(available)})"
        )
    return np.asarray(contents[variable]), False


def _read_hdf5_variable(path: Path, variable: str) -> np.ndarray:
    with h5py.File(path, "r") as f:
        # "#refs#" is v7.3 bookkeeping, not user data.
        available = sorted(k for k in f.keys() if not k.startswith("#"))
        if variable not in f:
            raise VariableNotFoundError(
                f"variable {variable!r} not in {path} "
                f"(available: {', '.join(available)})"
            )
        node = f[variable]
        if not isinstance(node, h5py.Dataset):
            raise ConverterError(
                f"variable {variable!r} in {path} is a group, not a numeric array"
            )
        return np.asarray(node[()])


def _as_cube(raw: np.ndarray, transposed: bool, variable: str):
    if raw.ndim != 3:
        raise RankError(
            f"cube variable {variable!r} must be 3-D (rows, cols, bands), "
            f"got shape {tuple(raw.shape)}"
        )
    axes = HDF5_CUBE_AXES if transposed else None
    if axes is not None:
        raw = raw.transpose(axes)
    if not np.issubdtype(raw.dtype, np.number) or np.iscomplexobj(raw):
        raise ConverterError(
            f"cube variable {variable!r} has non-numeric dtype {raw.dtype}"
        )
    values = raw.astype(np.float32)
    if np.issubdtype(raw.dtype, np.integer) and not np.array_equal(
        values.astype(np.int64), raw.astype(np.int64)
    ):
        raise ConverterError(
            f"integer values in {variable!r} exceed the exact float32 range"
        )
    return HSICube(values), axes


def _as_labels(raw: np.ndarray, transposed: bool, variable: str):
    if raw.ndim != 2:
        raise RankError(
            f"label variable {variable!r} must be 2-D (rows, cols), "
            f"got shape {tuple(raw.shape)}"
        )
    axes = HDF5_LABEL_AXES if transposed else None
    if axes is not None:
        raw = raw.transpose(axes)
    if not np.issubdtype(raw.dtype, np.number) or np.iscomplexobj(raw):
        raise ConverterError(
            f"label variable {variable!r} has non-numeric dtype {raw.dtype}"
        )
    if raw.size == 0:
        raise RankError(f"label variable {variable!r} is empty")
    if np.issubdtype(raw.dtype, np.floating):
        if not np.array_equal(raw, np.round(raw)):
            raise ConverterError(f"label variable {variable!r} has fractional values")
        raw = raw.astype(np.int64)
    if raw.min() < 0:
        raise ConverterError(f"label variable {variable!r} has negative ids")
    compacted, mapping = compact_labels(raw)
    return LabelMap(compacted, mapping), axes


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def convert(
    source: str | Path,
    variable: str,
    out_cube: str | Path,
    labels_variable: str | None = None,
    out_labels: str | Path | None = None,
    labels_source: str | Path | None = None,
) -> ConversionManifest:
    """Convert one scene (and optionally its ground truth) to raw files."""
    if (labels_variable is None) != (out_labels is None):
        raise ConverterError("--labels-var and --out-labels must be given together")

    raw, transposed = read_matlab_array(source, variable)
    cube, cube_axes = _as_cube(raw, transposed, variable)
    save_cube(cube, out_cube)

    labels_path = labels_source if labels_source is not None else source
    out_labels_str = None
    labels_shape = None
    labels_axes = None
    labels_sha = None
    histogram: dict[int, int] = {}
    mapping: dict[int, int] = {}
    if labels_variable is not None:
        raw_labels, lab_transposed = read_matlab_array(labels_path, labels_variable)
        labels, labels_axes = _as_labels(raw_labels, lab_transposed, labels_variable)
        if labels.labels.shape != cube.values.shape[:2]:
            raise ConverterError(
                f"label grid {labels.labels.shape} does not match "
                f"cube plane {cube.values.shape[:2]}"
            )
        save_labels(labels, out_labels)
        out_labels_str = str(out_labels)
        labels_shape = labels.labels.shape
        labels_sha = _sha256(out_labels)
        ids, counts = np.unique(labels.labels[labels.labels > 0], return_counts=True)
        histogram = {int(c): int(n) for c, n in zip(ids, counts)}
        mapping = dict(labels.class_mapping)

    return ConversionManifest(
        source=str(source),
        variable=variable,
        out_cube=str(out_cube),
        cube_shape=cube.values.shape,
        cube_axes=cube_axes,
        cube_sha256=_sha256(out_cube),
        labels_source=str(labels_path) if labels_variable is not None else None,
        labels_variable=labels_variable,
        out_labels=out_labels_str,
        labels_shape=labels_shape,
        labels_axes=labels_axes,
        labels_sha256=labels_sha,
        class_histogram=histogram,
        class_mapping=mapping,
    )


def format_manifest(manifest: ConversionManifest) -> str:
    def axes_note(axes):
        return "axes kept" if axes is None else "axes reordered " + ",".join(
            str(a) for a in axes
        )

    h, w, b = manifest.cube_shape
    lines = [
        f"cube: {h}x{w}x{b} <- {manifest.variable!r} in {manifest.source} "
        f"({axes_note(manifest.cube_axes)})",
        f"cube sha256: {manifest.cube_sha256}",
    ]
    if manifest.out_labels is not None:
        lh, lw = manifest.labels_shape
        lines.append(
            f"labels: {lh}x{lw}, {len(manifest.class_histogram)} classes <- "
            f"{manifest.labels_variable!r} in {manifest.labels_source} "
            f"({axes_note(manifest.labels_axes)})"
        )
        for cls in sorted(manifest.class_histogram):
            lines.append(f"  class {cls}: {manifest.class_histogram[cls]}")
        remapped = {k: v for k, v in manifest.class_mapping.items() if k != v}
        if remapped:
            pairs = ", ".join(f"{k}->{v}" for k, v in sorted(remapped.items()))
            lines.append(f"  remapped ids: {pairs}")
        lines.append(f"labels sha256: {manifest.labels_sha256}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Convert a MATLAB-container scene to HSR1/HSL1 raw files."
    )
    parser.add_argument("--in", dest="source", required=True, help="container file")
    parser.add_argument("--var", required=True, help="cube variable name")
    parser.add_argument("--out-cube", required=True, help="HSR1 output path")
    parser.add_argument("--labels-var", help="ground-truth variable name")
    parser.add_argument("--out-labels", help="HSL1 output path")
    parser.add_argument(
        "--labels-in",
        dest="labels_source",
        help="container holding the ground truth (default: --in)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = convert(
            args.source,
            args.var,
            args.out_cube,
            labels_variable=args.labels_var,
            out_labels=args.out_labels,
            labels_source=args.labels_source,
        )
    except (ConverterError, HyperAugError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_manifest(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())
