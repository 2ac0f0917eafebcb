"""Principal-component model: fit, project, backproject, reconstruction error.

The covariance is the population form C = (1/N) D Dᵀ with D holding the
centered samples as columns. Its eigendecomposition is computed by cyclic
Jacobi rotations, which is simple and accurate for the band counts that
occur here (b ≤ ~224); rotations within a sweep are batched over disjoint
index pairs so each sweep is a handful of vectorized row operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateError,
    DimError,
    FormatError,
    NumericError,
    TruncatedError,
)
from .hsio import Spectrum

PCA_MAGIC = "PCA1"
EIG_CLAMP = -1e-9


def _round_robin_pairs(n: int) -> list[list[tuple[int, int]]]:
    """Tournament schedule over indices 0..n-1: a list of rounds, each a
    list of disjoint (p, q) pairs, covering every pair exactly once."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [
            (min(players[i], players[m - 1 - i]), max(players[i], players[m - 1 - i]))
            for i in range(m // 2)
            if players[i] < n and players[m - 1 - i] < n
        ]
        rounds.append(pairs)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt((off * off).sum()))


def jacobi_eigh(
    matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted. Sweeps stop
    when the off-diagonal Frobenius norm of the scaled matrix drops below
    ``tol``, stops shrinking (the round-off floor), or ``max_sweeps`` pass.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimError(f"matrix must be square, got {a.shape}")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix contains non-finite entries")
    # normalize scale so the absolute tolerance is meaningful for any data
    scale = float(np.max(np.abs(np.diag(a)))) or 1.0
    a /= scale
    vt = np.eye(n)
    rounds = _round_robin_pairs(n)
    prev_off = np.inf
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off < tol or off >= prev_off:
            break
        prev_off = off
        for pairs in rounds:
            if not pairs:
                continue
            ps = np.fromiter((p for p, _ in pairs), dtype=int)
            qs = np.fromiter((q for _, q in pairs), dtype=int)
            apq = a[ps, qs]
            live = apq != 0.0
            if not live.any():
                continue
            ps, qs, apq = ps[live], qs[live], apq[live]
            theta = (a[qs, qs] - a[ps, ps]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cc, ss = c[:, None], s[:, None]
            for _pass in range(2):  # rows, then (via transpose) columns
                rp, rq = a[ps].copy(), a[qs]
                a[ps] = cc * rp - ss * rq
                a[qs] = ss * rp + cc * rq
                a = np.ascontiguousarray(a.T)
            rp, rq = vt[ps].copy(), vt[qs]
            vt[ps] = cc * rp - ss * rq
            vt[qs] = ss * rp + cc * rq
    return np.diag(a).copy() * scale, np.ascontiguousarray(vt.T)


@dataclass(frozen=True)
class PCAModel:
    """Centered orthonormal basis with per-component variances.

    ``basis`` holds principal components as columns, ordered by
    non-increasing eigenvalue; ``n_samples`` records the fit size.
    """

    mean: np.ndarray
    eigenvalues: np.ndarray
    basis: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        lam = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        phi = np.ascontiguousarray(self.basis, dtype=np.float64)
        b = mean.shape[0]
        if mean.ndim != 1 or lam.shape != (b,) or phi.shape != (b, b):
            raise DimError("mean/eigenvalues/basis dimensions are inconsistent")
        if np.any(np.diff(lam) > 0):
            raise NumericError("eigenvalues must be non-increasing")
        if lam[-1] < 0:
            raise NumericError("eigenvalues must be non-negative")
        if np.max(np.abs(phi.T @ phi - np.eye(b))) > 1e-8:
            raise NumericError("basis columns are not orthonormal")
        for arr in (mean, lam, phi):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "basis", phi)

    @property
    def bands(self) -> int:
        return self.mean.shape[0]


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        x = np.asarray(samples, dtype=np.float64)
    else:
        rows = [s.values if isinstance(s, Spectrum) else np.asarray(s) for s in samples]
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise DimError(f"spectra have mixed lengths {sorted(lengths)}")
        x = np.array(rows, dtype=np.float64)
    if x.ndim != 2:
        raise DimError(f"samples must form an (N, bands) matrix, got {x.shape}")
    return x


def fit(samples: Sequence[Spectrum] | np.ndarray) -> PCAModel:
    """Fit mean, eigenvalues, and principal components on a sample set.

    Eigenvectors get a deterministic sign: the entry of largest magnitude
    in each column is made non-negative (first such index on ties).
    """
    x = _as_matrix(samples)
    n, b = x.shape
    if n < 2:
        raise DegenerateError(f"need at least 2 samples to fit, got {n}")
    mean = x.mean(axis=0)
    d = x - mean
    cov = (d.T @ d) / n
    lam, phi = jacobi_eigh(cov)
    order = np.argsort(-lam, kind="stable")
    lam, phi = lam[order], phi[:, order]
    if lam[-1] < EIG_CLAMP:
        raise NumericError(
            f"covariance eigenvalue {lam[-1]:.3e} is negative beyond round-off"
        )
    lam = np.maximum(lam, 0.0)
    anchor = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[anchor, np.arange(b)])
    signs[signs == 0.0] = 1.0
    phi = phi * signs
    return PCAModel(mean=mean, eigenvalues=lam, basis=phi, n_samples=n)


def _check_bands(model: PCAModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x.values if isinstance(x, Spectrum) else x, dtype=np.float64)
    if x.shape[-1] != model.bands:
        raise DimError(
            f"expected {model.bands} bands on the last axis, got {x.shape[-1]}"
        )
    return x


def project(model: PCAModel, x) -> np.ndarray:
    """Coordinates Φᵀ(x − x̄); operates on the last axis, so batches work."""
    x = _check_bands(model, x)
    return (x - model.mean) @ model.basis


def backproject(model: PCAModel, coords) -> np.ndarray:
    """Inverse of project: Φ·coords + x̄ (exact when all bands are kept)."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[-1] != model.bands:
        raise DimError(
            f"expected {model.bands} coordinates on the last axis, "
            f"got {coords.shape[-1]}"
        )
    return coords @ model.basis.T + model.mean


def reconstruction_error(model: PCAModel, x, retained: int) -> tuple[float, float]:
    """Error after keeping only the first ``retained`` components.

    Returns (signed sum of per-band differences, sum of squared
    differences). The signed sum can vanish for a nonzero error, which is
    why the squared form exists alongside it.
    """
    x = _check_bands(model, x)
    if x.ndim != 1:
        raise DimError("reconstruction_error expects a single spectrum")
    if not 1 <= retained <= model.bands:
        raise DimError(f"retained must be in [1, {model.bands}], got {retained}")
    coords = project(model, x)
    coords[retained:] = 0.0
    diff = x - backproject(model, coords)
    return float(diff.sum()), float((diff * diff).sum())


def save_pca(model: PCAModel, path: str | Path) -> None:
    """Text header ``PCA1 <bands> <n_samples>`` then f64 payload: mean,
    eigenvalues, basis in column-major order. Round-trip is bit-exact."""
    header = f"{PCA_MAGIC} {model.bands} {model.n_samples}\n".encode("ascii")
    payload = (
        model.mean.astype("<f8").tobytes()
        + model.eigenvalues.astype("<f8").tobytes()
        + model.basis.astype("<f8").tobytes(order="F")
    )
    Path(path).write_bytes(header + payload)


def load_pca(path: str | Path) -> PCAModel:
    buf = Path(path).read_bytes()
    newline = buf.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing header line")
    parts = buf[:newline].decode("ascii", errors="replace").split()
    if len(parts) != 3 or parts[0] != PCA_MAGIC:
        raise FormatError(f"{path}: bad header, expected '{PCA_MAGIC} <b> <N>'")
    try:
        b, n = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer header field") from exc
    if b < 1 or n < 2:
        raise FormatError(f"{path}: implausible header values b={b}, N={n}")
    body = buf[newline + 1 :]
    expected = 8 * (b + b + b * b)
    if len(body) != expected:
        raise TruncatedError(
            f"{path}: header promises {expected} payload bytes, got {len(body)}"
        )
    mean = np.frombuffer(body, dtype="<f8", count=b)
    lam = np.frombuffer(body, dtype="<f8", count=b, offset=8 * b)
    phi = np.frombuffer(body, dtype="<f8", count=b * b, offset=16 * b)
    basis = phi.reshape((b, b), order="F")
    return PCAModel(mean=mean, eigenvalues=lam, basis=basis, n_samples=n)
