"""A small 1D spectral CNN, implemented from scratch on numpy.

Architecture, applied to one pixel's band vector:
conv (valid, stride 1) -> batch norm -> ReLU -> max pool (2, stride 2)
-> flatten -> dense -> ReLU -> dense -> ReLU -> dense -> softmax.

Everything runs in float64: forward, analytic backward (including the
batch-norm batch statistics), ADAM, and plateau-based early stopping.
Class labels are 1-based everywhere; row i of a probability matrix is a
distribution over classes 1..C.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ConfigError,
    DimError,
    FormatError,
    NumericError,
    TruncatedError,
)
from .seeding import rng_for

BN_EPS = 1e-5
LOG_CLAMP = 1e-12
CHECKPOINT_MAGIC = "CNN1"

# serialization and ADAM iterate over parameters in this fixed order
PARAM_KEYS = (
    "conv_w",
    "conv_b",
    "bn_gamma",
    "bn_beta",
    "fc1_w",
    "fc1_b",
    "fc2_w",
    "fc2_b",
    "out_w",
    "out_b",
)
BUFFER_KEYS = ("bn_mean", "bn_var")


@dataclass(frozen=True)
class CNNConfig:
    """Architecture and training hyperparameters."""

    bands: int
    classes: int
    kernels: int = 200
    kernel_len: int = 5
    conv_stride: int = 1
    pool_size: int = 2
    pool_stride: int = 2
    dense1: int = 512
    dense2: int = 128
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    patience: int = 15
    max_epochs: int = 1000
    bn_momentum: float = 0.1
    seed: int = 0

    def __post_init__(self):
        counts = (
            self.bands,
            self.classes,
            self.kernels,
            self.kernel_len,
            self.dense1,
            self.dense2,
            self.batch_size,
            self.patience,
            self.max_epochs,
        )
        if any(v < 1 for v in counts):
            raise ConfigError("all size/count fields must be >= 1")
        if self.bands < self.kernel_len:
            raise ConfigError(
                f"bands ({self.bands}) must be >= kernel_len ({self.kernel_len})"
            )
        if self.conv_stride != 1:
            raise ConfigError("only conv_stride=1 is supported")
        if self.pool_size != self.pool_stride or self.pool_size < 1:
            raise ConfigError("pooling must be non-overlapping (size == stride)")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("ADAM betas must lie in [0, 1)")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ConfigError("learning_rate and adam_eps must be > 0")
        if not 0 < self.bn_momentum <= 1:
            raise ConfigError("bn_momentum must lie in (0, 1]")
        if self.conv_len // self.pool_stride < 1:
            raise ConfigError("pooled feature length is zero; input too short")

    @property
    def conv_len(self) -> int:
        return self.bands - self.kernel_len + 1

    @property
    def pooled_len(self) -> int:
        return self.conv_len // self.pool_stride

    @property
    def flat_dim(self) -> int:
        return self.kernels * self.pooled_len


def _fan_in_normal(rng, fan_in, shape):
    return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)


class CNNModel:
    """Parameters, batch-norm buffers, and ADAM state for one network.

    ``training`` selects batch statistics (True) or running statistics
    (False) in batch norm; train() flips it and predict_proba always runs
    in inference mode.
    """

    def __init__(self, config: CNNConfig):
        self.config = config
        rng = rng_for(config.seed, stage="cnn-init")
        c = config
        self.params: dict[str, np.ndarray] = {
            "conv_w": _fan_in_normal(rng, c.kernel_len, (c.kernels, c.kernel_len)),
            "conv_b": np.zeros(c.kernels),
            "bn_gamma": np.ones(c.kernels),
            "bn_beta": np.zeros(c.kernels),
            "fc1_w": _fan_in_normal(rng, c.flat_dim, (c.flat_dim, c.dense1)),
            "fc1_b": np.zeros(c.dense1),
            "fc2_w": _fan_in_normal(rng, c.dense1, (c.dense1, c.dense2)),
            "fc2_b": np.zeros(c.dense2),
            "out_w": _fan_in_normal(rng, c.dense2, (c.dense2, c.classes)),
            "out_b": np.zeros(c.classes),
        }
        self.buffers: dict[str, np.ndarray] = {
            "bn_mean": np.zeros(c.kernels),
            "bn_var": np.ones(c.kernels),
        }
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.step = 0
        self.training = False

    # ---------------- forward ----------------

    def _check_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.config.bands:
            raise DimError(
                f"expected (batch, {self.config.bands}) spectra, got {x.shape}"
            )
        return x

    def _forward(self, x: np.ndarray, training: bool) -> dict[str, np.ndarray]:
        p, c = self.params, self.config
        windows = sliding_window_view(x, c.kernel_len, axis=1)  # (B, L, k)
        conv = (
            np.einsum("blu,ju->bjl", windows, p["conv_w"], optimize=True)
            + p["conv_b"][None, :, None]
        )
        if training:
            mean = conv.mean(axis=(0, 2))
            var = conv.var(axis=(0, 2))
            m = c.bn_momentum
            self.buffers["bn_mean"] = (1 - m) * self.buffers["bn_mean"] + m * mean
            self.buffers["bn_var"] = (1 - m) * self.buffers["bn_var"] + m * var
        else:
            mean, var = self.buffers["bn_mean"], self.buffers["bn_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (conv - mean[None, :, None]) * inv_std[None, :, None]
        bn = p["bn_gamma"][None, :, None] * xhat + p["bn_beta"][None, :, None]
        act = np.maximum(bn, 0.0)

        s = c.pool_stride
        trimmed = act[:, :, : c.pooled_len * s].reshape(
            len(x), c.kernels, c.pooled_len, s
        )
        pool_arg = trimmed.argmax(axis=3)
        pooled = np.take_along_axis(trimmed, pool_arg[..., None], axis=3)[..., 0]
        flat = pooled.reshape(len(x), c.flat_dim)

        z1 = flat @ p["fc1_w"] + p["fc1_b"]
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ p["fc2_w"] + p["fc2_b"]
        h2 = np.maximum(z2, 0.0)
        logits = h2 @ p["out_w"] + p["out_b"]
        if not np.all(np.isfinite(logits)):
            raise NumericError("non-finite activations in forward pass")
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        return {
            "x": x,
            "windows": windows,
            "inv_std": inv_std,
            "xhat": xhat,
            "bn": bn,
            "act": act,
            "pool_arg": pool_arg,
            "flat": flat,
            "z1": z1,
            "h1": h1,
            "z2": z2,
            "h2": h2,
            "probs": probs,
        }

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode class probabilities, one row per spectrum."""
        x = self._check_batch(x)
        out = np.empty((len(x), self.config.classes))
        for start in range(0, len(x), 512):  # bound activation memory
            chunk = x[start : start + 512]
            out[start : start + len(chunk)] = self._forward(chunk, False)["probs"]
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Class labels (1-based); ties argmax to the lowest class id."""
        return self.predict_proba(x).argmax(axis=1) + 1

    # ---------------- backward ----------------

    def loss_and_gradients(
        self, x: np.ndarray, labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean softmax cross-entropy and exact parameter gradients.

        Training-mode forward: gradients include the dependence of the
        batch-norm statistics on the batch itself.
        """
        x = self._check_batch(x)
        labels = np.asarray(labels, dtype=int)
        c, p = self.config, self.params
        if labels.shape != (len(x),):
            raise DimError("one label per spectrum required")
        if labels.min() < 1 or labels.max() > c.classes:
            raise DimError(f"labels must lie in 1..{c.classes}")
        cache = self._forward(x, training=True)
        b = len(x)
        probs = cache["probs"]
        picked = probs[np.arange(b), labels - 1]
        loss = float(-np.log(np.maximum(picked, LOG_CLAMP)).mean())
        if not np.isfinite(loss):
            raise NumericError("non-finite training loss")

        dlogits = probs.copy()
        dlogits[np.arange(b), labels - 1] -= 1.0
        dlogits /= b

        g: dict[str, np.ndarray] = {}
        g["out_w"] = cache["h2"].T @ dlogits
        g["out_b"] = dlogits.sum(axis=0)
        dh2 = dlogits @ p["out_w"].T
        dz2 = dh2 * (cache["z2"] > 0)
        g["fc2_w"] = cache["h1"].T @ dz2
        g["fc2_b"] = dz2.sum(axis=0)
        dh1 = dz2 @ p["fc2_w"].T
        dz1 = dh1 * (cache["z1"] > 0)
        g["fc1_w"] = cache["flat"].T @ dz1
        g["fc1_b"] = dz1.sum(axis=0)
        dflat = dz1 @ p["fc1_w"].T

        s = c.pool_stride
        dpool = dflat.reshape(b, c.kernels, c.pooled_len)
        dtrim = np.zeros((b, c.kernels, c.pooled_len, s))
        np.put_along_axis(dtrim, cache["pool_arg"][..., None], dpool[..., None], 3)
        dact = np.zeros((b, c.kernels, c.conv_len))
        dact[:, :, : c.pooled_len * s] = dtrim.reshape(b, c.kernels, c.pooled_len * s)

        dbn = dact * (cache["bn"] > 0)
        g["bn_gamma"] = (dbn * cache["xhat"]).sum(axis=(0, 2))
        g["bn_beta"] = dbn.sum(axis=(0, 2))
        dxhat = dbn * p["bn_gamma"][None, :, None]
        mean_dxhat = dxhat.mean(axis=(0, 2), keepdims=True)
        mean_dxhat_xhat = (dxhat * cache["xhat"]).mean(axis=(0, 2), keepdims=True)
        dconv = (
            dxhat - mean_dxhat - cache["xhat"] * mean_dxhat_xhat
        ) * cache["inv_std"][None, :, None]

        g["conv_w"] = np.einsum(
            "bjl,blu->ju", dconv, cache["windows"], optimize=True
        )
        g["conv_b"] = dconv.sum(axis=(0, 2))
        return loss, g

    # ---------------- optimizer ----------------

    def adam_step(self, grads: dict[str, np.ndarray]) -> None:
        """One ADAM update with bias correction over every parameter."""
        c = self.config
        self.step += 1
        bc1 = 1.0 - c.beta1**self.step
        bc2 = 1.0 - c.beta2**self.step
        total = 0.0
        for k in PARAM_KEYS:
            if grads[k].shape != self.params[k].shape:
                raise DimError(f"gradient for {k} has shape {grads[k].shape}")
            m = self.adam_m[k]
            v = self.adam_v[k]
            m *= c.beta1
            m += (1 - c.beta1) * grads[k]
            v *= c.beta2
            v += (1 - c.beta2) * grads[k] ** 2
            self.params[k] -= (
                c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)
            )
            total += float(self.params[k].sum())
        if not np.isfinite(total):
            raise NumericError(f"non-finite parameter after ADAM step {self.step}")

    # ---------------- snapshots ----------------

    def state(self) -> dict:
        return {
            "params": {k: v.copy() for k, v in self.params.items()},
            "buffers": {k: v.copy() for k, v in self.buffers.items()},
            "adam_m": {k: v.copy() for k, v in self.adam_m.items()},
            "adam_v": {k: v.copy() for k, v in self.adam_v.items()},
            "step": self.step,
        }

    def restore(self, state: dict) -> None:
        self.params = {k: v.copy() for k, v in state["params"].items()}
        self.buffers = {k: v.copy() for k, v in state["buffers"].items()}
        self.adam_m = {k: v.copy() for k, v in state["adam_m"].items()}
        self.adam_v = {k: v.copy() for k, v in state["adam_v"].items()}
        self.step = state["step"]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    seconds: float


def train(
    model: CNNModel,
    train_values: np.ndarray,
    train_labels: np.ndarray,
    val_values: np.ndarray,
    val_labels: np.ndarray,
) -> list[EpochRecord]:
    """Mini-batch ADAM training with plateau early stopping.

    Epochs run until the best validation accuracy fails to strictly
    improve for ``patience`` consecutive epochs (or max_epochs). The model
    is left at the best-validation-accuracy snapshot. The returned history
    is deterministic given (data, config); only ``seconds`` varies.
    """
    c = model.config
    train_values = np.asarray(train_values, dtype=np.float64)
    val_values = np.asarray(val_values, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=int)
    val_labels = np.asarray(val_labels, dtype=int)
    if len(train_values) == 0 or len(val_values) == 0:
        raise DimError("training and validation sets must both be non-empty")

    shuffle_rng = rng_for(c.seed, stage="cnn-shuffle")
    history: list[EpochRecord] = []
    best_acc = -1.0
    best_state = model.state()
    stall = 0
    model.training = True
    try:
        for epoch in range(c.max_epochs):
            started = time.perf_counter()
            order = shuffle_rng.permutation(len(train_values))
            loss_sum = 0.0
            for start in range(0, len(order), c.batch_size):
                idx = order[start : start + c.batch_size]
                loss, grads = model.loss_and_gradients(
                    train_values[idx], train_labels[idx]
                )
                model.adam_step(grads)
                loss_sum += loss * len(idx)
            val_acc = float(
                (model.predict(val_values) == val_labels).mean()
            )
            history.append(
                EpochRecord(
                    epoch=epoch,
                    train_loss=loss_sum / len(order),
                    val_accuracy=val_acc,
                    seconds=time.perf_counter() - started,
                )
            )
            if val_acc > best_acc:
                best_acc = val_acc
                best_state = model.state()
                stall = 0
            else:
                stall += 1
                if stall >= c.patience:
                    break
    finally:
        model.training = False
    model.restore(best_state)
    return history


# ---------------- checkpointing ----------------

_CONFIG_FIELDS = (
    ("bands", int),
    ("classes", int),
    ("kernels", int),
    ("kernel_len", int),
    ("conv_stride", int),
    ("pool_size", int),
    ("pool_stride", int),
    ("dense1", int),
    ("dense2", int),
    ("learning_rate", float),
    ("beta1", float),
    ("beta2", float),
    ("adam_eps", float),
    ("batch_size", int),
    ("patience", int),
    ("max_epochs", int),
    ("bn_momentum", float),
    ("seed", int),
)


def save_model(model: CNNModel, path: str | Path) -> None:
    """Versioned checkpoint: a config-echo header line, the step counter,
    then every tensor (parameters, buffers, ADAM moments) as little-endian
    float64 in declared order. Round-trip is bit-exact."""
    cfg = model.config
    header_fields = " ".join(
        repr(getattr(cfg, name)) for name, _ in _CONFIG_FIELDS
    )
    out = bytearray(f"{CHECKPOINT_MAGIC} {header_fields}\n".encode("ascii"))
    out += struct.pack("<Q", model.step)
    for k in PARAM_KEYS:
        out += model.params[k].astype("<f8").tobytes()
    for k in BUFFER_KEYS:
        out += model.buffers[k].astype("<f8").tobytes()
    for k in PARAM_KEYS:
        out += model.adam_m[k].astype("<f8").tobytes()
    for k in PARAM_KEYS:
        out += model.adam_v[k].astype("<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_model(path: str | Path) -> CNNModel:
    buf = Path(path).read_bytes()
    newline = buf.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing checkpoint header")
    parts = buf[:newline].decode("ascii", errors="replace").split()
    if len(parts) != 1 + len(_CONFIG_FIELDS) or parts[0] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint header")
    kwargs = {}
    try:
        for (name, kind), raw in zip(_CONFIG_FIELDS, parts[1:]):
            kwargs[name] = kind(raw)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed config field") from exc
    model = CNNModel(CNNConfig(**kwargs))
    body = memoryview(buf)[newline + 1 :]
    if len(body) < 8:
        raise TruncatedError(f"{path}: missing step counter")
    model.step = struct.unpack("<Q", body[:8])[0]
    offset = 8

    def read_into(target: dict[str, np.ndarray], key: str):
        nonlocal offset
        n = target[key].size
        end = offset + 8 * n
        if end > len(body):
            raise TruncatedError(f"{path}: file ends inside tensor {key!r}")
        target[key] = np.frombuffer(body[offset:end], dtype="<f8").reshape(
            target[key].shape
        ).copy()
        offset = end

    for k in PARAM_KEYS:
        read_into(model.params, k)
    for k in BUFFER_KEYS:
        read_into(model.buffers, k)
    for k in PARAM_KEYS:
        read_into(model.adam_m, k)
    for k in PARAM_KEYS:
        read_into(model.adam_v, k)
    if offset != len(body):
        raise FormatError(f"{path}: {len(body) - offset} trailing bytes")
    return model
