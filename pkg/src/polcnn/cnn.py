"""The sentence classifier: convolution banks, 1-max-pooling, dropout, softmax.

Forward, analytic backward, and Adam updates are hand-written in double
precision; the convolution inner loops live in :mod:`polcnn.kernels`. The
model is small enough that exact gradients are cheaper to own than an
autodiff framework, and the finite-difference suite holds them to account.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import kernels
from .embeddings import SentenceTensor
from .errors import ModelFormatError

__all__ = [
    "ModelConfig",
    "CnnModel",
    "AdamState",
    "ForwardCache",
    "Gradients",
    "init_model",
    "conv_valid",
    "max_pool_1",
    "softmax",
    "dropout",
    "forward",
    "cross_entropy",
    "backward",
    "adam_step",
    "predict",
    "save_model",
    "load_model",
    "model_to_bytes",
]

Gradients = dict[str, np.ndarray]


@dataclass(frozen=True)
class ModelConfig:
    d: int
    seq_len: int = 60
    widths: tuple[int, ...] = (2, 3, 4)
    filters_per_width: int = 100
    classes: int = 7
    dropout_rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(sorted(self.widths)))
        if self.d < 1 or self.seq_len < 1:
            raise ValueError("d and seq_len must be >= 1")
        if not self.widths or any(h < 1 or h > self.seq_len for h in self.widths):
            raise ValueError(f"widths {self.widths} must be non-empty, each in [1, seq_len]")
        if len(set(self.widths)) != len(self.widths):
            raise ValueError(f"duplicate widths in {self.widths}")
        if self.filters_per_width < 1:
            raise ValueError("filters_per_width must be >= 1")
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def feature_count(self) -> int:
        return self.filters_per_width * len(self.widths)


@dataclass
class CnnModel:
    config: ModelConfig
    conv_w: dict[int, np.ndarray]  # width -> (filters, width, d)
    conv_b: dict[int, np.ndarray]  # width -> (filters,)
    dense_w: np.ndarray  # (classes, feature_count)
    dense_b: np.ndarray  # (classes,)

    def param_items(self) -> Iterator[tuple[str, np.ndarray]]:
        """Parameters in the fixed declared order used everywhere (serialization,
        Adam state, gradient dicts)."""
        for h in self.config.widths:
            yield f"conv_w[{h}]", self.conv_w[h]
            yield f"conv_b[{h}]", self.conv_b[h]
        yield "dense_w", self.dense_w
        yield "dense_b", self.dense_b

    def copy(self) -> "CnnModel":
        return CnnModel(
            config=self.config,
            conv_w={h: w.copy() for h, w in self.conv_w.items()},
            conv_b={h: b.copy() for h, b in self.conv_b.items()},
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
        )

    def check_finite(self) -> None:
        for name, p in self.param_items():
            if not np.isfinite(p).all():
                raise FloatingPointError(f"parameter {name} contains NaN/Inf")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: CnnModel) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in model.param_items()},
            v={name: np.zeros_like(p) for name, p in model.param_items()},
        )


@dataclass
class ForwardCache:
    x: SentenceTensor
    pre: dict[int, np.ndarray]  # width -> (filters, positions) pre-activations
    argmax: dict[int, np.ndarray]  # width -> (filters,) pooled positions
    pooled: np.ndarray  # (F,) post-relu pooled features, before dropout
    mask: np.ndarray  # (F,) dropout mask including the 1/(1-p) scale
    features: np.ndarray  # (F,) pooled * mask, the dense layer input
    probs: np.ndarray  # (classes,)
    mode: str


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig, seed: int) -> CnnModel:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = {}, {}
    for h in config.widths:
        # Conv fans follow the usual convention: receptive field h*d, one
        # input channel in, filters_per_width output channels out.
        conv_w[h] = _glorot_uniform(
            rng,
            (config.filters_per_width, h, config.d),
            fan_in=h * config.d,
            fan_out=config.filters_per_width * h * config.d,
        )
        conv_b[h] = np.zeros(config.filters_per_width)
    dense_w = _glorot_uniform(
        rng,
        (config.classes, config.feature_count),
        fan_in=config.feature_count,
        fan_out=config.classes,
    )
    dense_b = np.zeros(config.classes)
    return CnnModel(config=config, conv_w=conv_w, conv_b=conv_b, dense_w=dense_w, dense_b=dense_b)


def conv_valid(x: SentenceTensor, w: np.ndarray, b: float) -> np.ndarray:
    """Single-filter convolution over the real token span, relu applied.

    Yields max(real_length - h + 1, 1) positions; when the sentence is
    shorter than the filter, the one window runs over zero padding.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("filter must be 2-D (width x dim)")
    if w.shape[0] > x.rows:
        raise ValueError(f"filter width {w.shape[0]} exceeds tensor rows {x.rows}")
    if w.shape[1] != x.dim:
        raise ValueError(f"filter dim {w.shape[1]} != tensor dim {x.dim}")
    pre, _, _ = kernels.conv_relu_pool(
        x.values, x.real_length, w[None, :, :], np.array([float(b)])
    )
    return np.maximum(pre[0], 0.0)


def max_pool_1(v: np.ndarray) -> tuple[float, int]:
    """Maximum entry and the lowest index attaining it."""
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("cannot pool an empty vector")
    idx = int(np.argmax(v))
    return float(v[idx]), idx


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def dropout(
    v: np.ndarray, p: float, mode: str, seed=None
) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout: kept entries scale by 1/(1-p) at train time so eval
    is the identity. Returns (output, mask); the mask carries the scale."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode {mode!r} not train/eval")
    if mode == "eval" or p == 0.0:
        mask = np.ones_like(v)
        return v.copy(), mask
    if seed is None:
        raise ValueError("train-mode dropout needs an rng seed")
    rng = np.random.default_rng(seed)
    keep = rng.random(v.shape) >= p
    mask = keep / (1.0 - p)
    return v * mask, mask


def forward(
    model: CnnModel, x: SentenceTensor, mode: str = "eval", seed=None
) -> tuple[np.ndarray, ForwardCache]:
    """Conv banks -> relu -> 1-max-pool -> concat -> dropout -> dense softmax.

    Eval mode ignores the seed and is deterministic.
    """
    cfg = model.config
    if x.dim != cfg.d:
        raise ValueError(f"tensor dim {x.dim} != model d {cfg.d}")
    if x.rows != cfg.seq_len:
        raise ValueError(f"tensor rows {x.rows} != model seq_len {cfg.seq_len}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode {mode!r} not train/eval")

    pre: dict[int, np.ndarray] = {}
    argmax: dict[int, np.ndarray] = {}
    pooled_parts = []
    for h in cfg.widths:
        pre_h, pooled_h, argmax_h = kernels.conv_relu_pool(
            x.values, x.real_length, model.conv_w[h], model.conv_b[h]
        )
        pre[h] = pre_h
        argmax[h] = argmax_h
        pooled_parts.append(pooled_h)
    pooled = np.concatenate(pooled_parts)

    features, mask = dropout(pooled, cfg.dropout_rate, mode, seed)
    logits = model.dense_w @ features + model.dense_b
    probs = softmax(logits)
    cache = ForwardCache(
        x=x, pre=pre, argmax=argmax, pooled=pooled, mask=mask,
        features=features, probs=probs, mode=mode,
    )
    return probs, cache


def cross_entropy(probs: np.ndarray, label: int) -> float:
    if not 0 <= label < len(probs):
        raise ValueError(f"label {label} outside [0, {len(probs)})")
    return -math.log(max(float(probs[label]), 1e-12))


def backward(model: CnnModel, cache: ForwardCache, label: int) -> Gradients:
    """Exact gradients of cross-entropy(softmax) through the whole pipeline.

    The pooled gradient routes only through each filter's argmax window,
    gated by relu; dropped features contribute nothing.
    """
    cfg = model.config
    if not 0 <= label < cfg.classes:
        raise ValueError(f"label {label} outside [0, {cfg.classes})")
    if cache.features.shape != (cfg.feature_count,) or cache.x.dim != cfg.d:
        raise ValueError("stale cache: shapes do not match this model")
    for h in cfg.widths:
        if cache.pre[h].shape[0] != cfg.filters_per_width:
            raise ValueError("stale cache: filter count mismatch")

    dlogits = cache.probs.copy()
    dlogits[label] -= 1.0

    grads: Gradients = {
        "dense_w": np.outer(dlogits, cache.features),
        "dense_b": dlogits,
    }
    dfeatures = model.dense_w.T @ dlogits
    dpooled = dfeatures * cache.mask

    n = cfg.filters_per_width
    for slot, h in enumerate(cfg.widths):
        dw = np.zeros_like(model.conv_w[h])
        db = np.zeros_like(model.conv_b[h])
        seg = slice(slot * n, (slot + 1) * n)
        kernels.conv_pool_backward(
            cache.x.values, cache.argmax[h], cache.pooled[seg], dpooled[seg], h, dw, db
        )
        grads[f"conv_w[{h}]"] = dw
        grads[f"conv_b[{h}]"] = db
    return grads


def adam_step(model: CnnModel, grads: Gradients, state: AdamState) -> tuple[CnnModel, AdamState]:
    """One Adam update with bias correction; mutates model and state in place."""
    params = dict(model.param_items())
    if set(grads) != set(params):
        raise ValueError(f"gradient keys {sorted(grads)} != parameter keys {sorted(params)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient {name} shape {g.shape} != parameter shape {p.shape}")
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1 ** state.t)
        v_hat = state.v[name] / (1.0 - b2 ** state.t)
        p -= state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return model, state


def predict(model: CnnModel, x: SentenceTensor) -> tuple[int, np.ndarray]:
    """Eval-mode forward; ties resolve to the lowest class index."""
    probs, _ = forward(model, x, mode="eval")
    return int(np.argmax(probs)), probs


# --- Versioned model file ------------------------------------------------------
#
# Little-endian layout:
#   magic "PCNN" | u32 version
#   | u32 d | u32 seq_len | u32 n_widths | u32 widths...
#   | u32 filters_per_width | u32 classes | f64 dropout_rate
#   | parameters as f64 in param_items() order
#   | u32 crc32 of all preceding bytes

MODEL_MAGIC = b"PCNN"
MODEL_VERSION = 1


def model_to_bytes(model: CnnModel) -> bytes:
    cfg = model.config
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<I", MODEL_VERSION)
    out += struct.pack("<III", cfg.d, cfg.seq_len, len(cfg.widths))
    out += struct.pack(f"<{len(cfg.widths)}I", *cfg.widths)
    out += struct.pack("<II", cfg.filters_per_width, cfg.classes)
    out += struct.pack("<d", cfg.dropout_rate)
    for _, p in model.param_items():
        out += np.ascontiguousarray(p, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def save_model(model: CnnModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def model_from_bytes(blob: bytes) -> CnnModel:
    if len(blob) < 12:
        raise ModelFormatError("model file truncated")
    if blob[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ModelFormatError(
            f"checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )

    off = 8
    try:
        d, seq_len, n_widths = struct.unpack_from("<III", blob, off)
        off += 12
        widths = struct.unpack_from(f"<{n_widths}I", blob, off)
        off += 4 * n_widths
        filters, classes = struct.unpack_from("<II", blob, off)
        off += 8
        (dropout_rate,) = struct.unpack_from("<d", blob, off)
        off += 8
        cfg = ModelConfig(
            d=d, seq_len=seq_len, widths=widths, filters_per_width=filters,
            classes=classes, dropout_rate=dropout_rate,
        )
    except (struct.error, ValueError) as e:
        raise ModelFormatError(f"bad model header: {e}") from None

    def take(shape) -> np.ndarray:
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
        return arr

    conv_w, conv_b = {}, {}
    try:
        for h in cfg.widths:
            conv_w[h] = take((cfg.filters_per_width, h, cfg.d))
            conv_b[h] = take((cfg.filters_per_width,))
        dense_w = take((cfg.classes, cfg.feature_count))
        dense_b = take((cfg.classes,))
    except ValueError as e:
        raise ModelFormatError(f"model payload truncated: {e}") from None
    if off != len(blob) - 4:
        raise ModelFormatError(
            f"model payload size mismatch: expected {off + 4} bytes, file has {len(blob)}"
        )
    return CnnModel(config=cfg, conv_w=conv_w, conv_b=conv_b, dense_w=dense_w, dense_b=dense_b)


def load_model(path: str | Path) -> CnnModel:
    return model_from_bytes(Path(path).read_bytes())
