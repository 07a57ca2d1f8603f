"""Versioned binary containers for trained models.

Single-model container ("DLMM"): format version, activation tag, dims
list, optional normalization stats, then each weight matrix as row-major
float64 with an explicit (rows, cols) header. Bundle container ("DLMC")
wraps the training config, the ordered class labels, the global model and
one model per class. Everything is little-endian with a trailing CRC32;
round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autoencoder import DELMModel
from .classifier import ClassModels, TrainConfig
from .errors import DataError
from .fileio import Reader, pack_text, seal, unseal, write_atomic
from .normalize import NormalizationStats

MODEL_MAGIC = b"DLMM"
BUNDLE_MAGIC = b"DLMC"
MODEL_FORMAT_VERSION = 1
BUNDLE_FORMAT_VERSION = 1


def _pack_array(W: np.ndarray) -> bytes:
    rows, cols = W.shape
    return struct.pack("<II", rows, cols) + W.astype("<f8").tobytes(order="C")


def _read_array(r: Reader) -> np.ndarray:
    rows, cols = r.unpack("<II")
    raw = r.take(8 * rows * cols)
    return np.frombuffer(raw, dtype="<f8").reshape((rows, cols)).astype(float)


def _pack_stats(stats: NormalizationStats | None) -> bytes:
    if stats is None:
        return struct.pack("<B", 0)
    out = struct.pack(
        "<BBdI",
        1,
        1 if stats.per_dimension else 0,
        stats.epsilon,
        stats.dim,
    )
    out += stats.lo.astype("<f8").tobytes()
    out += stats.hi.astype("<f8").tobytes()
    return out


def _read_stats(r: Reader) -> NormalizationStats | None:
    if r.u8() == 0:
        return None
    per_dim = r.u8() == 1
    eps = r.f64()
    d = r.u32()
    lo = np.frombuffer(r.take(8 * d), dtype="<f8").astype(float)
    hi = np.frombuffer(r.take(8 * d), dtype="<f8").astype(float)
    return NormalizationStats(lo=lo, hi=hi, epsilon=eps, per_dimension=per_dim)


def pack_model(model: DELMModel) -> bytes:
    out = bytearray()
    out += struct.pack("<4sI", MODEL_MAGIC, MODEL_FORMAT_VERSION)
    out += pack_text(model.activation)
    out += struct.pack("<I", len(model.dims))
    out += struct.pack(f"<{len(model.dims)}I", *model.dims)
    out += _pack_stats(model.feature_stats)
    out += struct.pack("<I", len(model.weights))
    for W in model.weights:
        out += _pack_array(W)
    return seal(bytes(out))


def unpack_model(buf: bytes, source: str = "<bytes>") -> DELMModel:
    r = Reader(unseal(buf, source), source)
    magic, version = r.unpack("<4sI")
    if magic != MODEL_MAGIC:
        raise DataError(f"{source}: not a model file (bad magic {magic!r})")
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"{source}: unsupported model format version {version}")
    activation = r.text()
    ndims = r.u32()
    dims = r.unpack(f"<{ndims}I")
    stats = _read_stats(r)
    nweights = r.u32()
    weights = [_read_array(r) for _ in range(nweights)]
    r.done()
    return DELMModel(
        weights=weights, dims=dims, activation=activation, feature_stats=stats
    )


def save_model(path: str | Path, model: DELMModel) -> None:
    write_atomic(path, pack_model(model))


def load_model(path: str | Path) -> DELMModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    return unpack_model(path.read_bytes(), str(path))


def _pack_config(config: TrainConfig) -> bytes:
    out = struct.pack("<Iq", config.hidden_layers, config.seed)
    out += pack_text(config.activation)
    out += struct.pack(f"<{config.hidden_layers}I", *config.layer_widths)
    out += struct.pack("<I", len(config.layer_C))
    out += struct.pack(f"<{len(config.layer_C)}d", *config.layer_C)
    return out


def _read_config(r: Reader) -> TrainConfig:
    h = r.u32()
    seed = r.i64()
    activation = r.text()
    widths = r.unpack(f"<{h}I")
    ncs = r.u32()
    cs = r.unpack(f"<{ncs}d")
    return TrainConfig(
        hidden_layers=h,
        layer_widths=widths,
        layer_C=cs,
        seed=seed,
        activation=activation,
    )


def save_models(path: str | Path, models: ClassModels) -> None:
    """Persist a whole classifier bundle atomically."""
    out = bytearray()
    out += struct.pack("<4sI", BUNDLE_MAGIC, BUNDLE_FORMAT_VERSION)
    out += _pack_config(models.config)
    labels = models.class_labels
    out += struct.pack("<I", len(labels))
    for lab in labels:
        out += pack_text(lab)
    blob = pack_model(models.global_model)
    out += struct.pack("<Q", len(blob)) + blob
    for lab in labels:
        blob = pack_model(models.per_class[lab])
        out += struct.pack("<Q", len(blob)) + blob
    write_atomic(path, seal(bytes(out)))


def load_models(path: str | Path) -> ClassModels:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    source = str(path)
    r = Reader(unseal(path.read_bytes(), source), source)
    magic, version = r.unpack("<4sI")
    if magic != BUNDLE_MAGIC:
        raise DataError(f"{source}: not a classifier bundle (bad magic {magic!r})")
    if version != BUNDLE_FORMAT_VERSION:
        raise DataError(f"{source}: unsupported bundle format version {version}")
    config = _read_config(r)
    labels = [r.text() for _ in range(r.u32())]
    global_model = unpack_model(r.take(r.u64()), f"{source}[global]")
    per_class = {
        lab: unpack_model(r.take(r.u64()), f"{source}[{lab}]") for lab in labels
    }
    r.done()
    return ClassModels(global_model=global_model, per_class=per_class, config=config)
