"""Versioned binary model checkpoints.

Layout: magic, uint32 metadata length, JSON metadata, then the parameter
arrays as one little-endian float32 blob in metadata order. Writing the same
model twice produces byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .metric import MetricHead
from .models import LogisticModel, MlpClassifier, MlpParams

_MAGIC = b"SMCKP\x01"


def _collect(model) -> tuple[dict, list[np.ndarray]]:
    if isinstance(model, LogisticModel):
        meta = {
            "kind": "logistic",
            "params": model.get_params(),
            "bias": model.bias_,
            "shapes": [list(model.weights_.shape)],
        }
        return meta, [model.weights_]
    if isinstance(model, (MlpClassifier, MetricHead)):
        params: MlpParams = model.params_
        arrays = params.flat_arrays()
        meta = {
            "kind": "mlp_classifier" if isinstance(model, MlpClassifier) else "metric_head",
            "params": model.get_params(),
            "layer_sizes": params.layer_sizes,
            "activation": params.activation,
            "shapes": [list(a.shape) for a in arrays],
        }
        return meta, arrays
    raise DataError(f"cannot checkpoint a {type(model).__name__}")


def save_checkpoint(model, path: str | Path, extra: dict | None = None) -> None:
    meta, arrays = _collect(model)
    if extra:
        meta["extra"] = extra
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for a in arrays:
        blob += np.ascontiguousarray(a, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path):
    """Rebuild a model from a checkpoint; returns (model, extra_metadata)."""
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise DataError(f"not a checkpoint file (bad magic): {path}")
    off = len(_MAGIC)
    (meta_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off : off + meta_len].decode())
    off += meta_len
    arrays = []
    for shape in meta["shapes"]:
        size = int(np.prod(shape)) * 4
        chunk = raw[off : off + size]
        if len(chunk) != size:
            raise DataError(f"truncated checkpoint: {path}")
        arrays.append(np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64))
        off += size
    if off != len(raw):
        raise DataError(f"trailing bytes in checkpoint: {path}")

    kind = meta["kind"]
    if kind == "logistic":
        model = LogisticModel(**meta["params"])
        model.weights_ = arrays[0].ravel()
        model.bias_ = float(meta["bias"])
    elif kind in ("mlp_classifier", "metric_head"):
        cls = MlpClassifier if kind == "mlp_classifier" else MetricHead
        model = cls(**meta["params"])
        weights = arrays[0::2]
        biases = [b.ravel() for b in arrays[1::2]]
        model.params_ = MlpParams(
            layer_sizes=meta["layer_sizes"],
            weights=weights,
            biases=biases,
            activation=meta["activation"],
            seed=meta["params"].get("seed", 0),
        )
    else:
        raise DataError(f"unknown checkpoint kind {kind!r}")
    return model, meta.get("extra", {})
