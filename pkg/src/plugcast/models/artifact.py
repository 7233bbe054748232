"""Versioned JSON model artifacts.

Arrays are stored as base64 little-endian float64 bytes, so weights
round-trip bit-exact through save/load. The format_version field guards
against silently loading artifacts written by an incompatible release.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..features import FeatureSpec
from .glm import GlmModel
from .mlp import MlpModel, TrainConfig, _flatten, _to_layers
from .persistence import PersistenceModel

FORMAT_VERSION = 1


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(d["data"]), dtype="<f8")
    return flat.reshape(d["shape"]).copy()


def artifact_dict(model, train_config: TrainConfig | None = None) -> dict:
    doc: dict = {"format_version": FORMAT_VERSION, "family": model.family}
    if isinstance(model, PersistenceModel):
        doc["lags"] = list(model.lags)
    elif isinstance(model, GlmModel):
        doc["lags"] = list(model.lags)
        doc["coefficients"] = encode_array(model.coefficients)
    elif isinstance(model, MlpModel):
        doc["variant"] = model.variant
        doc["feature_spec"] = model.spec.as_dict()
        doc["seed"] = model.seed
        doc["scaler"] = {
            "means": encode_array(model.lag_means),
            "stds": encode_array(model.lag_stds),
        }
        doc["weights"] = [encode_array(p) for p in _flatten(model.layers)]
        if train_config is not None:
            doc["train_config"] = train_config.as_dict()
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported artifact format_version {version!r}")
    family = doc.get("family")
    if family == "persistence":
        return PersistenceModel(lags=tuple(doc["lags"]))
    if family == "glm":
        return GlmModel(lags=tuple(doc["lags"]), coefficients=decode_array(doc["coefficients"]))
    if family == "mlp":
        flat = [decode_array(w) for w in doc["weights"]]
        return MlpModel(
            variant=doc["variant"],
            spec=FeatureSpec.from_dict(doc["feature_spec"]),
            layers=_to_layers(flat),
            lag_means=decode_array(doc["scaler"]["means"]),
            lag_stds=decode_array(doc["scaler"]["stds"]),
            seed=int(doc["seed"]),
        )
    raise DataError(f"unknown model family {family!r}")


def save_artifact(model, path: str | Path, train_config: TrainConfig | None = None) -> None:
    doc = artifact_dict(model, train_config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_artifact(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a model artifact ({exc})") from exc
    return model_from_dict(doc)
