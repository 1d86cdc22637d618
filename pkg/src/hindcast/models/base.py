"""Shared model container and JSON serialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODEL_DOC_VERSION = 1


@dataclass
class TrainedModel:
    """A fitted classifier with uniform score/importance access.

    ``params`` is family-specific; ``feature_names`` is attached by the
    caller once the training matrix is known so scoring can verify feature
    alignment. Instances are never mutated after fitting.
    """

    family: str
    hyperparameters: dict
    feature_names: tuple | None
    params: dict
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_DOC_VERSION,
            "family": self.family,
            "hyperparameters": dict(self.hyperparameters),
            "feature_names": list(self.feature_names or ()),
            "params": _encode(self.params),
            "metadata": _plain(self.metadata),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("version") != MODEL_DOC_VERSION:
            raise ValueError(f"unsupported model document version {doc.get('version')!r}")
        return cls(
            family=doc["family"],
            hyperparameters=dict(doc["hyperparameters"]),
            feature_names=tuple(doc["feature_names"]),
            params=_decode(doc["params"]),
            metadata=dict(doc.get("metadata", {})),
        )


def _encode(value):
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return {"__array__": value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__array__" in value:
            return np.asarray(value["__array__"], dtype=value.get("dtype", "float64"))
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    return value
