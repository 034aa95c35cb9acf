"""Shared probabilistic-classifier contract for all policy models.

Every fitted model knows the feature names and action labels it was trained
on, returns a probability vector over all K actions that sums to one, and
refuses inputs whose feature names do not match training.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod

import numpy as np

from ..errors import ConfigError, ContractError
from ..staterep import StateMatrix

FORMAT_VERSION = 1


class PolicyModel(ABC):
    """A fitted model of action probabilities given a state."""

    kind: str = "base"

    def __init__(self, feature_names: list[str], class_labels: list[str]):
        self.feature_names = list(feature_names)
        self.class_labels = list(class_labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def _validate_input(
        self, X, feature_names: list[str] | None
    ) -> np.ndarray:
        if isinstance(X, StateMatrix):
            feature_names = X.feature_names
            X = X.X
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if feature_names is None:
            if X.shape[1] != len(self.feature_names):
                raise ContractError(
                    f"{self.kind}: expected {len(self.feature_names)} features, "
                    f"got {X.shape[1]}"
                )
        elif list(feature_names) != self.feature_names:
            raise ContractError(
                f"{self.kind}: feature names do not match training "
                f"(got {list(feature_names)[:3]}..., expected "
                f"{self.feature_names[:3]}...)"
            )
        return X

    def predict_proba(self, X, feature_names: list[str] | None = None) -> np.ndarray:
        """Per-class probabilities, one simplex row per input state.

        ``X`` may be a StateMatrix (names taken from it), a 2-D array or a
        single feature vector; a single vector yields a 1-D result.
        """
        arr = self._validate_input(X, feature_names)
        probs = self._predict_proba_impl(arr)
        if isinstance(X, np.ndarray) and X.ndim == 1:
            return probs[0]
        return probs

    def predict(self, X, feature_names: list[str] | None = None) -> np.ndarray:
        probs = self.predict_proba(X, feature_names)
        return np.argmax(np.atleast_2d(probs), axis=1)

    @abstractmethod
    def _predict_proba_impl(self, X: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _params_dict(self) -> dict:
        ...

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "feature_names": self.feature_names,
            "class_labels": self.class_labels,
            "params": self._params_dict(),
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")


_REGISTRY: dict[str, type] = {}


def register_model(cls: type) -> type:
    _REGISTRY[cls.kind] = cls
    return cls


def model_from_dict(d: dict) -> PolicyModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {d.get('format_version')}")
    kind = d.get("kind")
    if kind not in _REGISTRY:
        raise ConfigError(f"unknown model kind {kind!r}")
    return _REGISTRY[kind]._from_params(
        d["feature_names"], d["class_labels"], d["params"]
    )


def load_model(path: str) -> PolicyModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
