"""Discrete hyperparameter search spaces and per-cohort profiles.

Each model kind has a fixed grid; a few grids (tree depth, MLP optimizer
settings, early-stopping patience, candidate-selection metric) depend on the
cohort profile. Sampling draws each hyperparameter uniformly and i.i.d. from
its set, reproducibly from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

MODEL_KINDS = ("logreg", "tree", "riskscore", "mlp")


@dataclass(frozen=True)
class DatasetProfile:
    name: str
    dt_max_depth: tuple[int, ...]
    mlp_lr: tuple[float, ...]
    mlp_max_epochs: int
    mlp_batch_size: tuple[int, ...]
    patience: int
    selection_metric: str  # validation metric used to pick among candidates


PROFILES: dict[str, DatasetProfile] = {
    "adni-like": DatasetProfile(
        "adni-like", (3, 5, 7, 9, 11, 13, 15), (1e-3, 1e-2), 20, (16, 32, 64), 5, "auroc"
    ),
    "ra-like": DatasetProfile(
        "ra-like", (2, 3, 4, 5, 6, 7, 8), (1e-3, 1e-2), 50, (128, 256), 5, "auroc"
    ),
    "sepsis-like": DatasetProfile(
        "sepsis-like",
        (3, 5, 7, 9, 11, 13, 15),
        (1e-4, 1e-3, 1e-2),
        500,
        (256, 512, 1024),
        25,
        "accuracy",
    ),
    "copd-like": DatasetProfile(
        "copd-like",
        (3, 5, 7, 9, 11, 13, 15),
        (1e-4, 1e-3, 1e-2),
        500,
        (256, 512, 1024),
        25,
        "accuracy",
    ),
}


def get_profile(name: str) -> DatasetProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(
            f"unknown dataset profile {name!r}; choose one of {sorted(PROFILES)}"
        ) from None


@dataclass(frozen=True)
class HyperparamSpace:
    """Discrete search sets for every model kind."""

    lr_C: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
    lr_max_iter: tuple[int, ...] = (2000,)
    dt_criterion: tuple[str, ...] = ("gini", "entropy")
    dt_min_samples_split: tuple[int, ...] = (2, 4, 8, 16, 32, 64, 128)
    rs_max_coef: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    rs_max_size: tuple[int, ...] = (3, 4, 5, 6, 7)
    rs_pos_weight: tuple[int, ...] = (1, 2, 3, 4, 5)
    mlp_hidden_dims: tuple[tuple[int, ...], ...] = (
        (16,),
        (32,),
        (64,),
        (16, 16),
        (32, 32),
        (64, 64),
    )

    def grid_for(self, kind: str, profile: DatasetProfile) -> dict[str, tuple]:
        if kind == "logreg":
            return {"C": self.lr_C, "max_iter": self.lr_max_iter}
        if kind == "tree":
            return {
                "criterion": self.dt_criterion,
                "min_samples_split": self.dt_min_samples_split,
                "max_depth": profile.dt_max_depth,
            }
        if kind == "riskscore":
            return {
                "max_coef": self.rs_max_coef,
                "max_size": self.rs_max_size,
                "pos_weight": self.rs_pos_weight,
            }
        if kind == "mlp":
            return {
                "hidden_dims": self.mlp_hidden_dims,
                "lr": profile.mlp_lr,
                "batch_size": profile.mlp_batch_size,
                "max_epochs": (profile.mlp_max_epochs,),
                "patience": (profile.patience,),
            }
        raise ConfigError(f"unknown model kind {kind!r}")


def sample_hyperparams(
    space: HyperparamSpace,
    kind: str,
    profile: DatasetProfile | str,
    seed: int,
    n: int = 5,
) -> list[dict]:
    """Draw ``n`` configurations uniformly from the model's grid."""
    if isinstance(profile, str):
        profile = get_profile(profile)
    grid = space.grid_for(kind, profile)
    if any(len(vals) == 0 for vals in grid.values()):
        raise ConfigError(f"empty hyperparameter set for {kind!r}")
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n):
        cfg = {
            name: vals[int(rng.integers(0, len(vals)))]
            for name, vals in grid.items()
        }
        draws.append(cfg)
    return draws
