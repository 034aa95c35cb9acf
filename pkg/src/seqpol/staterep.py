"""Hand-crafted state construction from encoded episodes.

A state spec selects blocks of the patient history: the current context, the
previous action, a rolling window of lagged contexts/actions, and running
aggregates (sum/max/mean) over everything seen so far. Assembled matrices have
one row per (patient, stage) and a fixed, self-describing column layout:

    current context | lagged contexts (lag 1..k) | previous action (lag 1)
    | lagged actions (lag 2..k+1) | context aggregates | action aggregates

Lagged stages before the first visit are padded with the first observation;
missing prior actions are padded with the schema's default action. Running
aggregates of actions cover stages 1..t-1 and are zero at t=1 for every
operator; context aggregates cover stages 1..t.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .schema import CohortSchema, Episode, EpisodeSet

AGG_OPS = ("none", "sum", "max", "mean")


@dataclass(frozen=True)
class StateSpec:
    """Declarative recipe for building the state at each stage."""

    include_current_context: bool = False
    include_prev_action: bool = False
    window_k: int | None = None
    aggregate_op: str = "none"

    def __post_init__(self) -> None:
        if self.aggregate_op not in AGG_OPS:
            raise ConfigError(f"unknown aggregation operator {self.aggregate_op!r}")
        if self.window_k is not None:
            if self.window_k < 0:
                raise ConfigError("window_k must be >= 0")
            # A rolling window always contains the current context and the
            # previous action (the window of size 0 is exactly that pair).
            object.__setattr__(self, "include_current_context", True)
            object.__setattr__(self, "include_prev_action", True)
        if (
            not self.include_current_context
            and not self.include_prev_action
            and self.window_k is None
            and self.aggregate_op == "none"
        ):
            raise ConfigError("empty state spec: nothing included")

    @property
    def name(self) -> str:
        parts = []
        if self.window_k is not None:
            parts.append(f"window{self.window_k}")
        else:
            if self.include_current_context:
                parts.append("current")
            if self.include_prev_action:
                parts.append("prev_action")
        if self.aggregate_op != "none":
            parts.append(f"agg_{self.aggregate_op}")
        return "+".join(parts)

    def to_dict(self) -> dict:
        return {
            "current": self.include_current_context,
            "prev_action": self.include_prev_action,
            "window_k": self.window_k,
            "agg": self.aggregate_op,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpec":
        return cls(
            include_current_context=d.get("current", False),
            include_prev_action=d.get("prev_action", False),
            window_k=d.get("window_k"),
            aggregate_op=d.get("agg", "none"),
        )

    @classmethod
    def from_json(cls, path: str) -> "StateSpec":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ConfigError(f"invalid state spec file {path}: {exc}") from exc


def enumerate_standard_states(op: str) -> list[StateSpec]:
    """The seven benchmark state recipes, from coarsest to richest.

    Order: current context only; previous action only; both; aggregates only;
    both plus aggregates; window of 1 plus aggregates; window of 2 plus
    aggregates. ``op`` picks the aggregation operator for the last four.
    """
    if op not in ("sum", "max", "mean"):
        raise ConfigError(f"aggregation operator must be sum/max/mean, got {op!r}")
    return [
        StateSpec(include_current_context=True),
        StateSpec(include_prev_action=True),
        StateSpec(window_k=0),
        StateSpec(aggregate_op=op),
        StateSpec(window_k=0, aggregate_op=op),
        StateSpec(window_k=1, aggregate_op=op),
        StateSpec(window_k=2, aggregate_op=op),
    ]


@dataclass
class StateMatrix:
    """Flattened (patient, stage) design matrix with bookkeeping tags.

    Rows are ordered by (patient_id, stage). ``y`` and ``prev_action`` are
    indices into ``action_labels``; ``severity`` holds NaN where absent.
    """

    X: np.ndarray
    feature_names: list[str]
    y: np.ndarray
    action_labels: list[str]
    patient_ids: list[str]
    stages: np.ndarray
    prev_actions: np.ndarray
    severity: np.ndarray
    spec_name: str
    fold: str | None = field(default=None)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    def subset(self, mask: np.ndarray) -> "StateMatrix":
        idx = np.flatnonzero(mask)
        return StateMatrix(
            X=self.X[idx],
            feature_names=self.feature_names,
            y=self.y[idx],
            action_labels=self.action_labels,
            patient_ids=[self.patient_ids[i] for i in idx],
            stages=self.stages[idx],
            prev_actions=self.prev_actions[idx],
            severity=self.severity[idx],
            spec_name=self.spec_name,
            fold=self.fold,
        )

    def patient_groups(self) -> list[np.ndarray]:
        """Row-index arrays, one per patient, preserving matrix order."""
        groups: list[np.ndarray] = []
        start = 0
        for i in range(1, self.n_rows + 1):
            if i == self.n_rows or self.patient_ids[i] != self.patient_ids[start]:
                groups.append(np.arange(start, i))
                start = i
        return groups

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["patient_id", "t", "action", "prev_action", "severity"]
                + self.feature_names
            )
            for i in range(self.n_rows):
                sev = self.severity[i]
                writer.writerow(
                    [
                        self.patient_ids[i],
                        int(self.stages[i]),
                        self.action_labels[self.y[i]],
                        self.action_labels[self.prev_actions[i]],
                        "" if np.isnan(sev) else f"{sev:.6f}",
                    ]
                    + [f"{v:.6f}" for v in self.X[i]]
                )


# ---------------------------------------------------------------------------
# Per-episode block builders
# ---------------------------------------------------------------------------

def _episode_arrays(
    episode: Episode, episodes: EpisodeSet
) -> tuple[np.ndarray, np.ndarray]:
    """Context matrix (T x d_enc) and action index vector for one episode."""
    feats = episodes.encoded_features
    if feats is None:
        raise ConfigError("episodes must be preprocessed to numeric form first")
    names = [f.name for f in feats]
    T = episode.n_stages
    C = np.empty((T, len(names)), dtype=float)
    for t, stage in enumerate(episode.stages):
        for j, name in enumerate(names):
            C[t, j] = stage.context[name]
    actions = np.array(
        [episodes.schema.action_index(s.action) for s in episode.stages], dtype=int
    )
    return C, actions


def _lagged_context(C: np.ndarray, lag: int) -> np.ndarray:
    """Shift contexts down by ``lag`` rows, padding with the first observation."""
    if lag == 0:
        return C
    out = np.empty_like(C)
    out[:lag] = C[0]
    out[lag:] = C[:-lag]
    return out


def _lagged_action_onehot(
    actions: np.ndarray, lag: int, K: int, default_idx: int
) -> np.ndarray:
    """One-hot of the action ``lag`` stages back, padded with the default action."""
    T = actions.shape[0]
    idx = np.full(T, default_idx, dtype=int)
    if lag < T:
        idx[lag:] = actions[: T - lag]
    out = np.zeros((T, K), dtype=float)
    out[np.arange(T), idx] = 1.0
    return out


def _running_aggregate(C: np.ndarray, op: str) -> np.ndarray:
    """Aggregate over stages 1..t (inclusive of the current stage)."""
    if op == "sum":
        return np.cumsum(C, axis=0)
    if op == "max":
        return np.maximum.accumulate(C, axis=0)
    if op == "mean":
        counts = np.arange(1, C.shape[0] + 1, dtype=float)[:, None]
        return np.cumsum(C, axis=0) / counts
    raise ConfigError(f"unknown aggregation operator {op!r}")


def _running_action_aggregate(actions: np.ndarray, op: str, K: int) -> np.ndarray:
    """Aggregate one-hot actions over stages 1..t-1; all-zero at t=1."""
    T = actions.shape[0]
    onehot = np.zeros((T, K), dtype=float)
    onehot[np.arange(T), actions] = 1.0
    shifted = np.zeros_like(onehot)
    shifted[1:] = onehot[:-1]
    if op == "sum":
        return np.cumsum(shifted, axis=0)
    if op == "max":
        return np.maximum.accumulate(shifted, axis=0)
    if op == "mean":
        counts = np.arange(0, T, dtype=float)[:, None]
        sums = np.cumsum(shifted, axis=0)
        return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    raise ConfigError(f"unknown aggregation operator {op!r}")


def _eligible_columns(episodes: EpisodeSet, flag: str) -> list[int]:
    schema = episodes.schema
    cols = []
    for j, feat in enumerate(episodes.encoded_features or []):
        var = schema.variable(feat.variable)
        if getattr(var, flag):
            cols.append(j)
    return cols


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def aggregate_history(
    episode: Episode, t: int, op: str, episodes: EpisodeSet
) -> tuple[list[str], np.ndarray]:
    """Running aggregates at stage ``t`` for one episode.

    Returns feature names and values: one aggregate per aggregation-eligible
    context column (over stages 1..t) and one per action label (over the
    one-hot indicators of actions 1..t-1; zero when t=1).
    """
    if not 1 <= t <= episode.n_stages:
        raise ConfigError(f"stage {t} out of range 1..{episode.n_stages}")
    C, actions = _episode_arrays(episode, episodes)
    cols = _eligible_columns(episodes, "aggregate_eligible")
    feats = episodes.encoded_features or []
    ctx_agg = _running_aggregate(C[:, cols], op)[t - 1]
    act_agg = _running_action_aggregate(
        actions, op, episodes.schema.n_actions
    )[t - 1]
    names = [f"{feats[j].name}@agg_{op}" for j in cols] + [
        f"action:{label}@agg_{op}" for label in episodes.schema.action_labels
    ]
    return names, np.concatenate([ctx_agg, act_agg])


def truncate_history(
    episode: Episode, t: int, k: int, episodes: EpisodeSet
) -> tuple[list[str], np.ndarray]:
    """Rolling-window features at stage ``t`` for one episode.

    Emits every context column at lag 0, lag-eligible columns at lags 1..k and
    action one-hots at lags 1..k+1. Context lags before stage 1 repeat the
    first observation; action lags before stage 1 use the default action.
    """
    if k < 0:
        raise ConfigError("window size k must be >= 0")
    if not 1 <= t <= episode.n_stages:
        raise ConfigError(f"stage {t} out of range 1..{episode.n_stages}")
    schema = episodes.schema
    C, actions = _episode_arrays(episode, episodes)
    feats = episodes.encoded_features or []
    lag_cols = _eligible_columns(episodes, "lag_eligible")
    default_idx = schema.action_index(schema.default_action)

    names: list[str] = [f.name for f in feats]
    blocks: list[np.ndarray] = [C[t - 1]]
    for lag in range(1, k + 1):
        blocks.append(_lagged_context(C[:, lag_cols], lag)[t - 1])
        names.extend(f"{feats[j].name}@lag{lag}" for j in lag_cols)
    for lag in range(1, k + 2):
        blocks.append(
            _lagged_action_onehot(actions, lag, schema.n_actions, default_idx)[t - 1]
        )
        names.extend(f"action:{label}@lag{lag}" for label in schema.action_labels)
    return names, np.concatenate(blocks)


def assemble_state(episodes: EpisodeSet, spec: StateSpec, fold: str | None = None) -> StateMatrix:
    """Build the design matrix for a state spec over a whole episode set."""
    if not episodes.is_encoded:
        raise ConfigError("episodes must be preprocessed to numeric form first")
    schema = episodes.schema
    feats = episodes.encoded_features or []
    K = schema.n_actions
    default_idx = schema.action_index(schema.default_action)
    lag_cols = _eligible_columns(episodes, "lag_eligible")
    agg_cols = _eligible_columns(episodes, "aggregate_eligible")
    k = spec.window_k
    op = spec.aggregate_op

    names: list[str] = []
    if spec.include_current_context:
        names.extend(f.name for f in feats)
    if k is not None:
        for lag in range(1, k + 1):
            names.extend(f"{feats[j].name}@lag{lag}" for j in lag_cols)
    if spec.include_prev_action:
        names.extend(f"action:{label}@lag1" for label in schema.action_labels)
    if k is not None:
        for lag in range(2, k + 2):
            names.extend(f"action:{label}@lag{lag}" for label in schema.action_labels)
    if op != "none":
        names.extend(f"{feats[j].name}@agg_{op}" for j in agg_cols)
        names.extend(f"action:{label}@agg_{op}" for label in schema.action_labels)

    ordered = sorted(episodes.episodes, key=lambda ep: ep.patient_id)
    rows, labels, pids, stages, prevs, sevs = [], [], [], [], [], []
    for ep in ordered:
        C, actions = _episode_arrays(ep, episodes)
        T = ep.n_stages
        blocks: list[np.ndarray] = []
        if spec.include_current_context:
            blocks.append(C)
        if k is not None:
            for lag in range(1, k + 1):
                blocks.append(_lagged_context(C[:, lag_cols], lag))
        prev_onehot = _lagged_action_onehot(actions, 1, K, default_idx)
        if spec.include_prev_action:
            blocks.append(prev_onehot)
        if k is not None:
            for lag in range(2, k + 2):
                blocks.append(_lagged_action_onehot(actions, lag, K, default_idx))
        if op != "none":
            blocks.append(_running_aggregate(C[:, agg_cols], op))
            blocks.append(_running_action_aggregate(actions, op, K))
        rows.append(np.hstack(blocks))
        labels.append(actions)
        pids.extend([ep.patient_id] * T)
        stages.append(np.arange(1, T + 1))
        prev_idx = np.full(T, default_idx, dtype=int)
        prev_idx[1:] = actions[:-1]
        prevs.append(prev_idx)
        sevs.append(
            np.array(
                [np.nan if s.severity is None else s.severity for s in ep.stages]
            )
        )

    return StateMatrix(
        X=np.vstack(rows) if rows else np.empty((0, len(names))),
        feature_names=names,
        y=np.concatenate(labels) if labels else np.empty(0, dtype=int),
        action_labels=list(schema.action_labels),
        patient_ids=pids,
        stages=np.concatenate(stages) if stages else np.empty(0, dtype=int),
        prev_actions=np.concatenate(prevs) if prevs else np.empty(0, dtype=int),
        severity=np.concatenate(sevs) if sevs else np.empty(0),
        spec_name=spec.name,
        fold=fold,
    )
