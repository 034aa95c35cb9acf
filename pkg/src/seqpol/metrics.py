"""Evaluation metrics and bootstrap uncertainty.

AUROC uses the rank (Mann-Whitney) formulation with ties counted one half;
the multiclass version macro-averages one-vs-rest over the classes present
in the labels. Calibration errors bin predictions into equal-width bins over
(0, 1]. Confidence intervals come from a percentile bootstrap that resamples
patients, not rows, because stages within a patient are dependent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, UndefinedMetricError


def auroc_binary(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability that a random positive outranks a random negative."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auroc_multiclass(
    probs: np.ndarray, labels: np.ndarray, average: str = "macro"
) -> float:
    """One-vs-rest AUROC averaged over the classes present in the labels.

    ``average`` is "macro" (unweighted mean, the default) or "weighted"
    (weighted by class prevalence).
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise ConfigError("probs must be a 2-D array of per-class probabilities")
    if average not in ("macro", "weighted"):
        raise ConfigError(f"unknown averaging mode {average!r}")
    present = np.unique(labels)
    if present.size < 2:
        raise UndefinedMetricError("multiclass AUROC needs >= 2 classes present")
    aucs, weights = [], []
    for k in present:
        aucs.append(auroc_binary(probs[:, int(k)], (labels == k).astype(int)))
        weights.append(float((labels == k).sum()))
    if average == "weighted":
        return float(np.average(aucs, weights=weights))
    return float(np.mean(aucs))


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=float)
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


def _bin_index(confidence: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins over (0, 1], half-open on the left."""
    idx = np.ceil(confidence * bins).astype(int) - 1
    return np.clip(idx, 0, bins - 1)


def expected_calibration_error(
    probs: np.ndarray, labels: np.ndarray, bins: int = 10
) -> float:
    """Mean gap between top-class confidence and accuracy, weighted by bin mass."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    n = probs.shape[0]
    confidence = probs.max(axis=1)
    correct = (np.argmax(probs, axis=1) == labels).astype(float)
    idx = _bin_index(confidence, bins)
    ece = 0.0
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        ece += (n_b / n) * abs(correct[mask].mean() - confidence[mask].mean())
    return float(ece)


def static_calibration_error(
    probs: np.ndarray, labels: np.ndarray, bins: int = 10
) -> float:
    """Class-wise calibration gap averaged over all classes.

    Each class column is binned separately; within a bin the gap is between
    the mean predicted probability for that class and the fraction of rows
    whose label is that class.
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    n, K = probs.shape
    if K < 2:
        raise ConfigError("SCE needs at least 2 classes")
    sce = 0.0
    for k in range(K):
        col = probs[:, k]
        hit = (labels == k).astype(float)
        idx = _bin_index(col, bins)
        for b in range(bins):
            mask = idx == b
            n_b = int(mask.sum())
            if n_b == 0:
                continue
            sce += (n_b / n) * abs(hit[mask].mean() - col[mask].mean())
    return float(sce / K)


@dataclass
class MetricEstimate:
    """Point value with a percentile-bootstrap confidence interval."""

    value: float
    ci_low: float
    ci_high: float
    n_bootstrap: int
    unit: str = "fraction"
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_bootstrap": self.n_bootstrap,
            "unit": self.unit,
            "warning": self.warning,
        }


def bootstrap_ci(
    samples: Sequence,
    statistic: Callable[[Sequence], float],
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> MetricEstimate:
    """Percentile bootstrap over per-patient sample units.

    ``samples`` holds one entry per patient; ``statistic`` maps a list of
    entries to a number. Replicates draw patients with replacement using
    seeds derived from (seed, replicate index), so they are reproducible and
    independent of execution order. Resamples on which the statistic is
    undefined are skipped; if more than 20% are skipped the estimate carries
    a widened-interval warning.
    """
    n = len(samples)
    if n < 2:
        raise ConfigError("bootstrap needs at least 2 patients")
    if not 0.0 < level < 1.0:
        raise ConfigError("confidence level must lie in (0, 1)")
    point = float(statistic(list(samples)))
    values = []
    n_undefined = 0
    for b in range(B):
        rng = np.random.default_rng([seed, b])
        idx = rng.integers(0, n, n)
        resample = [samples[i] for i in idx]
        try:
            v = float(statistic(resample))
        except UndefinedMetricError:
            n_undefined += 1
            continue
        if np.isnan(v):
            n_undefined += 1
            continue
        values.append(v)
    warning = None
    if n_undefined > 0.2 * B:
        warning = (
            f"statistic undefined on {n_undefined}/{B} resamples; "
            "interval may be unreliable"
        )
    if not values:
        return MetricEstimate(point, point, point, B, warning="all resamples undefined")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(values, [100 * alpha, 100 * (1 - alpha)])
    return MetricEstimate(point, float(lo), float(hi), B, warning=warning)


def confusion_matrix(
    ref_labels: np.ndarray, cmp_labels: np.ndarray, K: int
) -> np.ndarray:
    """K x K counts; entry (i, j) counts reference class i vs comparison class j."""
    ref = np.asarray(ref_labels, dtype=int)
    cmp_ = np.asarray(cmp_labels, dtype=int)
    if ref.shape != cmp_.shape:
        raise ConfigError("label arrays must have equal length")
    if ref.size and (ref.min() < 0 or ref.max() >= K or cmp_.min() < 0 or cmp_.max() >= K):
        raise ConfigError("labels out of range")
    out = np.zeros((K, K), dtype=int)
    np.add.at(out, (ref, cmp_), 1)
    return out


METRIC_FUNCS: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "auroc": auroc_multiclass,
    "accuracy": accuracy,
    "ece": expected_calibration_error,
    "sce": static_calibration_error,
}


def compute_metric(name: str, probs: np.ndarray, labels: np.ndarray) -> float:
    try:
        func = METRIC_FUNCS[name]
    except KeyError:
        raise ConfigError(f"unknown metric {name!r}") from None
    return func(probs, labels)
