"""Interpretability diagnostics over an unwrapped region set.

Everything here is a pure function of a RegionSet plus the dataset it was
built on: standardized coefficient rows for parallel-coordinate views,
sample-weighted feature importance, and per-region linear profiles of a
single feature. AUC/accuracy live in relulens.metrics and are re-exported
here for convenience.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .metrics import accuracy, auc  # noqa: F401  (public surface)
from .unwrap import RegionSet


@dataclass(frozen=True)
class Standardizer:
    """Per-feature location/scale, usually taken from the training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_data(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        return cls(mean=X.mean(axis=0), std=X.std(axis=0))

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(mean=np.zeros(d), std=np.ones(d))


def coefficient_matrix(regionset: RegionSet, standardizer: Standardizer | None = None) -> np.ndarray:
    """One row per region: standardized coefficients plus intercept-at-means.

    Row r is [w_1*std_1, ..., w_d*std_d, b + w.mean], i.e. the LLM rewritten
    in z-scored feature coordinates. Rows align with RegionSet order, ready
    for a parallel-coordinate plot. Features with zero std get coefficient 0
    and a warning.
    """
    d = regionset.input_dim
    if standardizer is None:
        standardizer = Standardizer.identity(d)
    mean = np.asarray(standardizer.mean, dtype=np.float64)
    std = np.asarray(standardizer.std, dtype=np.float64)
    if mean.shape != (d,) or std.shape != (d,):
        raise InputError(f"standardizer dimension does not match input_dim {d}")
    zero_std = std == 0.0
    if zero_std.any():
        warnings.warn(
            f"features {np.flatnonzero(zero_std).tolist()} have zero std; "
            "their standardized coefficients are emitted as 0",
            stacklevel=2,
        )
    rows = np.empty((len(regionset), d + 1))
    for i, region in enumerate(regionset.regions):
        w = region.affine.w
        rows[i, :d] = w * std
        rows[i, d] = region.affine.b + float(w @ mean)
    return rows


@dataclass(frozen=True)
class ImportanceReport:
    """Sample-weighted importance scores plus the raw per-region coefficients.

    scores are normalized to sum 1 (all zeros for an all-zero network);
    ranks are a permutation with 1 = most important. coefficients holds the
    raw LLM weight vectors (one row per region) so coefficient distributions
    can be plotted directly; region_weights are the region sample counts.
    """

    scores: np.ndarray
    ranks: np.ndarray
    coefficients: np.ndarray
    region_weights: np.ndarray
    feature_std: np.ndarray


def feature_importance(regionset: RegionSet, X) -> ImportanceReport:
    """Importance of feature j: sum over regions of (count/n)*|w_j|*std(x_j)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (regionset.n_samples, regionset.input_dim):
        raise InputError(
            f"X shape {X.shape} does not match region set "
            f"({regionset.n_samples}, {regionset.input_dim})"
        )
    coefficients = np.vstack([r.affine.w for r in regionset.regions])
    counts = np.array([r.count for r in regionset.regions], dtype=np.float64)
    std = X.std(axis=0)
    raw = (counts / regionset.n_samples) @ np.abs(coefficients) * std
    total = raw.sum()
    scores = raw / total if total > 0 else raw
    # stable ranking: ties broken by feature index
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    ranks = np.empty_like(order)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    return ImportanceReport(
        scores=scores,
        ranks=ranks,
        coefficients=coefficients,
        region_weights=counts,
        feature_std=std,
    )


def weighted_mean_coefficients(regionset: RegionSet) -> np.ndarray:
    """Signed sample-weighted mean LLM coefficient per feature.

    The sign is the point of this summary: a conceptually sound model should
    show a positive mean coefficient for a known risk-increasing feature and
    a negative one for a known risk-decreasing feature.
    """
    coefficients = np.vstack([r.affine.w for r in regionset.regions])
    counts = np.array([r.count for r in regionset.regions], dtype=np.float64)
    return (counts / counts.sum()) @ coefficients


@dataclass(frozen=True)
class ProfileSegment:
    """One region's linear effect of a single feature over its observed range."""

    region_id: int
    feature: int
    lo: float
    hi: float
    slope: float
    intercept: float  # anchored at the region means of the other features
    weight: int


def profile(
    regionset: RegionSet,
    X,
    feature: int,
    min_count: int | None = None,
    min_count_frac: float = 0.005,
) -> list[ProfileSegment]:
    """Per-region line segments for one feature.

    Segment r draws y = slope * x_j + intercept where slope is the region
    LLM's j-th coefficient and the intercept anchors the remaining features
    at their region means, so the line passes through the region's centroid
    prediction. Only regions with count >= max(5, min_count_frac * n) are
    emitted (labels are not available here, so the class-mix half of the
    non-trivial rule does not apply).
    """
    X = np.asarray(X, dtype=np.float64)
    d = regionset.input_dim
    if not 0 <= feature < d:
        raise InputError(f"feature {feature} out of range for input_dim {d}")
    if X.shape != (regionset.n_samples, d):
        raise InputError(
            f"X shape {X.shape} does not match region set ({regionset.n_samples}, {d})"
        )
    if min_count is None:
        min_count = max(5, int(np.ceil(min_count_frac * regionset.n_samples)))
    segments = []
    for rid, region in enumerate(regionset.regions):
        if region.count < min_count or region.sample_indices is None:
            continue
        rows = X[region.sample_indices]
        w = region.affine.w
        others = w @ rows.mean(axis=0) - w[feature] * rows[:, feature].mean()
        segments.append(
            ProfileSegment(
                region_id=rid,
                feature=feature,
                lo=float(rows[:, feature].min()),
                hi=float(rows[:, feature].max()),
                slope=float(w[feature]),
                intercept=float(region.affine.b + others),
                weight=region.count,
            )
        )
    return segments
