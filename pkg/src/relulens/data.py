"""Synthetic data generators, grouped splitting, and the dataset CSV schema.

The CSV schema: one header row, numeric feature columns, a binary label
column named 'y', and an optional 'group_id' column for panel data where
all rows of a group must land in the same split.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InfeasibleError, InputError
from .metrics import check_binary_labels

LABEL_COLUMN = "y"
GROUP_COLUMN = "group_id"

# gen_balanced_default designates these feature indices as its known
# monotone ground truths; see the generator docstring.
INCREASING_RISK_FEATURE = 0
DECREASING_RISK_FEATURE = 1
HORIZON_FEATURE = 2


def gen_cocircles(
    n: int = 2000, noise_sd: float = 0.1, factor: float = 0.5, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Two concentric circles: n/2 points on radius 1 (label 0) and n/2 on
    radius ``factor`` (label 1), uniform angles, isotropic Gaussian noise.
    """
    if n % 2 != 0:
        raise InputError(f"n must be even, got {n}")
    if not 0.0 < factor < 1.0:
        raise InputError(f"factor must be in (0, 1), got {factor}")
    if noise_sd < 0:
        raise InputError(f"noise_sd must be >= 0, got {noise_sd}")
    rng = np.random.default_rng(seed)
    half = n // 2
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radius = np.concatenate([np.ones(half), np.full(half, factor)])
    X = radius[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if noise_sd > 0:
        X = X + rng.normal(0.0, noise_sd, size=X.shape)
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    return X, y


def gen_balanced_default(
    n: int = 4000, d: int = 8, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Balanced synthetic panel with known monotone ground truth.

    Stand-in for a proprietary loan-default panel: rows are repeated
    observations of synthetic ids (every id has >= 2 rows), the label is
    exactly balanced (n/2 per class), and two designated features carry the
    ground truth the model is expected to recover:

      - feature 0 drives risk up (higher value -> more likely label 1),
      - feature 1 drives risk down,
      - feature 2 is a within-id observation-time index (horizon-like),
      - remaining features are uninformative noise.

    Labels are the top half of a noisy latent score, which keeps the class
    balance exact while preserving the monotone relationships in rank terms.
    """
    if n % 2 != 0:
        raise InputError(f"n must be even, got {n}")
    if n < 4:
        raise InputError(f"n must be at least 4, got {n}")
    if d < 3:
        raise InputError(f"d must be at least 3, got {d}")
    rng = np.random.default_rng(seed)

    # panel sizes in {2,3,4} summing exactly to n
    sizes = []
    remaining = n
    while remaining > 0:
        k = int(rng.integers(2, 5))
        if remaining - k == 1:  # never strand a single-row id
            k += 1
        k = min(k, remaining)
        sizes.append(k)
        remaining -= k
    group_ids = np.repeat(np.arange(len(sizes)), sizes)

    base_up = np.repeat(rng.normal(0.0, 1.0, size=len(sizes)), sizes)
    base_down = np.repeat(rng.normal(0.0, 1.0, size=len(sizes)), sizes)
    X = rng.normal(0.0, 1.0, size=(n, d))
    X[:, INCREASING_RISK_FEATURE] = base_up + 0.3 * X[:, INCREASING_RISK_FEATURE]
    X[:, DECREASING_RISK_FEATURE] = base_down + 0.3 * X[:, DECREASING_RISK_FEATURE]
    horizon = np.concatenate([np.arange(k, dtype=np.float64) for k in sizes])
    X[:, HORIZON_FEATURE] = horizon

    latent = (
        2.0 * X[:, INCREASING_RISK_FEATURE]
        - 2.0 * X[:, DECREASING_RISK_FEATURE]
        + 0.25 * X[:, HORIZON_FEATURE]
        + rng.normal(0.0, 0.75, size=n)
    )
    y = np.zeros(n, dtype=np.int64)
    y[np.argsort(latent, kind="stable")[n // 2 :]] = 1
    return X, y, group_ids


def group_split(group_ids, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> tuple[np.ndarray, ...]:
    """Allocate whole groups to splits; returns row-index arrays per fraction.

    Groups are shuffled with the seed and cut so each split's group count is
    within one group of fractions * n_groups. Every group's rows land in
    exactly one split.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.ndim != 1 or fractions.size < 1:
        raise InputError("fractions must be a non-empty sequence")
    if (fractions <= 0).any():
        raise InputError(f"fractions must all be positive, got {fractions.tolist()}")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise InputError(f"fractions must sum to 1, got {fractions.sum()}")
    group_ids = np.asarray(group_ids)
    if group_ids.ndim != 1:
        raise InputError("group_ids must be 1-D")
    groups = np.unique(group_ids)
    n_groups = groups.shape[0]
    n_splits = fractions.shape[0]
    if n_groups < n_splits:
        raise InfeasibleError(
            f"cannot form {n_splits} nonempty splits from {n_groups} group(s)"
        )
    rng = np.random.default_rng(seed)
    shuffled = groups[rng.permutation(n_groups)]
    # cumulative rounding, then force at least one group per split
    bounds = np.rint(np.cumsum(fractions) * n_groups).astype(np.int64)
    bounds[-1] = n_groups
    for i in range(n_splits - 1):
        lo = i + 1  # at least one group for splits 0..i
        hi = n_groups - (n_splits - 1 - i)  # leave one per remaining split
        bounds[i] = min(max(bounds[i], lo, bounds[i - 1] + 1 if i else lo), hi)
    split_of_group = {}
    start = 0
    for split_idx, stop in enumerate(bounds):
        for g in shuffled[start:stop]:
            split_of_group[g] = split_idx
        start = stop
    assignments = np.array([split_of_group[g] for g in group_ids])
    return tuple(np.flatnonzero(assignments == s) for s in range(n_splits))


@dataclass(frozen=True)
class Dataset:
    """In-memory view of a dataset CSV."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    group_ids: np.ndarray | None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def feature_index(self, name_or_index: str) -> int:
        """Resolve a --profile style argument: feature name or integer index."""
        if name_or_index in self.feature_names:
            return self.feature_names.index(name_or_index)
        try:
            idx = int(name_or_index)
        except ValueError:
            raise InputError(
                f"unknown feature {name_or_index!r}; available: {self.feature_names}"
            ) from None
        if not 0 <= idx < len(self.feature_names):
            raise InputError(
                f"feature index {idx} out of range for {len(self.feature_names)} features"
            )
        return idx


def load_dataset(path) -> Dataset:
    """Read a dataset CSV; errors carry column context."""
    df = pd.read_csv(path)
    if LABEL_COLUMN not in df.columns:
        raise InputError(f"dataset {path} has no label column named {LABEL_COLUMN!r}")
    try:
        y = check_binary_labels(df[LABEL_COLUMN].to_numpy())
    except InputError as exc:
        raise InputError(f"column {LABEL_COLUMN!r}: {exc}") from exc
    group_ids = None
    if GROUP_COLUMN in df.columns:
        group_ids = df[GROUP_COLUMN].to_numpy()
    feature_names = [c for c in df.columns if c not in (LABEL_COLUMN, GROUP_COLUMN)]
    if not feature_names:
        raise InputError(f"dataset {path} has no feature columns")
    columns = []
    for name in feature_names:
        try:
            columns.append(pd.to_numeric(df[name], errors="raise").to_numpy(dtype=np.float64))
        except (ValueError, TypeError) as exc:
            raise InputError(f"feature column {name!r} is not numeric: {exc}") from exc
    X = np.column_stack(columns)
    if not np.all(np.isfinite(X)):
        bad = [feature_names[j] for j in np.unique(np.nonzero(~np.isfinite(X))[1])]
        raise InputError(f"feature columns {bad} contain non-finite values")
    return Dataset(X=X, y=y, feature_names=feature_names, group_ids=group_ids)


def write_dataset_csv(path, X, y, feature_names=None, group_ids=None) -> None:
    X = np.asarray(X, dtype=np.float64)
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    frame = pd.DataFrame(X, columns=feature_names)
    frame[LABEL_COLUMN] = np.asarray(y, dtype=np.int64)
    if group_ids is not None:
        frame[GROUP_COLUMN] = group_ids
    frame.to_csv(path, index=False)
