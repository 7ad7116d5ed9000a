"""Partition a dataset by activation pattern and attach exact local linear models.

Each distinct activation pattern observed in the data defines one region;
the region's local linear model (LLM) is the exact affine logit map composed
from the network for that pattern. Only data-supported regions are
enumerated, never the full arrangement of feasible regions.
"""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError, StaleIndexError
from .metrics import auc_or_none, check_binary_labels
from .network import (
    AffineMap,
    NetworkSpec,
    affine_for_pattern,
    bits_to_pattern,
    fingerprint,
    forward_batch,
)

REGION_TABLE_COLUMNS = (
    "region_id",
    "count",
    "response_mean",
    "response_std",
    "local_auc",
    "global_auc",
)


@dataclass(frozen=True)
class LocalLinearModel:
    """Exact affine logit map valid on one region, with data provenance."""

    pattern: str
    affine: AffineMap
    count: int
    sample_indices: np.ndarray | None  # sorted ascending; None if stripped on save

    def __post_init__(self):
        if self.sample_indices is not None:
            idx = np.asarray(self.sample_indices, dtype=np.int64)
            idx.setflags(write=False)
            object.__setattr__(self, "sample_indices", idx)
            if self.count != idx.shape[0]:
                raise InputError(
                    f"region {self.pattern!r}: count {self.count} != "
                    f"{idx.shape[0]} sample indices"
                )


@dataclass(frozen=True)
class RegionSet:
    """All data-supported regions of one network on one dataset.

    Regions are sorted by (count desc, pattern asc), which makes top-k
    listings prefix-stable and serialization deterministic.
    """

    net_fingerprint: str
    regions: tuple[LocalLinearModel, ...]
    n_samples: int

    def __post_init__(self):
        object.__setattr__(
            self,
            "_pattern_index",
            {r.pattern: i for i, r in enumerate(self.regions)},
        )

    def region_id_for(self, pattern: str) -> int | None:
        return self._pattern_index.get(pattern)

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def input_dim(self) -> int:
        return self.regions[0].affine.w.shape[0]

    def has_sample_indices(self) -> bool:
        return all(r.sample_indices is not None for r in self.regions)


@dataclass(frozen=True)
class Unseen:
    """Marker for an activation pattern absent from a RegionSet."""

    pattern: str


def unwrap(net: NetworkSpec, X) -> RegionSet:
    """Group samples by activation pattern and attach the exact LLM per region."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"X must be a 2-D matrix, got shape {X.shape}")
    n = X.shape[0]
    if n < 1:
        raise InputError("X needs at least one sample")
    _, bits = forward_batch(net, X)
    unique_bits, inverse = np.unique(bits, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    boundaries = np.searchsorted(inverse[order], np.arange(unique_bits.shape[0] + 1))
    regions = []
    for g in range(unique_bits.shape[0]):
        idx = np.sort(order[boundaries[g] : boundaries[g + 1]])
        pattern = bits_to_pattern(unique_bits[g])
        regions.append(
            LocalLinearModel(
                pattern=pattern,
                affine=affine_for_pattern(net, pattern),
                count=idx.shape[0],
                sample_indices=idx,
            )
        )
    regions.sort(key=lambda r: (-r.count, r.pattern))
    return RegionSet(net_fingerprint=fingerprint(net), regions=tuple(regions), n_samples=n)


def _check_fingerprint(net: NetworkSpec, net_fp: str) -> None:
    if fingerprint(net) != net_fp:
        raise StaleIndexError(
            "region index was built from a different network (fingerprint mismatch)"
        )


def assign_region(net: NetworkSpec, regionset: RegionSet, x) -> int | Unseen:
    """Region id whose pattern matches x, or Unseen carrying the fresh pattern."""
    _check_fingerprint(net, regionset.net_fingerprint)
    _, bits = forward_batch(net, np.asarray(x, dtype=np.float64)[None, :])
    pattern = bits_to_pattern(bits[0])
    rid = regionset.region_id_for(pattern)
    return rid if rid is not None else Unseen(pattern)


def assign_regions(net: NetworkSpec, regionset: RegionSet, X) -> list[int | Unseen]:
    """Vectorized assign_region over the rows of X."""
    _check_fingerprint(net, regionset.net_fingerprint)
    _, bits = forward_batch(net, X)
    out: list[int | Unseen] = []
    for row in bits:
        pattern = bits_to_pattern(row)
        rid = regionset.region_id_for(pattern)
        out.append(rid if rid is not None else Unseen(pattern))
    return out


@dataclass(frozen=True)
class RegionSummaryRow:
    region_id: int
    count: int
    response_mean: float
    response_std: float
    local_auc: float | None
    global_auc: float | None


def summary_rows(affines, index_groups, X, y) -> list[RegionSummaryRow]:
    """Shared summary path for unwrapped regions and merged clusters.

    local_auc scores each group's own samples with its affine map;
    global_auc scores the full dataset with that same map. Either is None
    when the corresponding label slice has a single class.
    """
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y)
    if X.shape[0] != y.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    rows = []
    for rid, (affine, idx) in enumerate(zip(affines, index_groups)):
        idx = np.asarray(idx, dtype=np.int64)
        y_local = y[idx]
        scores_local = affine.batch(X[idx])
        rows.append(
            RegionSummaryRow(
                region_id=rid,
                count=int(idx.shape[0]),
                response_mean=float(y_local.mean()),
                response_std=float(y_local.std()),
                local_auc=auc_or_none(scores_local, y_local),
                global_auc=auc_or_none(affine.batch(X), y),
            )
        )
    return rows


def region_table(regionset: RegionSet, X, y, top: int | None = None) -> list[RegionSummaryRow]:
    """Per-region summary in region order (count desc); optionally top-k only."""
    if not regionset.has_sample_indices():
        raise InputError("region set was saved without sample indices; cannot summarize")
    regions = regionset.regions if top is None else regionset.regions[:top]
    if X is not None and np.asarray(X).shape[0] != regionset.n_samples:
        raise InputError(
            f"X has {np.asarray(X).shape[0]} rows but region set indexes "
            f"{regionset.n_samples} samples"
        )
    return summary_rows(
        [r.affine for r in regions], [r.sample_indices for r in regions], X, y
    )


def region_table_csv(rows) -> str:
    """Render summary rows with the canonical six columns; None AUC is blank."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REGION_TABLE_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.region_id,
                r.count,
                repr(r.response_mean),
                repr(r.response_std),
                "" if r.local_auc is None else repr(r.local_auc),
                "" if r.global_auc is None else repr(r.global_auc),
            ]
        )
    return buf.getvalue()


def nontrivial_mask(
    regionset: RegionSet,
    y,
    min_count: int | None = None,
    min_count_frac: float = 0.005,
) -> np.ndarray:
    """Which regions are non-trivial: large enough and with both classes present.

    The default size threshold is max(5, min_count_frac * n_samples).
    """
    y = check_binary_labels(y)
    if min_count is None:
        min_count = max(5, int(np.ceil(min_count_frac * regionset.n_samples)))
    mask = np.zeros(len(regionset), dtype=bool)
    for i, region in enumerate(regionset.regions):
        if region.count < min_count or region.sample_indices is None:
            continue
        y_local = y[region.sample_indices]
        mask[i] = bool(y_local.min() == 0 and y_local.max() == 1)
    return mask


def regionset_to_document(
    regionset: RegionSet, include_indices: bool = True, meta: dict | None = None
) -> dict:
    doc = {
        "fingerprint": regionset.net_fingerprint,
        "n_samples": regionset.n_samples,
        "regions": [
            {
                "pattern": r.pattern,
                "w": r.affine.w.tolist(),
                "b": r.affine.b,
                "count": r.count,
                **(
                    {"sample_indices": r.sample_indices.tolist()}
                    if include_indices and r.sample_indices is not None
                    else {}
                ),
            }
            for r in regionset.regions
        ],
    }
    if meta is not None:
        doc["meta"] = meta
    return doc


def regionset_from_document(doc: dict) -> RegionSet:
    try:
        regions = tuple(
            LocalLinearModel(
                pattern=raw["pattern"],
                affine=AffineMap(w=np.array(raw["w"]), b=raw["b"]),
                count=int(raw["count"]),
                sample_indices=(
                    np.array(raw["sample_indices"], dtype=np.int64)
                    if "sample_indices" in raw
                    else None
                ),
            )
            for raw in doc["regions"]
        )
        return RegionSet(
            net_fingerprint=doc["fingerprint"],
            regions=regions,
            n_samples=int(doc["n_samples"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed region set document: {exc}") from exc
