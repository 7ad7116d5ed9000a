"""Merge regions into K refitted local models and flatten to a shallow net.

Regions with similar local linear behavior are clustered on their
standardized (w, b) coefficient vectors with count-weighted k-means
(k-means++ seeding, 10 restarts, best inertia wins). Each cluster's pooled
samples get one L2-penalized logistic refit. The merged model keeps the
original network for routing: a pattern lookup table maps seen patterns to
clusters, and unseen patterns fall back to the nearest cluster centroid in
the same standardized coefficient space, so prediction is total.

Flattening turns the K refit affines into the hidden layer of a
single-hidden-layer network and retrains only the output weights (same
penalized logistic solver, on the hidden activations).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputError, NumericError, StaleIndexError
from .metrics import check_binary_labels
from .network import AffineMap, Layer, NetworkSpec, affine_for_pattern, bits_to_pattern, fingerprint, forward_batch, sigmoid
from .unwrap import RegionSet, RegionSummaryRow, summary_rows


# ---------------------------------------------------------------------------
# penalized logistic refit


def logistic_objective(w, b, X, y, C: float) -> float:
    """(1/C) * 0.5 * ||w||^2 + sum of log-losses on the logit w.x + b."""
    z = X @ w + b
    return 0.5 * float(w @ w) / C + float(np.sum(np.logaddexp(0.0, z) - y * z))


def logistic_gradient(w, b, X, y, C: float) -> np.ndarray:
    """Gradient of logistic_objective, stacked as [dw..., db]."""
    r = sigmoid(X @ w + b) - y
    return np.concatenate([X.T @ r + w / C, [r.sum()]])


def refit_local(X, y, C: float = 0.1, tol: float = 1e-8, max_iter: int = 1000) -> AffineMap:
    """Damped-Newton fit of an L2-penalized logistic regression.

    The intercept is not penalized. Convergence means the gradient inf-norm
    is at or below tol; the penalty makes the weight part strictly convex,
    so even single-class or separated subsets return finite coefficients.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"X must be a non-empty 2-D matrix, got shape {X.shape}")
    if C <= 0:
        raise InputError(f"C must be > 0, got {C}")
    y = check_binary_labels(y).astype(np.float64)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    obj = logistic_objective(w, b, X, y, C)
    for _ in range(max_iter):
        g = logistic_gradient(w, b, X, y, C)
        if np.abs(g).max() <= tol:
            break
        z = X @ w + b
        p = sigmoid(z)
        s = p * (1.0 - p)
        H = np.empty((d + 1, d + 1))
        Xs = X * s[:, None]
        H[:d, :d] = X.T @ Xs + np.eye(d) / C
        H[:d, d] = Xs.sum(axis=0)
        H[d, :d] = H[:d, d]
        H[d, d] = s.sum()
        step = None
        damping = 0.0
        for _ in range(40):
            try:
                step = np.linalg.solve(H + damping * np.eye(d + 1), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                break
            damping = max(damping * 10.0, 1e-10 * (1.0 + np.trace(H)))
        if step is None or not np.all(np.isfinite(step)):
            raise NumericError("Newton step failed: singular Hessian beyond damping")
        # Armijo backtracking on the full objective
        slope = float(g @ step)
        t = 1.0
        while t > 1e-12:
            w_new = w + t * step[:d]
            b_new = b + t * step[d]
            obj_new = logistic_objective(w_new, b_new, X, y, C)
            if obj_new <= obj + 1e-4 * t * slope:
                break
            t /= 2.0
        w, b = w + t * step[:d], b + t * step[d]
        obj = logistic_objective(w, b, X, y, C)
    return AffineMap(w=w, b=b)


# ---------------------------------------------------------------------------
# count-weighted k-means on standardized coefficient vectors


class _EmptyCluster(Exception):
    pass


def _kmeans_pp_init(points, weights, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.choice(n, p=weights / weights.sum())]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        mass = weights * d2
        total = mass.sum()
        if total > 0:
            centers[i] = points[rng.choice(n, p=mass / total)]
        else:  # all remaining points coincide with chosen centers
            centers[i] = points[rng.choice(n)]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, weights, k, rng, max_iter):
    centers = _kmeans_pp_init(points, weights, k, rng)
    prev_labels = None
    prev_inertia = np.inf
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        inertia = float((weights * d2[np.arange(points.shape[0]), labels]).sum())
        if inertia > prev_inertia * (1.0 + 1e-12) + 1e-12:
            raise NumericError(
                f"k-means inertia increased ({prev_inertia} -> {inertia})"
            )
        prev_inertia = inertia
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
        for c in range(k):
            mask = labels == c
            wsum = weights[mask].sum()
            if wsum <= 0:
                raise _EmptyCluster
            centers[c] = weights[mask] @ points[mask] / wsum
    return prev_labels, centers, prev_inertia


def weighted_kmeans(
    points,
    weights,
    k: int,
    seed: int = 0,
    n_restarts: int = 10,
    max_iter: int = 100,
    max_failures: int = 10,
):
    """Count-weighted Lloyd iterations, best weighted inertia over restarts.

    Empty clusters abort the restart and a re-seeded one takes its place;
    after max_failures aborted restarts a NumericError is raised.
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if k < 1 or k > points.shape[0]:
        raise InfeasibleError(f"k={k} infeasible for {points.shape[0]} points")
    streams = np.random.SeedSequence(entropy=seed).spawn(n_restarts + max_failures)
    best = None
    completed = 0
    failures = 0
    for stream in streams:
        if completed == n_restarts:
            break
        try:
            labels, centers, inertia = _lloyd(points, weights, k, np.random.default_rng(stream), max_iter)
        except _EmptyCluster:
            failures += 1
            if failures >= max_failures:
                raise NumericError(
                    f"k-means produced an empty cluster in {failures} restarts"
                ) from None
            continue
        completed += 1
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    if best is None:
        raise NumericError("k-means completed no restart")
    return best


# ---------------------------------------------------------------------------
# merged model


@dataclass(frozen=True)
class MergedCluster:
    refit: AffineMap
    member_patterns: tuple[str, ...]
    centroid: np.ndarray  # standardized coefficient space, length d+1
    count: int
    sample_indices: np.ndarray | None


@dataclass(frozen=True)
class MergedModel:
    """K cluster-refitted local models plus the pattern -> cluster lookup."""

    k: int
    clusters: tuple[MergedCluster, ...]
    lookup: dict
    C: float
    seed: int
    net_fingerprint: str
    n_samples: int
    coef_mean: np.ndarray  # standardization of the (w, b) space, for routing
    coef_std: np.ndarray

    def __post_init__(self):
        counted = sum(len(c.member_patterns) for c in self.clusters)
        if counted != len(self.lookup):
            raise InputError("cluster member patterns do not partition the lookup table")


def region_coefficients(regionset: RegionSet) -> np.ndarray:
    """R x (d+1) matrix of raw (w, b) vectors in region order."""
    return np.vstack([np.append(r.affine.w, r.affine.b) for r in regionset.regions])


def merge_regions(
    regionset: RegionSet, X, y, k: int, C: float = 0.1, seed: int = 0
) -> MergedModel:
    """Cluster regions on standardized (w, b) vectors and refit each cluster.

    Steps: standardize the coefficient vectors, run count-weighted k-means
    (k-means++ seeding, 10 restarts), pool each cluster's member samples,
    and fit one penalized logistic regression per cluster. Single-sample
    regions take part with weight 1. Clusters come back sorted by pooled
    count descending.
    """
    if len(regionset) == 0:
        raise InputError("region set is empty")
    if not regionset.has_sample_indices():
        raise InputError("region set was saved without sample indices; cannot merge")
    if k < 1 or k > len(regionset):
        raise InfeasibleError(f"k must be in [1, {len(regionset)}], got {k}")
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y)
    if X.shape[0] != regionset.n_samples:
        raise InputError(
            f"X has {X.shape[0]} rows but region set indexes {regionset.n_samples}"
        )

    coefs = region_coefficients(regionset)
    mean = coefs.mean(axis=0)
    std = coefs.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    standardized = (coefs - mean) / std
    counts = np.array([r.count for r in regionset.regions], dtype=np.float64)
    labels, centers, _ = weighted_kmeans(standardized, counts, k, seed=seed)

    order = sorted(
        range(k),
        key=lambda c: (
            -counts[labels == c].sum(),
            min(regionset.regions[i].pattern for i in np.flatnonzero(labels == c)),
        ),
    )
    clusters = []
    lookup = {}
    for new_id, c in enumerate(order):
        member_ids = np.flatnonzero(labels == c)
        patterns = tuple(sorted(regionset.regions[i].pattern for i in member_ids))
        pooled = np.sort(
            np.concatenate([regionset.regions[i].sample_indices for i in member_ids])
        )
        refit = refit_local(X[pooled], y[pooled], C=C)
        clusters.append(
            MergedCluster(
                refit=refit,
                member_patterns=patterns,
                centroid=centers[c],
                count=int(pooled.shape[0]),
                sample_indices=pooled,
            )
        )
        for p in patterns:
            lookup[p] = new_id
    if sum(c.count for c in clusters) != regionset.n_samples:
        raise NumericError("merged clusters do not partition the samples")
    return MergedModel(
        k=k,
        clusters=tuple(clusters),
        lookup=lookup,
        C=C,
        seed=seed,
        net_fingerprint=regionset.net_fingerprint,
        n_samples=regionset.n_samples,
        coef_mean=mean,
        coef_std=std,
    )


def _route_patterns(merged: MergedModel, net: NetworkSpec, bit_rows) -> np.ndarray:
    """Cluster ids for activation bit rows; unseen patterns go to the nearest centroid."""
    centroids = np.vstack([c.centroid for c in merged.clusters])
    ids = np.empty(bit_rows.shape[0], dtype=np.int64)
    for i, row in enumerate(bit_rows):
        pattern = bits_to_pattern(row)
        hit = merged.lookup.get(pattern)
        if hit is None:
            affine = affine_for_pattern(net, pattern)
            vec = (np.append(affine.w, affine.b) - merged.coef_mean) / merged.coef_std
            hit = int(((centroids - vec) ** 2).sum(axis=1).argmin())
        ids[i] = hit
    return ids


def predict_merged(merged: MergedModel, net: NetworkSpec, x) -> tuple[float, int]:
    """Route one input to its cluster and score it with the cluster's refit."""
    logits, ids = predict_merged_batch(merged, net, np.asarray(x, dtype=np.float64)[None, :])
    return float(logits[0]), int(ids[0])


def predict_merged_batch(merged: MergedModel, net: NetworkSpec, X) -> tuple[np.ndarray, np.ndarray]:
    if fingerprint(net) != merged.net_fingerprint:
        raise StaleIndexError(
            "merged model was built from a different network (fingerprint mismatch)"
        )
    X = np.asarray(X, dtype=np.float64)
    _, bits = forward_batch(net, X)
    ids = _route_patterns(merged, net, bits)
    logits = np.empty(X.shape[0])
    for c, cluster in enumerate(merged.clusters):
        mask = ids == c
        if mask.any():
            logits[mask] = cluster.refit.batch(X[mask])
    return logits, ids


def merged_table(merged: MergedModel, X, y) -> list[RegionSummaryRow]:
    """Table-style summary of the merged clusters (same path as region_table)."""
    if any(c.sample_indices is None for c in merged.clusters):
        raise InputError("merged model was saved without sample indices; cannot summarize")
    return summary_rows(
        [c.refit for c in merged.clusters],
        [c.sample_indices for c in merged.clusters],
        X,
        y,
    )


def flatten(merged: MergedModel, X, y, C: float | None = None) -> NetworkSpec:
    """Single-hidden-layer network from the merged refits.

    Hidden neuron k carries cluster k's refit affine; only the output layer
    is trained, with the same penalized logistic solver on the hidden ReLU
    activations. The result is an ordinary NetworkSpec.
    """
    if C is None:
        C = merged.C
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y)
    w_hidden = np.vstack([c.refit.w for c in merged.clusters])
    b_hidden = np.array([c.refit.b for c in merged.clusters])
    hidden = np.maximum(X @ w_hidden.T + b_hidden, 0.0)
    out = refit_local(hidden, y, C=C)
    return NetworkSpec(
        layers=(
            Layer(weights=w_hidden, bias=b_hidden),
            Layer(weights=out.w[None, :], bias=np.array([out.b])),
        )
    )


# ---------------------------------------------------------------------------
# serialization and guidance


def merged_to_document(merged: MergedModel, include_indices: bool = True) -> dict:
    return {
        "k": merged.k,
        "C": merged.C,
        "seed": merged.seed,
        "fingerprint": merged.net_fingerprint,
        "n_samples": merged.n_samples,
        "coef_mean": merged.coef_mean.tolist(),
        "coef_std": merged.coef_std.tolist(),
        "lookup": dict(sorted(merged.lookup.items())),
        "clusters": [
            {
                "w": c.refit.w.tolist(),
                "b": c.refit.b,
                "centroid": c.centroid.tolist(),
                "member_patterns": list(c.member_patterns),
                "count": c.count,
                **(
                    {"sample_indices": c.sample_indices.tolist()}
                    if include_indices and c.sample_indices is not None
                    else {}
                ),
            }
            for c in merged.clusters
        ],
    }


def merged_from_document(doc: dict) -> MergedModel:
    try:
        clusters = tuple(
            MergedCluster(
                refit=AffineMap(w=np.array(raw["w"]), b=raw["b"]),
                member_patterns=tuple(raw["member_patterns"]),
                centroid=np.array(raw["centroid"], dtype=np.float64),
                count=int(raw["count"]),
                sample_indices=(
                    np.array(raw["sample_indices"], dtype=np.int64)
                    if "sample_indices" in raw
                    else None
                ),
            )
            for raw in doc["clusters"]
        )
        return MergedModel(
            k=int(doc["k"]),
            clusters=clusters,
            lookup={p: int(c) for p, c in doc["lookup"].items()},
            C=float(doc["C"]),
            seed=int(doc["seed"]),
            net_fingerprint=doc["fingerprint"],
            n_samples=int(doc["n_samples"]),
            coef_mean=np.array(doc["coef_mean"], dtype=np.float64),
            coef_std=np.array(doc["coef_std"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed merged model document: {exc}") from exc


def silhouette_scan(regionset: RegionSet, k_values=range(2, 11), seed: int = 0) -> list[tuple[int, float]]:
    """Guidance only: count-weighted silhouette score per candidate K.

    Scores cluster the same standardized coefficient vectors the merge step
    uses. Singleton clusters score 0, matching the usual convention.
    """
    coefs = region_coefficients(regionset)
    mean = coefs.mean(axis=0)
    std = coefs.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    Z = (coefs - mean) / std
    counts = np.array([r.count for r in regionset.regions], dtype=np.float64)
    dist = np.sqrt(np.maximum(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2), 0.0))
    results = []
    for k in k_values:
        if k >= Z.shape[0]:
            continue
        labels, _, _ = weighted_kmeans(Z, counts, k, seed=seed)
        s = np.zeros(Z.shape[0])
        for i in range(Z.shape[0]):
            same = labels == labels[i]
            w_same = counts[same].sum() - counts[i]
            if w_same <= 0:
                continue  # singleton -> 0
            a = float((counts[same] @ dist[i, same]) / w_same)
            b = np.inf
            for c in np.unique(labels):
                if c == labels[i]:
                    continue
                other = labels == c
                b = min(b, float((counts[other] @ dist[i, other]) / counts[other].sum()))
            denom = max(a, b)
            s[i] = (b - a) / denom if denom > 0 else 0.0
        results.append((int(k), float((counts @ s) / counts.sum())))
    return results
