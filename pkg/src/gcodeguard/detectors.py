"""Unsupervised detectors that flag compromised files in a corpus.

Five detectors share one input, the corpus ``FeatureMatrix``:

    single_stat        modified z-score on the G1 count, two-sided
    combined_stat      one-sided G1-low / G0-high z-scores plus the
                       E-decimal anomaly count
    pca_agglomerative  standardize -> 2-component PCA -> Ward clustering,
                       flag tiny clusters
    pca_meanshift      standardize -> 2-component PCA -> flat-kernel mean
                       shift, flag tiny clusters
    dbscan             density scan on the standardized 11-dim vectors,
                       flag noise and tiny clusters

None of them uses ground truth, a reference model, or fitted state from
other corpora; everything is relative to the corpus at hand. Clustering is
implemented here directly so the only numerical dependency is numpy.

Modified z-scores follow the 0.6745 * (x - median) / MAD convention with
threshold 3.5. When MAD degenerates to zero the detectors fall back to
Tukey fences at 1.5 IQR.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureMatrix, standardize

__all__ = [
    "DETECTOR_NAMES",
    "FlagSet",
    "modified_zscores",
    "outlier_mask",
    "detect_single_stat",
    "detect_combined_stat",
    "PCAModel",
    "fit_pca",
    "cluster_agglomerative",
    "cluster_meanshift",
    "cluster_dbscan",
    "knee_epsilon",
    "flags_from_clusters",
    "run_detector",
]

Z_THRESHOLD = 3.5
Z_SCALE = 0.6745
SMALL_CLUSTER_FRACTION = 0.01


@dataclass(frozen=True)
class FlagSet:
    """One detector's verdict on a corpus.

    ``flagged`` holds the paths judged compromised, sorted. ``scores`` maps
    every path to that detector's suspicion score (see ``parameters`` for
    the score's meaning; higher is always more suspicious).
    """

    detector: str
    parameters: dict
    flagged: tuple[str, ...]
    scores: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "detector": self.detector,
            "parameters": self.parameters,
            "flagged": list(self.flagged),
            "scores": {k: self.scores[k] for k in sorted(self.scores)},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )

    @staticmethod
    def load(path: str | Path) -> "FlagSet":
        data = json.loads(Path(path).read_text())
        return FlagSet(
            detector=data["detector"],
            parameters=data["parameters"],
            flagged=tuple(data["flagged"]),
            scores={k: float(v) for k, v in data["scores"].items()},
        )


def modified_zscores(values: np.ndarray) -> np.ndarray | None:
    """0.6745 * (x - median) / MAD, or None when the MAD is zero."""
    values = np.asarray(values, dtype=np.float64)
    med = np.median(values)
    mad = np.median(np.abs(values - med))
    if mad == 0.0:
        return None
    return Z_SCALE * (values - med) / mad


def outlier_mask(values: np.ndarray, side: str, threshold: float = Z_THRESHOLD) -> np.ndarray:
    """Boolean outlier mask on one value series.

    ``side`` is ``"low"``, ``"high"`` or ``"both"``. Uses modified z-scores;
    if the MAD is zero, falls back to 1.5 IQR Tukey fences (and flags
    nothing when the IQR is zero as well, i.e. a near-constant series).
    """
    values = np.asarray(values, dtype=np.float64)
    z = modified_zscores(values)
    if z is not None:
        if side == "low":
            return z < -threshold
        if side == "high":
            return z > threshold
        return np.abs(z) > threshold
    q1, q3 = np.percentile(values, [25, 75])
    iqr = q3 - q1
    if iqr == 0.0:
        return np.zeros(len(values), dtype=bool)
    low = values < q1 - 1.5 * iqr
    high = values > q3 + 1.5 * iqr
    if side == "low":
        return low
    if side == "high":
        return high
    return low | high


def _flagset(name: str, parameters: dict, fm: FeatureMatrix, mask: np.ndarray,
             scores: np.ndarray) -> FlagSet:
    flagged = tuple(sorted(p for p, m in zip(fm.paths, mask) if m))
    return FlagSet(
        detector=name,
        parameters=parameters,
        flagged=flagged,
        scores={p: float(s) for p, s in zip(fm.paths, scores)},
    )


def detect_single_stat(fm: FeatureMatrix, threshold: float = Z_THRESHOLD) -> FlagSet:
    """Two-sided modified z-score test on the G1 count alone."""
    g1 = fm.column("G1")
    mask = outlier_mask(g1, "both", threshold)
    z = modified_zscores(g1)
    scores = np.abs(z) if z is not None else np.zeros(len(g1))
    return _flagset(
        "single_stat",
        {"statistic": "G1 count", "threshold": threshold, "score": "abs modified z"},
        fm,
        mask,
        scores,
    )


def detect_combined_stat(fm: FeatureMatrix, threshold: float = Z_THRESHOLD) -> FlagSet:
    """G1-count drop, G0-count spike, or any off-mode E-decimal token.

    The attacks this rule models remove extruding moves (G1 goes down,
    sometimes G0 goes up) or rewrite E values with a different number of
    decimal places, so each branch is one-sided.
    """
    g1 = fm.column("G1")
    g0 = fm.column("G0")
    anomalies = fm.e_decimal_anomalies
    mask = (
        outlier_mask(g1, "low", threshold)
        | outlier_mask(g0, "high", threshold)
        | (anomalies > 0)
    )
    zg1 = modified_zscores(g1)
    zg0 = modified_zscores(g0)
    base = np.zeros(len(g1))
    if zg1 is not None:
        base = np.maximum(base, -zg1)
    if zg0 is not None:
        base = np.maximum(base, zg0)
    scores = base + anomalies.astype(np.float64)
    return _flagset(
        "combined_stat",
        {
            "statistics": ["G1 count low", "G0 count high", "E-decimal anomalies"],
            "threshold": threshold,
            "e_decimal_mode": fm.e_decimal_mode,
            "score": "max(g0 z, -g1 z) + anomaly count",
        },
        fm,
        mask,
        scores,
    )


@dataclass(frozen=True)
class PCAModel:
    """Top principal components of a standardized matrix.

    Components are rows, ordered by decreasing explained variance, each
    signed so its largest-magnitude entry is positive (eigenvectors are
    otherwise sign-ambiguous and runs would not be comparable).
    """

    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (matrix - self.mean) @ self.components.T


def fit_pca(matrix: np.ndarray, n_components: int = 2) -> PCAModel:
    """Eigendecomposition of the population covariance matrix."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-d matrix with at least 2 rows")
    if not 1 <= n_components <= x.shape[1]:
        raise ValueError(f"n_components out of range: {n_components}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAModel(
        components=components,
        explained_variance=np.maximum(eigvals[order], 0.0),
        mean=mean,
    )


def _relabel_by_first_member(assignment: np.ndarray) -> np.ndarray:
    """Renumber cluster ids (noise -1 kept) in order of first appearance."""
    labels = np.full(len(assignment), -1, dtype=np.int64)
    next_id = 0
    seen: dict[int, int] = {}
    for i, a in enumerate(assignment):
        if a == -1:
            continue
        if a not in seen:
            seen[a] = next_id
            next_id += 1
        labels[i] = seen[a]
    return labels


def cluster_agglomerative(points: np.ndarray) -> np.ndarray:
    """Ward-linkage agglomeration, cut before the most separated merge.

    Pairwise merge costs follow the Lance-Williams recurrence on squared
    Euclidean distances; merge heights are the square roots of the costs.
    Raw heights are a poor cut signal: Ward inflates them by cluster size,
    so the routine junctions of a large corpus tower over the merge that
    absorbs a genuine outlier. Each merge is therefore scored by its
    prominence, the height divided by sqrt(ni*nj/(ni+nj)), which is the
    plain centroid separation of the two sides. The dendrogram is cut just
    before the earliest merge whose prominence reaches half the maximum:
    everything at least half as forced as the most forced merge stays
    unmerged. For well separated groups the group junction dominates and
    the cut recovers them exactly; isolated points keep their own clusters.
    Returns one label per point.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n == 1:
        return np.zeros(1, dtype=np.int64)

    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    merges: list[tuple[int, int]] = []
    heights: list[float] = []
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    work = d2.copy()
    merge_sizes: list[tuple[float, float]] = []
    for _ in range(n - 1):
        flat = np.argmin(work)
        i, j = divmod(int(flat), n)
        if i > j:
            i, j = j, i
        cost = work[i, j]
        heights.append(float(np.sqrt(cost)))
        merges.append((i, j))
        merge_sizes.append((float(sizes[i]), float(sizes[j])))
        # Lance-Williams update for Ward: cluster j folds into cluster i.
        ni, nj = sizes[i], sizes[j]
        others = active.copy()
        others[i] = others[j] = False
        nk = sizes[others]
        work[i, others] = (
            (ni + nk) * work[i, others] + (nj + nk) * work[j, others] - nk * cost
        ) / (ni + nj + nk)
        work[others, i] = work[i, others]
        sizes[i] = ni + nj
        active[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf

    if n == 2:
        return np.array([0, 1], dtype=np.int64)
    h = np.array(heights)
    sz = np.array(merge_sizes)
    # Ward height = sqrt(ni*nj/(ni+nj)) * centroid distance; divide the size
    # factor back out so merges are compared by separation alone.
    prominence = h / np.sqrt(sz[:, 0] * sz[:, 1] / (sz[:, 0] + sz[:, 1]))
    pmax = float(prominence.max())
    if pmax <= 0.0:
        return np.zeros(n, dtype=np.int64)
    # Stop before the earliest merge at least half as separated as the most
    # separated one; performing merges[:first] leaves n - first clusters.
    first = int(np.argmax(prominence >= pmax / 2.0))
    for i, j in merges[:first]:
        parent[find(j)] = find(i)
    roots = np.array([find(i) for i in range(n)])
    return _relabel_by_first_member(roots)


def cluster_meanshift(
    points: np.ndarray,
    bandwidth: float | None = None,
    tol: float = 1e-6,
    max_iter: int = 300,
) -> np.ndarray:
    """Flat-kernel mean shift.

    Default bandwidth is the 30th percentile of pairwise distances. Every
    point ascends to the mean of its bandwidth-neighbours until it moves
    less than ``tol``; converged positions within ``bandwidth / 2`` of each
    other collapse to one mode, scanned in point order. A bandwidth of zero
    (all points identical) is an error.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= 1:
        return np.zeros(n, dtype=np.int64)
    if bandwidth is None:
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        pair = dist[np.triu_indices(n, k=1)]
        bandwidth = float(np.percentile(pair, 30))
    if bandwidth <= 0.0:
        raise ValueError("bandwidth is zero: all points identical")

    modes = pts.copy()
    for _ in range(max_iter):
        diff = modes[:, None, :] - pts[None, :, :]
        within = np.einsum("ijk,ijk->ij", diff, diff) <= bandwidth * bandwidth
        counts = within.sum(axis=1)
        new_modes = (within.astype(np.float64) @ pts) / counts[:, None]
        shift = np.linalg.norm(new_modes - modes, axis=1)
        modes = new_modes
        if shift.max() < tol:
            break

    centers: list[np.ndarray] = []
    assignment = np.empty(n, dtype=np.int64)
    half = bandwidth / 2.0
    for i in range(n):
        for c, center in enumerate(centers):
            if np.linalg.norm(modes[i] - center) <= half:
                assignment[i] = c
                break
        else:
            centers.append(modes[i])
            assignment[i] = len(centers) - 1
    return assignment


def knee_epsilon(matrix: np.ndarray, k: int = 4) -> float:
    """Eps from the sorted k-th-nearest-neighbour curve.

    The primary pick is the knee: the point of the ascending curve farthest
    from the chord between its endpoints. On a corpus with genuine outliers
    the curve has an elbow right before the outlier tail and the knee sits
    there. On a clean corpus the curve is featureless and the knee lands at
    an arbitrary small value, which would spray noise labels over perfectly
    normal files; so the result is floored at a robust fence over the same
    k-NN distances (median + 3.5/0.6745 MADs, the package-wide outlier
    threshold in distance space) and additionally at 3x the median k-NN
    distance. The latter matters when counts quantize the distances so
    tightly that the MAD collapses to zero; it keeps the floor at the scale
    of the dense field. Genuine outlier distances run one to two orders of
    magnitude past the field median, so neither floor can hide a real tail.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n = len(x)
    if n <= k:
        raise ValueError(f"need more than {k} points, got {n}")
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    kth = np.sort(dist, axis=1)[:, k - 1]
    curve = np.sort(kth)
    m = len(curve)
    x0, y0 = 0.0, curve[0]
    x1, y1 = float(m - 1), curve[-1]
    span = np.hypot(x1 - x0, y1 - y0)
    if span == 0.0:
        return float(curve[0])
    idx = np.arange(m, dtype=np.float64)
    # Perpendicular distance from each curve point to the chord.
    offset = np.abs((y1 - y0) * idx - (x1 - x0) * curve + x1 * y0 - y1 * x0) / span
    knee = float(curve[int(np.argmax(offset))])

    med = float(np.median(kth))
    mad = float(np.median(np.abs(kth - med)))
    if mad > 0.0:
        fence = med + (Z_THRESHOLD / Z_SCALE) * mad
    else:
        q1, q3 = np.percentile(kth, [25, 75])
        fence = float(q3 + 1.5 * (q3 - q1)) or med
    return max(knee, fence, 3.0 * med)


def cluster_dbscan(
    matrix: np.ndarray, eps: float | None = None, min_samples: int = 5
) -> tuple[np.ndarray, float]:
    """Density clustering; returns (labels, eps). Noise points get -1.

    Neighbourhoods use closed balls of radius ``eps`` (self included in the
    core-point count). Expansion is breadth-first in point order, so labels
    are deterministic.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n = len(x)
    if eps is None:
        eps = knee_epsilon(x, k=min_samples - 1)
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")

    neighbors: list[np.ndarray] = []
    eps2 = eps * eps
    chunk = 512
    for start in range(0, n, chunk):
        block = x[start : start + chunk]
        diff = block[:, None, :] - x[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        for row in d2 <= eps2:
            neighbors.append(np.flatnonzero(row))

    labels = np.full(n, -2, dtype=np.int64)  # -2: unvisited
    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if len(neighbors[i]) < min_samples:
            labels[i] = -1
            continue
        labels[i] = cluster
        queue = list(neighbors[i])
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            if labels[j] == -1:
                labels[j] = cluster
            if labels[j] != -2:
                continue
            labels[j] = cluster
            if len(neighbors[j]) >= min_samples:
                queue.extend(neighbors[j])
        cluster += 1
    return labels, float(eps)


def flags_from_clusters(
    labels: np.ndarray,
    paths: tuple[str, ...],
    min_fraction: float = SMALL_CLUSTER_FRACTION,
) -> tuple[np.ndarray, float]:
    """Suspicion mask from a clustering: noise plus tiny clusters.

    A cluster is tiny when its size is at most ``max(2, min_fraction * n)``.
    Returns (mask, threshold).
    """
    labels = np.asarray(labels)
    n = len(labels)
    threshold = max(2.0, min_fraction * n)
    mask = np.zeros(n, dtype=bool)
    for label in np.unique(labels):
        members = labels == label
        if label == -1 or members.sum() <= threshold:
            mask |= members
    return mask, threshold


DETECTOR_NAMES = (
    "single_stat",
    "combined_stat",
    "pca_agglomerative",
    "pca_meanshift",
    "dbscan",
)


def _cluster_scores(labels: np.ndarray) -> np.ndarray:
    sizes = {label: int((labels == label).sum()) for label in np.unique(labels)}
    return np.array(
        [1.0 if lab == -1 else 1.0 / sizes[lab] for lab in labels], dtype=np.float64
    )


def run_detector(name: str, fm: FeatureMatrix, params: dict | None = None) -> FlagSet:
    """Run one registered detector with optional parameter overrides.

    Recognized overrides: ``threshold`` (stat detectors), ``bandwidth``
    (mean shift), ``eps`` and ``min_samples`` (dbscan), ``min_fraction``
    (all clustering detectors).
    """
    params = dict(params or {})
    if name == "single_stat":
        return detect_single_stat(fm, params.pop("threshold", Z_THRESHOLD))
    if name == "combined_stat":
        return detect_combined_stat(fm, params.pop("threshold", Z_THRESHOLD))

    min_fraction = params.pop("min_fraction", SMALL_CLUSTER_FRACTION)
    z = standardize(fm.matrix)
    if name in ("pca_agglomerative", "pca_meanshift"):
        pca = fit_pca(z, n_components=2)
        pts = pca.transform(z)
        if name == "pca_agglomerative":
            labels = cluster_agglomerative(pts)
            extra = {}
        else:
            bandwidth = params.pop("bandwidth", None)
            labels = cluster_meanshift(pts, bandwidth=bandwidth)
            extra = {"bandwidth": bandwidth if bandwidth is not None else "p30 pairwise"}
        mask, threshold = flags_from_clusters(labels, fm.paths, min_fraction)
        parameters = {
            "space": "pca2 of standardized counts",
            "explained_variance": [float(v) for v in pca.explained_variance],
            "small_cluster_max": threshold,
            "clusters": int(labels.max()) + 1 if len(labels) else 0,
            "score": "1/cluster size (noise: 1)",
            **extra,
        }
        return _flagset(name, parameters, fm, mask, _cluster_scores(labels))
    if name == "dbscan":
        min_samples = params.pop("min_samples", 5)
        labels, eps = cluster_dbscan(z, eps=params.pop("eps", None), min_samples=min_samples)
        mask, threshold = flags_from_clusters(labels, fm.paths, min_fraction)
        parameters = {
            "space": "standardized counts",
            "eps": eps,
            "min_samples": min_samples,
            "small_cluster_max": threshold,
            "clusters": int(labels.max()) + 1 if len(labels) else 0,
            "score": "1/cluster size (noise: 1)",
        }
        return _flagset(name, parameters, fm, mask, _cluster_scores(labels))
    raise ValueError(f"unknown detector: {name!r}")
