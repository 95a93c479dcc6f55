"""Unsupervised detectors over mixed-type datasets: LOF, DBSCAN, K-Means,
and the per-attribute inter-centroid ranking used to point auditors at the
noisiest fields.

LOF and DBSCAN run on the Gower distance from :mod:`affidavit_audit.tabular`.
K-Means needs a mean-closed space, so it runs on a numeric embedding:
z-scored numeric columns plus one 0/1 indicator per nominal label, with
missing cells imputed to the column mean (numeric) or an all-zero indicator
block (nominal).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .tabular import AttributeKind, Dataset, pairwise_distances

# lrd stand-in for points whose whole neighborhood sits at distance zero;
# keeps every score finite while duplicates score exactly 1.
LRD_CAP = 1e12

NOISE = -1

DEFAULT_LOF_K = 10
DEFAULT_LOF_THRESHOLD = 1.5
DEFAULT_DBSCAN_EPS = 0.15
DEFAULT_DBSCAN_MIN_PTS = 5
DEFAULT_KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class LofResult:
    scores: np.ndarray
    k: int


@dataclass(frozen=True)
class DbscanResult:
    labels: np.ndarray  # cluster id per row, NOISE (-1) for noise
    eps: float
    min_pts: int


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: np.ndarray          # (k, dim) in embedding space
    assignment: np.ndarray         # cluster id per row
    inertia: float
    inertia_trace: tuple[float, ...]
    attribute_slices: tuple[tuple[str, int, int], ...]  # (name, lo, hi) into the embedding


def lof_from_matrix(dist: np.ndarray, k: int) -> np.ndarray:
    """LOF scores from a precomputed distance matrix.

    Neighborhoods include every tie at the k-th distance.  Points whose
    k-distance is 0 (at least k duplicates) get lrd LRD_CAP and score
    exactly 1.
    """
    n = dist.shape[0]
    if n < 2:
        raise DataError("LOF needs at least 2 rows")
    if not (1 <= k < n):
        raise DataError(f"LOF k must satisfy 1 <= k < {n}, got {k}")
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    kdist = np.partition(d, k - 1, axis=1)[:, k - 1]
    dup = kdist == 0.0

    block = 512
    sizes = np.empty(n, dtype=np.int64)
    reach_sum = np.empty(n, dtype=np.float64)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        member = d[lo:hi] <= kdist[lo:hi, None]
        sizes[lo:hi] = member.sum(axis=1)
        reach = np.maximum(kdist[None, :], d[lo:hi])
        reach_sum[lo:hi] = np.where(member, reach, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(dup, LRD_CAP, sizes / np.where(reach_sum > 0, reach_sum, 1.0))

    scores = np.empty(n, dtype=np.float64)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        member = d[lo:hi] <= kdist[lo:hi, None]
        scores[lo:hi] = np.where(member, lrd[None, :], 0.0).sum(axis=1)
    scores = scores / sizes / lrd
    scores = np.where(dup, 1.0, scores)
    return scores


def lof_scores(ds: Dataset, k: int = DEFAULT_LOF_K) -> LofResult:
    """Local Outlier Factor of every row under the mixed-type distance."""
    return LofResult(lof_from_matrix(pairwise_distances(ds), k), k)


def lof_flag(result: LofResult, threshold: float = DEFAULT_LOF_THRESHOLD) -> np.ndarray:
    """Boolean per-row flags: score strictly above the threshold."""
    if threshold <= 0:
        raise DataError("LOF threshold must be > 0")
    return result.scores > threshold


def dbscan_from_matrix(dist: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN labels from a precomputed distance matrix.

    Core points count themselves.  Cluster ids are assigned in order of
    seed-row discovery (ascending row scan); a border point joins the
    cluster of the lowest-index core point within eps.
    """
    if eps <= 0:
        raise DataError("eps must be > 0")
    if min_pts < 1:
        raise DataError("min_pts must be >= 1")
    n = dist.shape[0]
    within = dist <= eps
    core = within.sum(axis=1) >= min_pts
    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        stack = [seed]
        labels[seed] = cluster
        while stack:
            p = stack.pop()
            for q in np.nonzero(within[p] & core)[0]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    stack.append(int(q))
        cluster += 1
    for i in range(n):
        if core[i] or labels[i] != NOISE:
            continue
        reachers = np.nonzero(within[i] & core)[0]
        if len(reachers) > 0:
            labels[i] = labels[reachers[0]]
    return labels


def dbscan(ds: Dataset, eps: float = DEFAULT_DBSCAN_EPS,
           min_pts: int = DEFAULT_DBSCAN_MIN_PTS) -> DbscanResult:
    return DbscanResult(dbscan_from_matrix(pairwise_distances(ds), eps, min_pts),
                        eps, min_pts)


def build_embedding(ds: Dataset) -> tuple[np.ndarray, tuple[tuple[str, int, int], ...]]:
    """Numeric embedding for K-Means: z-scored numerics, one-hot nominals.

    Returns the (n, dim) matrix and per-attribute (name, lo, hi) column
    slices.  Indicator columns follow the sorted label order of each
    nominal attribute; missing cells embed as 0 in every coordinate.
    """
    n = ds.n_rows
    blocks: list[np.ndarray] = []
    slices: list[tuple[str, int, int]] = []
    pos = 0
    for name, kind in ds.schema.attributes:
        if kind is AttributeKind.NUMERIC:
            col = ds.numeric_column(name)
            obs = ~np.isnan(col)
            z = np.zeros(n, dtype=np.float64)
            if obs.any():
                mean = col[obs].mean()
                std = col[obs].std()
                if std > 0:
                    z[obs] = (col[obs] - mean) / std
            blocks.append(z[:, None])
            slices.append((name, pos, pos + 1))
            pos += 1
        else:
            cats = ds.categories(name)
            order = sorted(range(len(cats)), key=lambda c: cats[c])
            width = len(cats)
            block = np.zeros((n, width), dtype=np.float64)
            codes = ds.nominal_codes(name)
            for j, code in enumerate(order):
                block[:, j] = codes == code
            blocks.append(block)
            slices.append((name, pos, pos + width))
            pos += width
    if pos == 0:
        raise DataError("cannot embed a dataset with no attributes")
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return X, tuple(slices)


def _sq_dist_to(X: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = X - c[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    d2 = _sq_dist_to(X, centroids[0])
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[c] = X[idx]
        d2 = np.minimum(d2, _sq_dist_to(X, centroids[c]))
    return centroids


def kmeans(ds: Dataset, k: int, seed: int = 0,
           max_iter: int = DEFAULT_KMEANS_MAX_ITER) -> Clustering:
    """Lloyd's algorithm with seeded k-means++ initialization.

    Runs on the one-hot/z-score embedding; empty clusters are repaired by
    reseeding at the point farthest from its assigned centroid.  Stops when
    assignments are stable or after max_iter passes.
    """
    n = ds.n_rows
    if not (1 <= k <= n):
        raise DataError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if max_iter < 1:
        raise DataError("max_iter must be >= 1")
    X, slices = build_embedding(ds)
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)

    assignment = None
    trace: list[float] = []
    for _ in range(max_iter):
        d2 = np.stack([_sq_dist_to(X, centroids[c]) for c in range(k)], axis=1)
        new_assignment = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(n), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        empty = []
        for c in range(k):
            mask = assignment == c
            if mask.any():
                centroids[c] = X[mask].mean(axis=0)
            else:
                empty.append(c)
        taken: set[int] = set()
        for c in empty:
            own = np.einsum("ij,ij->i", X - centroids[assignment],
                            X - centroids[assignment])
            for used in taken:
                own[used] = -1.0
            far = int(np.argmax(own))
            taken.add(far)
            centroids[c] = X[far]
    inertia = float(np.sum((X - centroids[assignment]) ** 2))
    return Clustering(k, centroids, assignment, inertia, tuple(trace), slices)


def centroid_attribute_distances(clustering: Clustering, ds: Dataset):
    """Per-attribute distance between the two centroids, largest first.

    Numeric attributes use the absolute coordinate difference; nominal
    attributes the Euclidean norm over their indicator block.  Ties sort
    by attribute name.
    """
    if clustering.k != 2:
        raise DataError("attribute ranking requires exactly 2 clusters")
    c0, c1 = clustering.centroids
    entries = []
    for name, lo, hi in clustering.attribute_slices:
        if hi - lo == 1 and ds.schema.kind_of(name) is AttributeKind.NUMERIC:
            dist = float(abs(c0[lo] - c1[lo]))
        else:
            dist = float(np.sqrt(((c0[lo:hi] - c1[lo:hi]) ** 2).sum()))
        entries.append((name, dist))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return AttributeRanking(tuple(entries))


@dataclass(frozen=True)
class AttributeRanking:
    entries: tuple[tuple[str, float], ...]

    def top(self) -> str | None:
        return self.entries[0][0] if self.entries else None
